#include "rdcache/closed_forms.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "rdcache/common_info.hpp"
#include "rdcache/error.hpp"
#include "rdcache/rate_distortion.hpp"

namespace rdcache {

double binary_entropy(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "binary entropy argument outside [0,1]");
    if (p == 0.0 || p == 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double binary_entropy_inverse(double y) {
    if (!(y >= 0.0 && y <= 1.0)) throw Error(ErrorCode::InvalidArgument, "binary entropy inverse argument outside [0,1]");
    if (y == 0.0) return 0.0;
    if (y == 1.0) return 0.5;
    double lo = 0.0, hi = 0.5;
    while (hi - lo > 1e-15) {
        const double mid = 0.5 * (lo + hi);
        (binary_entropy(mid) < y ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double iid_identical_rdc(std::span<const double> pmf, const Matrix& distortion, double D, double C,
                         std::size_t L) {
    if (C < 0.0) throw Error(ErrorCode::InvalidCache, "cache capacity must be >= 0");
    if (L == 0) throw Error(ErrorCode::InvalidArgument, "L must be positive");
    const double r = rd_function(pmf, distortion, D).rate;
    return std::max(0.0, r - C / static_cast<double>(L));
}

namespace {

void check_rho(double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw Error(ErrorCode::RhoOutOfRange, "Gaussian correlation must lie in (0,1)");
}

void check_dc(double D, double C) {
    if (!(D > 0.0) || !std::isfinite(D)) throw Error(ErrorCode::InvalidArgument, "Gaussian distortion must be > 0");
    if (!(C >= 0.0)) throw Error(ErrorCode::InvalidCache, "cache capacity must be >= 0");
}

}  // namespace

double gaussian_joint_rd(double rho, double D) {
    check_rho(rho);
    check_dc(D, 0.0);
    if (D > 1.0) return 0.0;
    if (D <= 1.0 - rho) return 0.5 * std::log2((1.0 - rho * rho) / (D * D));
    return 0.5 * std::log2((1.0 + rho) / (2.0 * D - (1.0 - rho)));
}

RegionTag classify_gaussian_region(double rho, double D, double C) {
    check_rho(rho);
    check_dc(D, C);
    const double joint = gaussian_joint_rd(rho, D);
    const double kw = wyner_ci_gaussian(rho);
    if (C >= joint) return {GaussianRegion::S1, true};
    if (C >= kw) return {GaussianRegion::S2, true};
    if (D <= 1.0 - rho) return {GaussianRegion::S3, false};
    return {GaussianRegion::S4, false};
}

double gaussian_pair_superuser_term(double rho, double D, double C) {
    return 0.25 * std::log2((1.0 - rho * rho) / (D * D)) - 0.5 * C;
}

GaussianRDC bivariate_gaussian_rdc(double rho, double D, double C) {
    const RegionTag tag = classify_gaussian_region(rho, D, C);
    switch (tag.region) {
        case GaussianRegion::S1: return {0.0, tag};
        case GaussianRegion::S2: return {gaussian_pair_superuser_term(rho, D, C), tag};
        default: break;
    }
    const double inner = 1.0 - 0.5 * (1.0 + rho) * (1.0 - std::exp2(-2.0 * C));
    return {std::max(0.0, 0.5 * std::log2(inner / D)), tag};
}

GaussianLowerBound gaussian_superuser_lower(const Matrix& covariance, double D, double C) {
    const std::size_t L = covariance.rows();
    if (L == 0 || covariance.cols() != L) throw Error(ErrorCode::ShapeMismatch, "covariance must be square");
    if (L > 8) throw Error(ErrorCode::InstanceTooLarge, "at most 8 sources");
    check_dc(D, C);
    Eigen::MatrixXd K(L, L);
    for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = 0; j < L; ++j) K(i, j) = covariance(i, j);
    if (Eigen::LLT<Eigen::MatrixXd>(K).info() != Eigen::Success) {
        throw Error(ErrorCode::InvalidArgument, "covariance must be positive definite");
    }

    GaussianLowerBound best{-std::numeric_limits<double>::infinity(), 0.0, {}};
    for (std::uint32_t mask = 1; mask < (1u << L); ++mask) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < L; ++i)
            if (mask & (1u << i)) idx.push_back(i);
        const auto n = static_cast<Eigen::Index>(idx.size());
        Eigen::MatrixXd sub(n, n);
        for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = 0; b < n; ++b) sub(a, b) = K(idx[a], idx[b]);
        const double s = static_cast<double>(n);
        const double term = (std::log2(sub.determinant()) - s * std::log2(D)) / (2.0 * s) - C / s;
        if (term > best.raw) {
            best.raw = term;
            best.subset = std::move(idx);
        }
    }
    best.clamped = std::max(0.0, best.raw);
    return best;
}

double dsbs_rho_star(double rho) {
    if (!(rho >= 0.0 && rho <= 0.5)) throw Error(ErrorCode::RhoOutOfRange, "DSBS crossover must lie in [0, 1/2]");
    return 0.5 - 0.5 * std::sqrt(1.0 - 2.0 * rho);
}

DsbsBounds dsbs_rdc_bounds(double rho, double C) {
    if (!(rho >= 0.0 && rho <= 0.5)) throw Error(ErrorCode::RhoOutOfRange, "DSBS crossover must lie in [0, 1/2]");
    if (!(C >= 0.0)) throw Error(ErrorCode::InvalidCache, "cache capacity must be >= 0");
    const double total = 1.0 + binary_entropy(rho);
    if (C == 0.0) return {1.0, 1.0, true};
    if (C >= total) return {0.0, 0.0, true};
    const double kw = wyner_ci_dsbs(rho);
    const double half = 0.5 * (total - C);
    if (C >= kw) return {half, half, true};
    const double lower = std::max(half, std::max(0.0, 1.0 - C));
    const double arg = std::clamp((1.0 - rho - C) / (1.0 - rho), 0.0, 1.0);
    const double alpha = binary_entropy_inverse(arg);
    const double upper = binary_entropy(std::clamp((1.0 - rho) * alpha + 0.5 * rho, 0.0, 1.0));
    return {lower, upper, false};
}

}  // namespace rdcache
