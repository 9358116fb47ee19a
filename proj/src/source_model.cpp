#include "rdcache/source_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rdcache/error.hpp"

namespace rdcache {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NegativeMass: return "NegativeMass";
        case ErrorCode::NotNormalized: return "NotNormalized";
        case ErrorCode::MissingZeroDistortionSymbol: return "MissingZeroDistortionSymbol";
        case ErrorCode::InfiniteDistortion: return "InfiniteDistortion";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptySubset: return "EmptySubset";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::RhoOutOfRange: return "RhoOutOfRange";
        case ErrorCode::InvalidPmf: return "InvalidPmf";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::InfeasibleTarget: return "InfeasibleTarget";
        case ErrorCode::InvalidCache: return "InvalidCache";
        case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
        case ErrorCode::ConditionViolated: return "ConditionViolated";
        case ErrorCode::InvalidTransform: return "InvalidTransform";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

DistortionTuple::DistortionTuple(std::vector<double> v) : values(std::move(v)) {
    for (double d : values) {
        if (!(d >= 0.0) || !std::isfinite(d)) {
            throw Error(ErrorCode::InvalidArgument, "distortion targets must be finite and >= 0");
        }
    }
}

Matrix hamming_matrix(std::size_t n) {
    Matrix d(n, n, 1.0);
    for (std::size_t i = 0; i < n; ++i) d(i, i) = 0.0;
    return d;
}

std::vector<double> SourceLibrary::source_marginal(std::size_t l) const {
    std::vector<double> out(alphabet_sizes_.at(l), 0.0);
    for (std::size_t j = 0; j < pmf_.size(); ++j) out[symbol(j, l)] += pmf_[j];
    return out;
}

SourceLibrary validate_library(const RawSource& raw) {
    const std::size_t L = raw.alphabet_sizes.size();
    if (L == 0) throw Error(ErrorCode::ShapeMismatch, "library needs at least one source");
    std::size_t total = 1;
    for (std::size_t a : raw.alphabet_sizes) {
        if (a == 0) throw Error(ErrorCode::ShapeMismatch, "alphabet sizes must be positive");
        total *= a;
    }
    if (raw.pmf.size() != total) {
        throw Error(ErrorCode::ShapeMismatch, "pmf has " + std::to_string(raw.pmf.size()) +
                                                  " entries, expected " + std::to_string(total));
    }

    double mass = 0.0;
    for (double p : raw.pmf) {
        if (!std::isfinite(p)) throw Error(ErrorCode::InvalidPmf, "pmf entries must be finite");
        if (p < 0.0) throw Error(ErrorCode::NegativeMass, "pmf entry " + std::to_string(p));
        mass += p;
    }
    if (std::abs(mass - 1.0) > 1e-9) {
        throw Error(ErrorCode::NotNormalized, "pmf sums to " + std::to_string(mass));
    }

    SourceLibrary lib;
    lib.alphabet_sizes_ = raw.alphabet_sizes;
    lib.recon_sizes_ = raw.recon_alphabet_sizes.empty() ? raw.alphabet_sizes : raw.recon_alphabet_sizes;
    if (lib.recon_sizes_.size() != L) throw Error(ErrorCode::ShapeMismatch, "recon_alphabet_sizes length");

    lib.strides_.assign(L, 1);
    for (std::size_t l = L; l-- > 1;) lib.strides_[l - 1] = lib.strides_[l] * raw.alphabet_sizes[l];

    lib.pmf_ = raw.pmf;
    for (double& p : lib.pmf_) p /= mass;

    if (!raw.distortions.empty() && raw.distortions.size() != L) {
        throw Error(ErrorCode::ShapeMismatch, "need one distortion matrix per source");
    }
    double observed_max = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        Matrix d = (raw.distortions.empty() || raw.distortions[l].empty())
                       ? Matrix{}
                       : raw.distortions[l];
        if (d.empty()) {
            if (lib.recon_sizes_[l] != raw.alphabet_sizes[l]) {
                throw Error(ErrorCode::ShapeMismatch, "Hamming distortion needs |X̂| = |X|");
            }
            d = hamming_matrix(raw.alphabet_sizes[l]);
        }
        if (d.rows() != lib.recon_sizes_[l] || d.cols() != raw.alphabet_sizes[l]) {
            throw Error(ErrorCode::ShapeMismatch, "distortion matrix " + std::to_string(l) + " shape");
        }
        for (double v : d.data()) {
            if (!std::isfinite(v)) throw Error(ErrorCode::InfiniteDistortion, "non-finite distortion");
            if (v < 0.0) throw Error(ErrorCode::InvalidArgument, "negative distortion");
            if (raw.d_max && v > *raw.d_max) {
                throw Error(ErrorCode::InfiniteDistortion, "distortion exceeds declared D_max");
            }
            observed_max = std::max(observed_max, v);
        }
        for (std::size_t x = 0; x < d.cols(); ++x) {
            bool has_zero = false;
            for (std::size_t xh = 0; xh < d.rows(); ++xh) has_zero = has_zero || d(xh, x) == 0.0;
            if (!has_zero) {
                throw Error(ErrorCode::MissingZeroDistortionSymbol,
                            "source " + std::to_string(l) + " symbol " + std::to_string(x));
            }
        }
        lib.distortions_.push_back(std::move(d));
    }
    lib.d_max_ = raw.d_max.value_or(observed_max);
    return lib;
}

RawSource to_raw(const SourceLibrary& lib) {
    RawSource raw;
    raw.alphabet_sizes = lib.alphabet_sizes();
    raw.pmf = lib.pmf();
    raw.recon_alphabet_sizes = lib.recon_alphabet_sizes();
    raw.distortions = lib.distortions();
    raw.d_max = lib.d_max();
    return raw;
}

namespace {

std::vector<std::size_t> checked_subset(const SourceLibrary& lib, std::span<const std::size_t> subset) {
    if (subset.empty()) throw Error(ErrorCode::EmptySubset, "subset must be nonempty");
    std::vector<std::size_t> s(subset.begin(), subset.end());
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    if (s.back() >= lib.num_sources()) {
        throw Error(ErrorCode::IndexOutOfRange, "source index " + std::to_string(s.back()));
    }
    return s;
}

}  // namespace

std::vector<double> marginal(const SourceLibrary& lib, std::span<const std::size_t> subset) {
    const auto s = checked_subset(lib, subset);
    std::size_t size = 1;
    for (std::size_t l : s) size *= lib.alphabet_size(l);
    std::vector<double> out(size, 0.0);
    for (std::size_t j = 0; j < lib.joint_size(); ++j) {
        std::size_t idx = 0;
        for (std::size_t l : s) idx = idx * lib.alphabet_size(l) + lib.symbol(j, l);
        out[idx] += lib.pmf()[j];
    }
    return out;
}

SourceLibrary sub_library(const SourceLibrary& lib, std::span<const std::size_t> subset) {
    const auto s = checked_subset(lib, subset);
    RawSource raw;
    raw.pmf = marginal(lib, s);
    double mass = std::accumulate(raw.pmf.begin(), raw.pmf.end(), 0.0);
    for (double& p : raw.pmf) p /= mass;
    for (std::size_t l : s) {
        raw.alphabet_sizes.push_back(lib.alphabet_size(l));
        raw.recon_alphabet_sizes.push_back(lib.recon_size(l));
        raw.distortions.push_back(lib.distortion(l));
    }
    raw.d_max = lib.d_max();
    return validate_library(raw);
}

SourceLibrary dsbs_library(double rho) {
    if (!(rho >= 0.0 && rho <= 0.5)) throw Error(ErrorCode::RhoOutOfRange, "DSBS needs 0 <= rho <= 0.5");
    RawSource raw;
    raw.alphabet_sizes = {2, 2};
    raw.pmf = {(1.0 - rho) / 2.0, rho / 2.0, rho / 2.0, (1.0 - rho) / 2.0};
    return validate_library(raw);
}

SourceLibrary iid_library(std::span<const double> pmf, const Matrix& distortion, std::size_t copies) {
    if (copies == 0) throw Error(ErrorCode::InvalidArgument, "need at least one copy");
    RawSource raw;
    raw.alphabet_sizes.assign(copies, pmf.size());
    raw.recon_alphabet_sizes.assign(copies, distortion.rows());
    raw.distortions.assign(copies, distortion);
    std::vector<double> joint{1.0};
    for (std::size_t c = 0; c < copies; ++c) {
        std::vector<double> next;
        next.reserve(joint.size() * pmf.size());
        for (double a : joint)
            for (double b : pmf) next.push_back(a * b);
        joint = std::move(next);
    }
    raw.pmf = std::move(joint);
    return validate_library(raw);
}

}  // namespace rdcache
