#include "rdcache/info.hpp"

#include <cmath>
#include <numeric>

#include "rdcache/error.hpp"

namespace rdcache {

namespace {

void check_pmf(std::span<const double> pmf) {
    double total = 0.0;
    for (double p : pmf) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorCode::InvalidPmf, "negative or non-finite mass");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::InvalidPmf, "mass does not sum to one");
}

inline double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

}  // namespace

double entropy_unchecked(std::span<const double> pmf) {
    double h = 0.0;
    for (double p : pmf) h -= plogp(p);
    return h > 0.0 ? h : 0.0;
}

double entropy(std::span<const double> pmf) {
    check_pmf(pmf);
    return entropy_unchecked(pmf);
}

double mutual_information_unchecked(const Matrix& joint) {
    std::vector<double> pa(joint.rows(), 0.0), pb(joint.cols(), 0.0);
    for (std::size_t a = 0; a < joint.rows(); ++a)
        for (std::size_t b = 0; b < joint.cols(); ++b) {
            pa[a] += joint(a, b);
            pb[b] += joint(a, b);
        }
    double mi = 0.0;
    for (std::size_t a = 0; a < joint.rows(); ++a)
        for (std::size_t b = 0; b < joint.cols(); ++b) {
            const double p = joint(a, b);
            if (p > 0.0) mi += p * std::log2(p / (pa[a] * pb[b]));
        }
    return mi > 0.0 ? mi : 0.0;
}

double mutual_information(const Matrix& joint) {
    check_pmf(joint.data());
    return mutual_information_unchecked(joint);
}

double conditional_mutual_information(std::span<const double> joint, std::size_t na, std::size_t nb,
                                      std::size_t nu) {
    if (joint.size() != na * nb * nu) throw Error(ErrorCode::InvalidPmf, "joint size mismatch");
    check_pmf(joint);
    JointTable t({na, nb, nu}, std::vector<double>(joint.begin(), joint.end()));
    return t.mutual_information(0b001, 0b010, 0b100);
}

double channel_mutual_information(std::span<const double> p, const Matrix& channel) {
    std::vector<double> q(channel.cols(), 0.0);
    for (std::size_t x = 0; x < channel.rows(); ++x)
        for (std::size_t y = 0; y < channel.cols(); ++y) q[y] += p[x] * channel(x, y);
    double mi = 0.0;
    for (std::size_t x = 0; x < channel.rows(); ++x) {
        if (p[x] <= 0.0) continue;
        for (std::size_t y = 0; y < channel.cols(); ++y) {
            const double w = channel(x, y);
            if (w > 0.0) mi += p[x] * w * std::log2(w / q[y]);
        }
    }
    return mi > 0.0 ? mi : 0.0;
}

JointTable::JointTable(std::vector<std::size_t> dims, std::vector<double> pmf)
    : dims_(std::move(dims)), pmf_(std::move(pmf)) {
    std::size_t total = 1;
    for (std::size_t d : dims_) total *= d;
    if (pmf_.size() != total) throw Error(ErrorCode::InvalidPmf, "joint table size mismatch");
    strides_.assign(dims_.size(), 1);
    for (std::size_t i = dims_.size(); i-- > 1;) strides_[i - 1] = strides_[i] * dims_[i];
}

JointTable::JointTable(std::vector<std::size_t> dims)
    : JointTable(dims, std::vector<double>(std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                                                           std::multiplies<>()),
                                           0.0)) {}

std::vector<double> JointTable::marginal(std::uint32_t mask) const {
    std::size_t size = 1;
    for (std::size_t v = 0; v < dims_.size(); ++v)
        if (mask & (1u << v)) size *= dims_[v];
    std::vector<double> out(size, 0.0);
    for (std::size_t j = 0; j < pmf_.size(); ++j) {
        if (pmf_[j] == 0.0) continue;
        std::size_t idx = 0;
        for (std::size_t v = 0; v < dims_.size(); ++v)
            if (mask & (1u << v)) idx = idx * dims_[v] + (j / strides_[v]) % dims_[v];
        out[idx] += pmf_[j];
    }
    return out;
}

double JointTable::entropy(std::uint32_t mask) const {
    if (mask == 0) return 0.0;
    return entropy_unchecked(marginal(mask));
}

double JointTable::mutual_information(std::uint32_t a, std::uint32_t b, std::uint32_t c) const {
    const double mi = entropy(a | c) + entropy(b | c) - entropy(a | b | c) - entropy(c);
    return mi > 0.0 ? mi : 0.0;
}

}  // namespace rdcache
