#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rdcache/matrix.hpp"

namespace rdcache {

/// Unvalidated description of an L-component source, as read from a spec
/// file or assembled in code. An empty distortion matrix means Hamming.
struct RawSource {
    std::vector<std::size_t> alphabet_sizes;
    std::vector<double> pmf;
    std::vector<std::size_t> recon_alphabet_sizes;  // empty: same as alphabet_sizes
    std::vector<Matrix> distortions;                // |X̂_l| x |X_l| each; empty entry = Hamming
    std::optional<double> d_max;
};

/// Joint pmf of L finite-alphabet sources plus per-source distortion
/// matrices d_l(x̂, x). Immutable once built by validate_library.
class SourceLibrary {
public:
    std::size_t num_sources() const noexcept { return alphabet_sizes_.size(); }
    std::size_t joint_size() const noexcept { return pmf_.size(); }
    std::size_t alphabet_size(std::size_t l) const { return alphabet_sizes_.at(l); }
    std::size_t recon_size(std::size_t l) const { return recon_sizes_.at(l); }
    const std::vector<std::size_t>& alphabet_sizes() const noexcept { return alphabet_sizes_; }
    const std::vector<std::size_t>& recon_alphabet_sizes() const noexcept { return recon_sizes_; }
    const std::vector<double>& pmf() const noexcept { return pmf_; }
    const Matrix& distortion(std::size_t l) const { return distortions_.at(l); }
    const std::vector<Matrix>& distortions() const noexcept { return distortions_; }
    double d_max() const noexcept { return d_max_; }

    /// Symbol of source l inside the flattened joint index (row-major).
    std::size_t symbol(std::size_t joint_index, std::size_t l) const {
        return (joint_index / strides_[l]) % alphabet_sizes_[l];
    }
    std::size_t stride(std::size_t l) const { return strides_.at(l); }

    std::vector<double> source_marginal(std::size_t l) const;

    bool operator==(const SourceLibrary&) const = default;

private:
    friend SourceLibrary validate_library(const RawSource& raw);

    std::vector<std::size_t> alphabet_sizes_;
    std::vector<std::size_t> recon_sizes_;
    std::vector<std::size_t> strides_;
    std::vector<double> pmf_;
    std::vector<Matrix> distortions_;
    double d_max_ = 0.0;
};

/// Non-negative distortion targets, one per source.
struct DistortionTuple {
    std::vector<double> values;

    DistortionTuple() = default;
    explicit DistortionTuple(std::vector<double> v);

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }

    static DistortionTuple zeros(std::size_t n) { return DistortionTuple(std::vector<double>(n, 0.0)); }
    static DistortionTuple uniform(std::size_t n, double d) { return DistortionTuple(std::vector<double>(n, d)); }
};

Matrix hamming_matrix(std::size_t n);

/// Validates shapes, mass and distortion conditions. A pmf whose total is
/// within 1e-9 of one is renormalized; otherwise NotNormalized is thrown.
SourceLibrary validate_library(const RawSource& raw);

/// Recover the raw description of a validated library (identity on shapes).
RawSource to_raw(const SourceLibrary& lib);

/// Exact marginal pmf of X_S, flattened row-major in increasing index order.
std::vector<double> marginal(const SourceLibrary& lib, std::span<const std::size_t> subset);

/// The sub-library (X_S, d_S) with S sorted ascending.
SourceLibrary sub_library(const SourceLibrary& lib, std::span<const std::size_t> subset);

/// Doubly symmetric binary source with crossover rho and Hamming distortions.
SourceLibrary dsbs_library(double rho);

/// L independent copies of a single pmf with a shared distortion matrix.
SourceLibrary iid_library(std::span<const double> pmf, const Matrix& distortion, std::size_t copies);

}  // namespace rdcache
