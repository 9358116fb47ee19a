#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rdcache/matrix.hpp"

namespace rdcache {

// Information measures in bits with the 0 log 0 = 0 convention. The public
// functions validate their input (InvalidPmf); the *_unchecked variants are
// for inner loops that already hold a valid distribution.

double entropy(std::span<const double> pmf);

/// I(A;B) for a joint pmf with rows indexed by a and columns by b.
double mutual_information(const Matrix& joint);

/// I(A;B|U) for a joint pmf flattened row-major over (a, b, u).
double conditional_mutual_information(std::span<const double> joint, std::size_t na, std::size_t nb,
                                      std::size_t nu);

double entropy_unchecked(std::span<const double> pmf);
double mutual_information_unchecked(const Matrix& joint);

/// I(X;Y) for input pmf p and channel rows p(y|x).
double channel_mutual_information(std::span<const double> p, const Matrix& channel);

/// Joint pmf over several discrete variables, row-major with the first
/// variable slowest. Entropies of any subset of variables (bit mask) are
/// obtained by marginalization.
class JointTable {
public:
    JointTable(std::vector<std::size_t> dims, std::vector<double> pmf);
    explicit JointTable(std::vector<std::size_t> dims);

    const std::vector<std::size_t>& dims() const noexcept { return dims_; }
    std::vector<double>& pmf() noexcept { return pmf_; }
    const std::vector<double>& pmf() const noexcept { return pmf_; }

    double entropy(std::uint32_t mask) const;
    /// I(A;B|C) with A, B, C given as variable masks.
    double mutual_information(std::uint32_t a, std::uint32_t b, std::uint32_t c = 0) const;

    std::vector<double> marginal(std::uint32_t mask) const;

private:
    std::vector<std::size_t> dims_;
    std::vector<std::size_t> strides_;
    std::vector<double> pmf_;
};

}  // namespace rdcache
