#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rdcache/matrix.hpp"

namespace rdcache {

/// h(p) in bits.
double binary_entropy(double p);

/// Inverse of h on [0, 1/2], by bisection to 1e-12.
double binary_entropy_inverse(double y);

/// L identical independent sources: [R_X(D) - C/L]^+.
double iid_identical_rdc(std::span<const double> pmf, const Matrix& distortion, double D, double C,
                         std::size_t L);

/// Joint RD of the unit-variance bivariate Gaussian pair with correlation
/// rho under a common squared-error target D.
double gaussian_joint_rd(double rho, double D);

enum class GaussianRegion { S1, S2, S3, S4 };

struct RegionTag {
    GaussianRegion region;
    bool exact;  // S1 and S2 carry the exact RDC value, S3 and S4 an upper bound
};

/// Boundary points go to the region with the exact result (S1, then S2).
RegionTag classify_gaussian_region(double rho, double D, double C);

struct GaussianRDC {
    double rate;
    RegionTag tag;
};

GaussianRDC bivariate_gaussian_rdc(double rho, double D, double C);

struct GaussianLowerBound {
    double raw;      // max over subsets, may be negative
    double clamped;  // max(raw, 0)
    std::vector<std::size_t> subset;  // maximizing subset
};

/// max over nonempty S of (1/(2|S|)) log2(det K_S / D^|S|) - C/|S|.
GaussianLowerBound gaussian_superuser_lower(const Matrix& covariance, double D, double C);

/// Pair-subset term only, S = {1, 2} of a unit-variance pair.
double gaussian_pair_superuser_term(double rho, double D, double C);

struct DsbsBounds {
    double lower;
    double upper;
    bool exact;
};

/// Lossless RDC bounds for the DSBS with crossover rho.
DsbsBounds dsbs_rdc_bounds(double rho, double C);

/// rho* = 1/2 - sqrt(1 - 2 rho)/2.
double dsbs_rho_star(double rho);

}  // namespace rdcache
