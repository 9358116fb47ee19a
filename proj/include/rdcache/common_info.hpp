#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rdcache/info.hpp"
#include "rdcache/matrix.hpp"
#include "rdcache/source_model.hpp"

namespace rdcache {

/// Multipartite support graph over the disjoint union of the source
/// alphabets; x in X_i and x' in X_j are adjacent when some positive-mass
/// joint symbol carries both. `component[l][x]` labels symbol x of source l.
struct CommonPartGraph {
    std::vector<std::vector<std::size_t>> component;
    std::size_t num_components = 0;
};

struct CommonInfoResult {
    double value = 0.0;  // bits
    CommonPartGraph graph;
};

CommonPartGraph common_part_graph(const SourceLibrary& lib, double mass_threshold = 1e-12);

/// Zero-distortion Gacs-Korner common information H(c(X_1)).
CommonInfoResult gacs_korner_zero(const SourceLibrary& lib);

/// A candidate for the lossy Gacs-Korner program: a joint pmf over
/// (X_1..X_L, U, X̂_1..X̂_L), first variable slowest.
struct GKCandidate {
    JointTable joint;
};

/// Build the candidate from p(u|x̄) (rows x̄) and per-source channels
/// p(x̂_l | x_l, u) with rows indexed x_l * |U| + u; the reconstructions are
/// conditionally independent given (X̄, U).
GKCandidate make_gk_candidate(const SourceLibrary& lib, const Matrix& aux,
                              const std::vector<Matrix>& recon_channels);

struct GKCheckReport {
    bool feasible = true;
    double value = 0.0;  // I(X̄;U)
    std::vector<std::string> violations;
};

/// Checks the four lossy Gacs-Korner conditions to 1e-6. The report form
/// never throws on violations; gacs_korner_lossy_check does.
GKCheckReport gacs_korner_lossy_report(const SourceLibrary& lib, const DistortionTuple& D,
                                       const GKCandidate& candidate, double tol = 1e-6);
GKCheckReport gacs_korner_lossy_check(const SourceLibrary& lib, const DistortionTuple& D,
                                      const GKCandidate& candidate, double tol = 1e-6);

/// Wyner common information of the DSBS: 1 + h(rho) - 2 h(rho*).
double wyner_ci_dsbs(double rho);

/// Wyner common information of the unit-variance Gaussian pair; +inf for
/// rho >= 1 - 1e-12.
double wyner_ci_gaussian(double rho);

struct KgkCgReport {
    double k_gk = 0.0;
    double c_g = 0.0;
    bool inequality_holds = false;    // C_g >= K_GK - tol
    bool marginal_rates_equal = false;
    bool equality_holds = false;      // |C_g - K_GK| <= tol
};

struct RDCOptions;

/// Compares the zero-distortion Gacs-Korner value with the genie critical
/// capacity read off a solver curve. Only the D = 0 Hamming path is
/// supported (InvalidArgument otherwise).
KgkCgReport kgk_vs_cg_check(const SourceLibrary& lib, const DistortionTuple& D, const RDCOptions& opts,
                            int grid_points = 21, double tol = 1e-3);

}  // namespace rdcache
