#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rdcache/matrix.hpp"
#include "rdcache/source_model.hpp"

namespace rdcache {

/// Two receivers share one delivery message; only user 1 has a cache.
/// User 1 asks for a source in demands1 under the library's distortions
/// d_l and targets D, user 2 for a source in demands2 under delta_l and
/// targets Delta. Source indices are 0-based.
struct TwoUserInstance {
    SourceLibrary lib;
    std::vector<std::size_t> demands1;
    std::vector<std::size_t> demands2;
    std::vector<Matrix> delta;  // per source; empty entry = Hamming
    DistortionTuple D;          // user 1, one entry per source
    DistortionTuple Delta;      // user 2, one entry per source
    double cache = 0.0;
};

/// Validates demand sets, user-2 distortion matrices and targets; fills
/// empty delta entries with Hamming matrices.
TwoUserInstance make_two_user_instance(SourceLibrary lib, std::vector<std::size_t> demands1,
                                       std::vector<std::size_t> demands2, DistortionTuple D, DistortionTuple Delta,
                                       double cache, std::vector<Matrix> delta = {});

struct TwoUserGridOptions {
    int grid_steps = 16;                   // lattice 1/grid_steps for exhaustive scans and first local step
    std::size_t aux_size = 0;              // 0: program default
    std::size_t max_grid_points = 200000;  // exhaustive scan when the lattice is no larger
    int random_starts = 6;
    int refine_levels = 6;                 // local step halvings below 1/grid_steps
    std::uint64_t seed = 0;
};

struct TwoUserBound {
    double value = 0.0;
    double slack = 0.0;         // lattice-resolution continuity bound (bits)
    bool exhaustive = false;    // lattice fully enumerated
    std::size_t aux_size = 0;   // 0 when the program has no auxiliary
    std::size_t evaluations = 0;
};

/// Achievable rate: min over (U, X̂, X̃) of
///   max_{l1,l2} max{ I(X̄;U,X̂_l1,X̃_l2) - C, I(U,X̄;X̃_l2) + I(X̄;X̂_l1|U,X̃_l2) }.
/// Reconstructions are drawn independently given (X̄, U); any such choice
/// is admissible, so the search value stays an upper bound. Default aux 3.
TwoUserBound two_user_upper(const TwoUserInstance& inst, const TwoUserGridOptions& opts = {});

/// Genie lower bound: min over (X̂, X̃) of
///   max_{l1,l2} max{ I(X̄;X̃_l2), I(X̄;X̂_l1,X̃_l2) - C }.
/// Convex in the joint reconstruction channel, which is searched whole.
TwoUserBound two_user_lower_genie(const TwoUserInstance& inst, const TwoUserGridOptions& opts = {});

/// Average-demand lower bound for lossless user 2 (Delta = 0), demand I ~ p_I
/// over demands2 independent of the sources:
///   min over p(x̂|x̄) p(u|x̂,x̄,i) of max_l1 max{ I(X̄;U,X̂_l1,X_I|I) - C,
///                                              H(X_I|I) + I(X̄;X̂_l1|U,X_I,I) }.
/// Default aux min(|X̄| + 2 L1, |X̂-family| + 1).
TwoUserBound two_user_avg_lower(const TwoUserInstance& inst, const std::vector<double>& p_I,
                                const TwoUserGridOptions& opts = {});

struct TwoUserDsbsBounds {
    double lower;
    double upper;
    double d_star;
    bool exact;  // D <= D*
};

/// Closed forms for a DSBS library, both users demanding either source,
/// Hamming distortions, symmetric D at user 1 and lossless user 2.
TwoUserDsbsBounds two_user_dsbs_bounds(double rho, double D, double C);

/// Lossless closed forms for both users: max over pairs of
/// max{ H(X_l2), H(X_l1, X_l2) - C }.
double two_user_lossless_lower(const SourceLibrary& lib, const std::vector<std::size_t>& demands1,
                               const std::vector<std::size_t>& demands2, double C);

}  // namespace rdcache
