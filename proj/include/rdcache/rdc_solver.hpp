#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rdcache/matrix.hpp"
#include "rdcache/rate_distortion.hpp"
#include "rdcache/source_model.hpp"

namespace rdcache {

/// p(u | x̄): rows are joint source symbols, columns auxiliary letters.
struct AuxChannel {
    Matrix matrix;
    std::size_t aux_size() const noexcept { return matrix.cols(); }
};

enum class Method { Solver, Oracle, Genie, Superuser, SuperGenie, ClosedForm };
std::string to_string(Method m);

struct TradeoffPoint {
    double cache = 0.0;
    DistortionTuple distortions;
    double rate = 0.0;
    std::optional<AuxChannel> witness;
    Method method = Method::Solver;
    double cache_used = 0.0;  // I(X̄;U) of the witness
    bool converged = true;
};

struct RDCOptions {
    std::uint64_t seed = 0;
    int restarts = 20;         // random Dirichlet starts
    int polish = 3;            // best starts refined to min_step
    std::size_t aux_cap = 0;   // 0: |X̄| + 2L (|X̄| + L for Hamming at D = 0)
    double coarse_step = 1.0 / 64.0;
    double min_step = 1e-5;
    int max_partition_starts = 256;
    double lattice_budget = 2000;  // coarse lattice scan for starts; 0 disables
    BAOptions search_ba{1e-7, 100000, 1e-6, 200, false};
};

/// Auxiliary alphabet size used for (lib, D) under opts.
std::size_t default_aux_size(const SourceLibrary& lib, const DistortionTuple& D, std::size_t user_cap = 0);

/// Objective of the RDC program for a fixed auxiliary channel.
struct AuxEvaluation {
    double cache_used;                // I(X̄;U)
    std::vector<double> rates;        // R_{X_l|U}(D_l)
    double max_rate;
};
AuxEvaluation evaluate_aux_channel(const SourceLibrary& lib, const DistortionTuple& D, const AuxChannel& aux,
                                   const BAOptions& ba = {});

/// R(D, C): heuristic multistart local search over p(u|x̄) with I(X̄;U) <= C.
TradeoffPoint rdc_value(const SourceLibrary& lib, const DistortionTuple& D, double C, const RDCOptions& opts = {});

/// Exhaustive search over p(u|x̄) with entries on the lattice 1/grid_steps.
/// Requires |X̄| <= 4 and aux_size <= 3.
TradeoffPoint rdc_brute_force(const SourceLibrary& lib, const DistortionTuple& D, double C, int grid_steps,
                              std::size_t aux_size = 2);

/// One grid scan answering many cache values.
std::vector<TradeoffPoint> rdc_brute_force_curve(const SourceLibrary& lib, const DistortionTuple& D,
                                                 const std::vector<double>& caches, int grid_steps,
                                                 std::size_t aux_size = 2);

/// Slack between the grid optimum and the continuous optimum (bits) used by
/// the tests: the lattice point nearest an optimal channel moves each row by
/// at most a/(2 steps) in total variation, and the objective is at most
/// log-Lipschitz in that distance. Value: eps*log2(|X̄|*a) + h(eps) with
/// eps = (a - 1)/(2 steps) for a = aux_size.
double grid_gap(int grid_steps, std::size_t joint_size, std::size_t aux_size);

double genie_bound(const SourceLibrary& lib, const DistortionTuple& D, double C);
double superuser_bound(const SourceLibrary& lib, const DistortionTuple& D, double C);
double super_genie_bound(const SourceLibrary& lib, const DistortionTuple& D, double C);

/// Inputs of the bounds, computed once per (lib, D).
struct BoundTerms {
    std::vector<double> marginal_rates;  // R_{X_l}(D_l)
    double joint_rate = 0.0;             // R_X̄(D)
    std::vector<std::pair<std::size_t, double>> subset_rates;  // (mask, R_{X_S}(D_S))
};
BoundTerms bound_terms(const SourceLibrary& lib, const DistortionTuple& D);
double genie_bound(const BoundTerms& t, double C);
double superuser_bound(const BoundTerms& t, std::size_t L, double C);
double super_genie_bound(const BoundTerms& t, double C);

struct CurvePoint {
    double cache;
    double rate_raw;
    double rate_envelope;
    double genie;
    double superuser;
    double super_genie;
    std::size_t witness_aux_size;
    double cache_used;
    bool converged;
    std::optional<AuxChannel> witness;
};

struct TradeoffCurve {
    DistortionTuple distortions;
    std::vector<CurvePoint> points;
    double max_monotonicity_violation = 0.0;
    std::vector<std::string> warnings;
};

/// Solver plus bounds over a cache grid. Neighbouring solutions seed each
/// other and time-sharing between grid witnesses is tried at every point.
TradeoffCurve rdc_curve(const SourceLibrary& lib, const DistortionTuple& D, const std::vector<double>& caches,
                        const RDCOptions& opts = {});

/// Largest C with R = g, read off the curve (tolerance 1e-4) and refined
/// by bisection between the bracketing grid points.
double critical_capacity_genie(const SourceLibrary& lib, const DistortionTuple& D, const TradeoffCurve& curve,
                               const RDCOptions& opts = {}, double tol = 1e-4);

/// Smallest C with R = s, same procedure.
double critical_capacity_superuser(const SourceLibrary& lib, const DistortionTuple& D, const TradeoffCurve& curve,
                                   const RDCOptions& opts = {}, double tol = 1e-4);

struct GrayWynerPoint {
    double common_rate;                  // I(X̄;U)
    std::vector<double> private_rates;   // I(X_l; X̂_l | U) of explicit test channels
    std::vector<double> achieved_distortions;
    double min_max_rate;
};

/// Min over the Gray-Wyner region slice at common rate C of max_l R_l. The
/// search space is the one of rdc_value; the private rates are recomputed
/// from explicit joint test channels (U, X̂_l) as a consistency check.
GrayWynerPoint gray_wyner_min_max(const SourceLibrary& lib, const DistortionTuple& D, double C,
                                  const RDCOptions& opts = {});

}  // namespace rdcache
