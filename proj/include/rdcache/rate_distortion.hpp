#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rdcache/matrix.hpp"
#include "rdcache/source_model.hpp"

namespace rdcache {

/// Conditional pmf p(x̂ | context). The context is x, the pair (x, u) with
/// row index x * aux_size + u, or the joint source symbol x̄.
struct TestChannel {
    enum class Context { Source, SourceAndAux, JointSource };

    Matrix matrix;
    Context context = Context::Source;
    std::size_t aux_size = 1;
};

struct RDResult {
    double rate = 0.0;  // bits per symbol
    TestChannel achieving_channel;
    std::vector<double> achieved_distortions;
    int iterations = 0;
    bool converged = true;
    std::vector<double> slopes;  // Lagrange slopes (nats per unit distortion); empty at D = 0 or zero rate
};

struct BAOptions {
    double gap_tolerance = 1e-13;     // Blahut upper/lower bound gap, nats
    int max_iterations = 100000;      // per Blahut-Arimoto run
    double distortion_tolerance = 1e-7;
    int max_bisections = 200;
    bool strict = true;               // throw NoConvergence instead of flagging
};

/// R_X(D) = min I(X;X̂) subject to E d(X̂,X) <= D. Slope-parametrized
/// Blahut-Arimoto with bisection on the slope; the returned channel is a
/// mixture of the two bracketing solutions, so it meets D exactly.
RDResult rd_function(std::span<const double> pmf_x, const Matrix& distortion, double D,
                     const BAOptions& opts = {});

/// R_{X|U}(D) = min I(X;X̂|U) with one average distortion constraint.
/// `joint_xu` has rows x and columns u.
RDResult conditional_rd_function(const Matrix& joint_xu, const Matrix& distortion, double D,
                                 const BAOptions& opts = {});

struct JointRDOptions {
    BAOptions ba{};
    int outer_rounds = 50;
    double constraint_tolerance = 1e-6;
};

/// R_X̄(D) with L simultaneous constraints E d_l <= D_l. Coordinate-wise
/// bisection on the L slopes around a multi-cost Blahut-Arimoto inner loop.
RDResult joint_rd_function(const SourceLibrary& lib, const DistortionTuple& D,
                           const JointRDOptions& opts = {});

/// Distortion reachable at zero rate: min over x̂ of E d(x̂, X).
double zero_rate_distortion(std::span<const double> pmf_x, const Matrix& distortion);

/// Reusable solver for conditional RD problems sharing one distortion
/// matrix. Keeps the previous slope and output marginals to warm-start the
/// next call, which the RDC search relies on for speed. Only the rate is
/// produced; use conditional_rd_function for channels.
class ConditionalRDSolver {
public:
    explicit ConditionalRDSolver(const Matrix& distortion, BAOptions opts = {});

    /// p_u: weights p(u); px_given_u: rows u, columns x.
    double rate(std::span<const double> p_u, const Matrix& px_given_u, double D);

    bool last_converged() const noexcept { return last_converged_; }
    /// Slope of the last solve: 0 at zero rate, +inf at D = 0.
    double last_slope() const noexcept { return last_slope_; }

private:
    Matrix distortion_;
    BAOptions opts_;
    double warm_slope_ = 1.0;
    std::vector<std::vector<double>> warm_q_;
    bool last_converged_ = true;
    double last_slope_ = 0.0;
};

}  // namespace rdcache
