#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rdcache/matrix.hpp"
#include "rdcache/rdc_solver.hpp"
#include "rdcache/source_model.hpp"

namespace rdcache {

/// Strictly increasing scalar map applied to per-letter distortions.
///   identity: f(t) = t
///   power:    f(t) = t^p, p > 0 (t >= 0)
///   exp:      f(t) = (e^{a t} - 1) / a, a != 0
///   table:    piecewise linear through strictly increasing samples,
///             extended linearly past both ends
class DistortionTransform {
public:
    enum class Kind { Identity, Power, Exp, Table };

    static DistortionTransform identity();
    static DistortionTransform power(double exponent);
    static DistortionTransform exp(double scale);
    static DistortionTransform table(std::vector<double> xs, std::vector<double> ys);

    Kind kind() const noexcept { return kind_; }
    double parameter() const noexcept { return param_; }
    const std::vector<double>& table_x() const noexcept { return xs_; }
    const std::vector<double>& table_y() const noexcept { return ys_; }

    double operator()(double t) const;
    double inverse(double y) const;
    /// f(0); the reduction subtracts it so that zero stays zero.
    double offset() const { return (*this)(0.0); }

    std::string describe() const;

private:
    Kind kind_ = Kind::Identity;
    double param_ = 0.0;
    std::vector<double> xs_, ys_;
};

struct TransformedDistortion {
    Matrix matrix;       // f(d) - shift
    double shift = 0.0;  // f(0)
};

TransformedDistortion transform_distortion_matrix(const Matrix& d, const DistortionTransform& f);

/// f^{-1}( (1/n) sum_i f(d(xhat_i, x_i)) ).
double f_separable_eval(std::span<const std::size_t> xhat_seq, std::span<const std::size_t> x_seq,
                        const Matrix& d, const DistortionTransform& f);

/// Library with every d_l replaced by f_l(d_l) - f_l(0).
SourceLibrary transformed_library(const SourceLibrary& lib, const std::vector<DistortionTransform>& transforms);

/// Targets f_l(D_l) - f_l(0).
DistortionTuple transformed_targets(const DistortionTuple& D, const std::vector<DistortionTransform>& transforms);

/// R_f(D, C) evaluated as R_{d*}(f(D), C) on the transformed library. The
/// returned point carries the caller's D, not the transformed targets.
TradeoffPoint f_separable_rdc(const SourceLibrary& lib, const std::vector<DistortionTransform>& transforms,
                              const DistortionTuple& D, double C, const RDCOptions& opts = {});

}  // namespace rdcache
