#include "rdcache/f_separable.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rdcache/error.hpp"

namespace rdcache {

namespace {

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double t) {
    // index of the segment containing t, clamped to the end segments
    auto it = std::upper_bound(xs.begin(), xs.end(), t);
    std::size_t j = static_cast<std::size_t>(std::distance(xs.begin(), it));
    j = std::clamp<std::size_t>(j, 1, xs.size() - 1);
    const double w = (t - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return ys[j - 1] + w * (ys[j] - ys[j - 1]);
}

double checked(double v, const char* what) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidTransform, std::string(what) + " is not finite");
    return v;
}

}  // namespace

DistortionTransform DistortionTransform::identity() { return {}; }

DistortionTransform DistortionTransform::power(double exponent) {
    if (!(exponent > 0.0) || !std::isfinite(exponent))
        throw Error(ErrorCode::InvalidTransform, "power exponent must be finite and > 0");
    DistortionTransform f;
    f.kind_ = Kind::Power;
    f.param_ = exponent;
    return f;
}

DistortionTransform DistortionTransform::exp(double scale) {
    if (scale == 0.0 || !std::isfinite(scale)) throw Error(ErrorCode::InvalidTransform, "exp scale must be finite and nonzero");
    DistortionTransform f;
    f.kind_ = Kind::Exp;
    f.param_ = scale;
    return f;
}

DistortionTransform DistortionTransform::table(std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() < 2 || xs.size() != ys.size())
        throw Error(ErrorCode::InvalidTransform, "table needs at least two (x, y) samples of equal count");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw Error(ErrorCode::InvalidTransform, "table entries must be finite");
        if (i > 0 && !(xs[i] > xs[i - 1] && ys[i] > ys[i - 1]))
            throw Error(ErrorCode::InvalidTransform, "table must be strictly increasing in x and y");
    }
    DistortionTransform f;
    f.kind_ = Kind::Table;
    f.xs_ = std::move(xs);
    f.ys_ = std::move(ys);
    return f;
}

double DistortionTransform::operator()(double t) const {
    switch (kind_) {
        case Kind::Identity:
            return t;
        case Kind::Power:
            if (t < 0.0) throw Error(ErrorCode::InvalidTransform, "power transform needs t >= 0");
            return std::pow(t, param_);
        case Kind::Exp:
            return checked(std::expm1(param_ * t) / param_, "exp transform value");
        case Kind::Table:
            return interpolate(xs_, ys_, t);
    }
    return t;
}

double DistortionTransform::inverse(double y) const {
    switch (kind_) {
        case Kind::Identity:
            return y;
        case Kind::Power:
            if (y < 0.0) throw Error(ErrorCode::InvalidTransform, "power inverse needs y >= 0");
            return std::pow(y, 1.0 / param_);
        case Kind::Exp: {
            const double a = param_ * y;
            if (a <= -1.0) throw Error(ErrorCode::InvalidTransform, "value outside the range of the exp transform");
            return std::log1p(a) / param_;
        }
        case Kind::Table:
            return interpolate(ys_, xs_, y);
    }
    return y;
}

std::string DistortionTransform::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::Identity: os << "identity"; break;
        case Kind::Power: os << "power(" << param_ << ")"; break;
        case Kind::Exp: os << "exp(" << param_ << ")"; break;
        case Kind::Table: os << "table[" << xs_.size() << "]"; break;
    }
    return os.str();
}

TransformedDistortion transform_distortion_matrix(const Matrix& d, const DistortionTransform& f) {
    TransformedDistortion out{d, f.offset()};
    if (f.kind() == DistortionTransform::Kind::Identity) return out;
    for (double& v : out.matrix.data()) {
        if (v < 0.0) throw Error(ErrorCode::InvalidTransform, "distortion entries must be >= 0");
        v = f(v) - out.shift;
    }
    return out;
}

double f_separable_eval(std::span<const std::size_t> xhat_seq, std::span<const std::size_t> x_seq, const Matrix& d,
                        const DistortionTransform& f) {
    if (xhat_seq.size() != x_seq.size()) throw Error(ErrorCode::ShapeMismatch, "sequences differ in length");
    if (xhat_seq.empty()) throw Error(ErrorCode::InvalidArgument, "empty sequences");
    double acc = 0.0;
    for (std::size_t i = 0; i < x_seq.size(); ++i) {
        if (xhat_seq[i] >= d.rows() || x_seq[i] >= d.cols())
            throw Error(ErrorCode::IndexOutOfRange, "symbol outside the distortion matrix");
        acc += f(d(xhat_seq[i], x_seq[i]));
    }
    const double mean = acc / static_cast<double>(x_seq.size());
    // the average of f-values lies in f's range; clamp rounding just past the ends
    double lo = f(d(xhat_seq[0], x_seq[0])), hi = lo;
    for (std::size_t i = 1; i < x_seq.size(); ++i) {
        const double v = f(d(xhat_seq[i], x_seq[i]));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return f.inverse(std::clamp(mean, lo, hi));
}

SourceLibrary transformed_library(const SourceLibrary& lib, const std::vector<DistortionTransform>& transforms) {
    if (transforms.size() != lib.num_sources())
        throw Error(ErrorCode::ShapeMismatch, "one transform per source required");
    const bool all_identity = std::all_of(transforms.begin(), transforms.end(), [](const DistortionTransform& f) {
        return f.kind() == DistortionTransform::Kind::Identity;
    });
    if (all_identity) return lib;
    RawSource raw = to_raw(lib);
    raw.d_max.reset();
    for (std::size_t l = 0; l < lib.num_sources(); ++l)
        raw.distortions[l] = transform_distortion_matrix(lib.distortion(l), transforms[l]).matrix;
    return validate_library(raw);
}

DistortionTuple transformed_targets(const DistortionTuple& D, const std::vector<DistortionTransform>& transforms) {
    if (transforms.size() != D.size()) throw Error(ErrorCode::ShapeMismatch, "one transform per target required");
    std::vector<double> out(D.size());
    for (std::size_t l = 0; l < D.size(); ++l) out[l] = std::max(0.0, transforms[l](D[l]) - transforms[l].offset());
    return DistortionTuple(std::move(out));
}

TradeoffPoint f_separable_rdc(const SourceLibrary& lib, const std::vector<DistortionTransform>& transforms,
                              const DistortionTuple& D, double C, const RDCOptions& opts) {
    if (D.size() != lib.num_sources()) throw Error(ErrorCode::ShapeMismatch, "one target per source required");
    TradeoffPoint p = rdc_value(transformed_library(lib, transforms), transformed_targets(D, transforms), C, opts);
    p.distortions = D;
    return p;
}

}  // namespace rdcache
