#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rdcache/error.hpp"
#include "rdcache/f_separable.hpp"
#include "rdcache/rate_distortion.hpp"

using namespace rdcache;

namespace {

std::vector<DistortionTransform> sample_transforms() {
    return {DistortionTransform::identity(), DistortionTransform::power(2.0), DistortionTransform::power(0.5),
            DistortionTransform::exp(1.0), DistortionTransform::exp(-2.0),
            DistortionTransform::table({0.0, 0.5, 1.0, 2.0}, {0.1, 0.2, 1.0, 1.5})};
}

}  // namespace

TEST_CASE("transform values and inverses") {
    for (const auto& f : sample_transforms()) {
        CAPTURE(f.describe());
        double prev = -1e300;
        for (int i = 0; i <= 40; ++i) {
            const double t = 2.0 * i / 40.0;
            const double y = f(t);
            CHECK(y > prev);
            prev = y;
            CHECK(std::abs(f.inverse(y) - t) < 1e-10);
        }
    }
    CHECK(DistortionTransform::exp(1.0)(1.0) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-15));
    CHECK(DistortionTransform::table({0.0, 1.0}, {2.0, 3.0}).offset() == 2.0);
    CHECK_THROWS_AS(DistortionTransform::power(0.0), Error);
    CHECK_THROWS_AS(DistortionTransform::exp(0.0), Error);
    CHECK_THROWS_AS(DistortionTransform::table({0.0, 1.0, 1.0}, {0.0, 1.0, 2.0}), Error);
    CHECK_THROWS_AS(DistortionTransform::table({0.0, 1.0}, {1.0, 0.5}), Error);
    try {
        DistortionTransform::power(-1.0);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidTransform);
    }
}

TEST_CASE("distortion matrix transform") {
    const Matrix d(2, 3, std::vector<double>{0.0, 0.5, 1.0, 1.0, 0.5, 0.0});
    CHECK(transform_distortion_matrix(d, DistortionTransform::identity()).matrix == d);
    CHECK(transform_distortion_matrix(hamming_matrix(3), DistortionTransform::power(2.0)).matrix == hamming_matrix(3));
    const TransformedDistortion e = transform_distortion_matrix(d, DistortionTransform::exp(1.0));
    CHECK(e.shift == 0.0);
    CHECK(e.matrix(0, 0) == 0.0);
    CHECK(e.matrix(0, 1) == doctest::Approx(std::exp(0.5) - 1.0).epsilon(1e-15));
    CHECK(e.matrix(0, 2) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-15));
    // nonzero f(0) is shifted away and recorded
    const TransformedDistortion s = transform_distortion_matrix(d, DistortionTransform::table({0.0, 1.0}, {1.0, 3.0}));
    CHECK(s.shift == 1.0);
    CHECK(s.matrix(1, 2) == 0.0);
    CHECK(s.matrix(0, 2) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("f-separable average obeys the mean axioms") {
    const Matrix d(3, 3, std::vector<double>{0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0});
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::size_t> sym(0, 2);
    for (const auto& f : sample_transforms()) {
        CAPTURE(f.describe());
        for (int t = 0; t < 30; ++t) {
            const std::size_t n = 2 + t % 7;
            std::vector<std::size_t> xh(n), x(n);
            for (std::size_t i = 0; i < n; ++i) {
                xh[i] = sym(rng);
                x[i] = sym(rng);
            }
            const double m = f_separable_eval(xh, x, d, f);
            double lo = 1e9, hi = -1e9, mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                lo = std::min(lo, d(xh[i], x[i]));
                hi = std::max(hi, d(xh[i], x[i]));
                mean += d(xh[i], x[i]) / n;
            }
            // internality
            CHECK(m >= lo - 1e-12);
            CHECK(m <= hi + 1e-12);
            if (f.kind() == DistortionTransform::Kind::Identity) CHECK(std::abs(m - mean) < 1e-12);
            // symmetry
            std::vector<std::size_t> order(n);
            for (std::size_t i = 0; i < n; ++i) order[i] = i;
            std::shuffle(order.begin(), order.end(), rng);
            std::vector<std::size_t> xh2(n), x2(n);
            for (std::size_t i = 0; i < n; ++i) {
                xh2[i] = xh[order[i]];
                x2[i] = x[order[i]];
            }
            CHECK(std::abs(f_separable_eval(xh2, x2, d, f) - m) < 1e-12);
            // monotonicity: raising one letter's distortion cannot lower the mean
            std::vector<std::size_t> worse = xh;
            for (std::size_t cand = 0; cand < 3; ++cand)
                if (d(cand, x[0]) >= d(xh[0], x[0])) worse[0] = cand;
            CHECK(f_separable_eval(worse, x, d, f) >= m - 1e-12);
            // partial-mean replacement: a block replaced by its own mean keeps the total
            const std::size_t k = n / 2;
            const double block = f_separable_eval(std::span(xh).first(k), std::span(x).first(k), d, f);
            double acc = k * f(block);
            for (std::size_t i = k; i < n; ++i) acc += f(d(xh[i], x[i]));
            CHECK(std::abs(f.inverse(acc / n) - m) < 1e-9);
        }
        // idempotence
        const std::vector<std::size_t> xh{0, 1, 2, 0}, x{1, 2, 1, 1};
        CHECK(std::abs(f_separable_eval(xh, x, d, f) - 0.5) < 1e-12);
    }
    // hand value: f(t) = 2^t - 1 over distortions (0, 1): f^{-1}(1/2) = log2(1.5)
    const DistortionTransform two = DistortionTransform::exp(std::log(2.0));
    const std::vector<std::size_t> a{0, 1}, b{0, 0};
    CHECK(f_separable_eval(a, b, hamming_matrix(2), two) == doctest::Approx(std::log2(1.5)).epsilon(1e-12));
    CHECK_THROWS_AS(f_separable_eval(std::vector<std::size_t>{0}, b, hamming_matrix(2), two), Error);
}

TEST_CASE("f-separable RDC reduction") {
    const SourceLibrary lib = dsbs_library(0.2);
    RDCOptions opts;
    opts.restarts = 6;
    const std::vector<DistortionTransform> ids(2, DistortionTransform::identity());
    const DistortionTuple D = DistortionTuple::uniform(2, 0.05);
    const TradeoffPoint base = rdc_value(lib, D, 0.4, opts);
    const TradeoffPoint same = f_separable_rdc(lib, ids, D, 0.4, opts);
    CHECK(same.rate == base.rate);
    CHECK(same.cache_used == base.cache_used);

    const std::vector<DistortionTransform> sq(2, DistortionTransform::power(2.0));
    const DistortionTuple Z = DistortionTuple::zeros(2);
    CHECK(std::abs(f_separable_rdc(lib, sq, Z, 0.4, opts).rate - rdc_value(lib, Z, 0.4, opts).rate) < 1e-12);
    const TradeoffPoint squared = f_separable_rdc(lib, sq, D, 0.4, opts);
    CHECK(squared.distortions.values == D.values);
    CHECK(std::abs(squared.rate - rdc_value(lib, DistortionTuple::uniform(2, 0.0025), 0.4, opts).rate) < 1e-12);

    // at zero cache the value is the largest transformed marginal RD
    const std::vector<DistortionTransform> ex{DistortionTransform::exp(1.0), DistortionTransform::exp(2.0)};
    const SourceLibrary tl = transformed_library(lib, ex);
    const DistortionTuple tD = transformed_targets(D, ex);
    double gmax = 0.0;
    for (std::size_t l = 0; l < 2; ++l)
        gmax = std::max(gmax, rd_function(tl.source_marginal(l), tl.distortion(l), tD[l]).rate);
    CHECK(std::abs(f_separable_rdc(lib, ex, D, 0.0, opts).rate - gmax) < 1e-5);

    // non-increasing in D
    double prev = 1e9;
    for (double d : {0.0, 0.05, 0.1, 0.2}) {
        const double r = f_separable_rdc(lib, ex, DistortionTuple::uniform(2, d), 0.3, opts).rate;
        CHECK(r <= prev + 1e-5);
        prev = r;
    }
    CHECK_THROWS_AS(f_separable_rdc(lib, ids, DistortionTuple::zeros(3), 0.1), Error);
    CHECK_THROWS_AS(transformed_library(lib, {DistortionTransform::identity()}), Error);
}
