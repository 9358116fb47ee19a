#include <doctest.h>

#include <numeric>

#include "rdcache/error.hpp"
#include "rdcache/source_model.hpp"

using namespace rdcache;

namespace {

RawSource bernoulli_pair() {
    RawSource raw;
    raw.alphabet_sizes = {2, 2};
    raw.pmf = {0.25, 0.25, 0.25, 0.25};
    return raw;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("uniform pair with hamming defaults is accepted") {
    const auto lib = validate_library(bernoulli_pair());
    CHECK(lib.num_sources() == 2);
    CHECK(lib.recon_size(1) == 2);
    CHECK(lib.distortion(0) == hamming_matrix(2));
}

TEST_CASE("validation errors") {
    auto raw = bernoulli_pair();
    raw.pmf = {0.125, 0.125, 0.125, 0.125};
    CHECK(code_of([&] { validate_library(raw); }) == ErrorCode::NotNormalized);

    raw = bernoulli_pair();
    raw.pmf = {0.5, -0.25, 0.5, 0.25};
    CHECK(code_of([&] { validate_library(raw); }) == ErrorCode::NegativeMass);

    raw = bernoulli_pair();
    raw.distortions = {Matrix(2, 2, std::vector<double>{0, 1, 1, 1}), Matrix()};
    CHECK(code_of([&] { validate_library(raw); }) == ErrorCode::MissingZeroDistortionSymbol);

    raw = bernoulli_pair();
    raw.distortions = {Matrix(2, 2, std::vector<double>{0, 1e300 * 1e10, 1, 0}), Matrix()};
    CHECK(code_of([&] { validate_library(raw); }) == ErrorCode::InfiniteDistortion);

    raw = bernoulli_pair();
    raw.d_max = 0.5;
    CHECK(code_of([&] { validate_library(raw); }) == ErrorCode::InfiniteDistortion);

    raw = bernoulli_pair();
    raw.pmf.pop_back();
    CHECK(code_of([&] { validate_library(raw); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("near-normalized pmf is renormalized") {
    auto raw = bernoulli_pair();
    raw.pmf[0] += 5e-10;
    const auto lib = validate_library(raw);
    CHECK(std::accumulate(lib.pmf().begin(), lib.pmf().end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("validation is idempotent") {
    const auto lib = dsbs_library(0.2);
    CHECK(validate_library(to_raw(lib)) == lib);
}

TEST_CASE("dsbs library") {
    CHECK(dsbs_library(0.1).pmf() == std::vector<double>{0.45, 0.05, 0.05, 0.45});
    CHECK(dsbs_library(0.0).pmf() == std::vector<double>{0.5, 0.0, 0.0, 0.5});
    for (double rho : {0.0, 0.13, 0.37, 0.5}) {
        const auto lib = dsbs_library(rho);
        for (std::size_t l : {0u, 1u}) {
            const std::size_t s[] = {l};
            const auto m = marginal(lib, s);
            CHECK(m[0] == doctest::Approx(0.5));
            CHECK(m[1] == doctest::Approx(0.5));
        }
        CHECK(lib.pmf()[1] + lib.pmf()[2] == doctest::Approx(rho));
    }
    CHECK(code_of([] { dsbs_library(0.6); }) == ErrorCode::RhoOutOfRange);
    CHECK(code_of([] { dsbs_library(-0.1); }) == ErrorCode::RhoOutOfRange);
}

TEST_CASE("marginals") {
    const auto lib = dsbs_library(0.1);
    const std::size_t both[] = {0, 1};
    CHECK(marginal(lib, both) == lib.pmf());

    // product p (x) q: second marginal is q
    RawSource raw;
    raw.alphabet_sizes = {2, 3};
    const double p[] = {0.3, 0.7}, q[] = {0.2, 0.5, 0.3};
    for (double a : p)
        for (double b : q) raw.pmf.push_back(a * b);
    const auto prod = validate_library(raw);
    const std::size_t second[] = {1};
    const auto m = marginal(prod, second);
    for (int i = 0; i < 3; ++i) CHECK(m[i] == doctest::Approx(q[i]).epsilon(1e-12));

    const std::size_t none[] = {0};
    CHECK(code_of([&] { marginal(lib, std::span<const std::size_t>(none, 0)); }) == ErrorCode::EmptySubset);
    const std::size_t bad[] = {2};
    CHECK(code_of([&] { marginal(lib, bad); }) == ErrorCode::IndexOutOfRange);
}

TEST_CASE("marginal of marginal") {
    RawSource raw;
    raw.alphabet_sizes = {2, 3, 2};
    raw.pmf.resize(12);
    for (std::size_t i = 0; i < 12; ++i) raw.pmf[i] = double(i + 1) / 78.0;
    const auto lib = validate_library(raw);
    const std::size_t s[] = {0, 2};
    const auto sub = sub_library(lib, s);
    const std::size_t inner[] = {1};
    const std::size_t outer[] = {2};
    const auto a = marginal(sub, inner);
    const auto b = marginal(lib, outer);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
}
