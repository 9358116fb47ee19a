#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rdcache/error.hpp"
#include "rdcache/rate_distortion.hpp"
#include "rdcache/two_user.hpp"

using namespace rdcache;

namespace {

SourceLibrary random_pair(std::mt19937_64& rng) {
    RawSource raw;
    raw.alphabet_sizes = {2, 2};
    raw.pmf = oracle::random_pmf(rng, 4);
    for (auto& v : raw.pmf) v = 0.9 * v + 0.025;
    return validate_library(raw);
}

}  // namespace

TEST_CASE("DSBS closed forms") {
    const double h01 = oracle::h2(0.1), h003 = oracle::h2(0.03);
    const TwoUserDsbsBounds b = two_user_dsbs_bounds(0.1, 0.03, 0.1);
    CHECK(b.exact);
    CHECK(b.d_star == doctest::Approx(0.0527864).epsilon(1e-6));
    CHECK(b.lower == doctest::Approx(1.0 + h01 - h003 - 0.1).epsilon(1e-12));
    CHECK(std::abs(b.upper - 1.17461) < 1e-4);
    CHECK(b.upper == b.lower);
    CHECK(std::abs(two_user_dsbs_bounds(0.1, 0.5, 0.2).upper - 1.0) < 1e-9);
    CHECK(two_user_dsbs_bounds(0.1, 0.03, 0.5).upper == 1.0);
    for (double D = 0.0; D <= 0.5; D += 0.01)
        for (double C : {0.0, 0.1, 0.4}) {
            const TwoUserDsbsBounds x = two_user_dsbs_bounds(0.1, D, C);
            CHECK(x.lower <= x.upper + 1e-12);
            if (x.exact) CHECK(std::abs(x.upper - x.lower) <= 1e-9);
        }
    CHECK_THROWS_AS(two_user_dsbs_bounds(0.6, 0.1, 0.1), Error);
    CHECK_THROWS_AS(two_user_dsbs_bounds(0.1, 0.6, 0.1), Error);
}

TEST_CASE("instance validation") {
    const SourceLibrary lib = dsbs_library(0.1);
    const DistortionTuple Z = DistortionTuple::zeros(2);
    CHECK_THROWS_AS(make_two_user_instance(lib, {}, {0}, Z, Z, 0.1), Error);
    CHECK_THROWS_AS(make_two_user_instance(lib, {2}, {0}, Z, Z, 0.1), Error);
    CHECK_THROWS_AS(make_two_user_instance(lib, {0}, {0}, Z, Z, -1.0), Error);
    CHECK_THROWS_AS(make_two_user_instance(lib, {0}, {0}, Z, Z, 0.1, {Matrix(2, 2, 1.0), Matrix()}), Error);
    const TwoUserInstance inst = make_two_user_instance(lib, {1, 0, 1}, {0}, Z, Z, 0.1);
    CHECK(inst.demands1 == std::vector<std::size_t>{0, 1});
    CHECK(inst.delta[1] == hamming_matrix(2));
    RawSource big;
    big.alphabet_sizes = {3, 2};
    big.pmf.assign(6, 1.0 / 6.0);
    const TwoUserInstance large = make_two_user_instance(validate_library(big), {0}, {1}, Z, Z, 0.0);
    CHECK_THROWS_AS(two_user_upper(large), Error);
    CHECK_THROWS_AS(two_user_avg_lower(inst, {0.5, 0.5}), Error);
    const TwoUserInstance lossy2 = make_two_user_instance(lib, {0}, {0}, Z, DistortionTuple::uniform(2, 0.1), 0.1);
    CHECK_THROWS_AS(two_user_avg_lower(lossy2, {1.0}), Error);
}

TEST_CASE("lossless grid search meets the closed forms") {
    std::mt19937_64 rng(21);
    TwoUserGridOptions opts;
    opts.aux_size = 2;
    for (int t = 0; t < 2; ++t) {
        const SourceLibrary lib = random_pair(rng);
        const DistortionTuple Z = DistortionTuple::zeros(2);
        for (double C : {0.0, 0.4}) {
            const TwoUserInstance both = make_two_user_instance(lib, {0, 1}, {0, 1}, Z, Z, C);
            const double closed = two_user_lossless_lower(lib, {0, 1}, {0, 1}, C);
            const TwoUserBound up = two_user_upper(both, opts);
            CHECK(up.exhaustive);
            CHECK(std::abs(up.value - closed) < 0.02);
            CHECK(std::abs(two_user_lower_genie(both, opts).value - closed) < 1e-9);
            // single user-1 demand: lower bound is tight
            const TwoUserInstance one = make_two_user_instance(lib, {1}, {0, 1}, Z, Z, C);
            CHECK(std::abs(two_user_upper(one, opts).value - two_user_lossless_lower(lib, {1}, {0, 1}, C)) < 0.02);
        }
    }
    // C = 0, one shared demand: a single lossless message
    const SourceLibrary lib = dsbs_library(0.1);
    const TwoUserInstance same =
        make_two_user_instance(lib, {0}, {0}, DistortionTuple::zeros(2), DistortionTuple::zeros(2), 0.0);
    CHECK(std::abs(two_user_upper(same, opts).value - 1.0) < 1e-9);
}

TEST_CASE("DSBS searches against the closed forms") {
    const SourceLibrary lib = dsbs_library(0.1);
    for (double C : {0.0, 0.1}) {
        const TwoUserInstance inst = make_two_user_instance(lib, {0, 1}, {0, 1}, DistortionTuple::uniform(2, 0.03),
                                                            DistortionTuple::zeros(2), C);
        const TwoUserDsbsBounds b = two_user_dsbs_bounds(0.1, 0.03, C);
        const TwoUserBound lo = two_user_lower_genie(inst);
        const TwoUserBound up = two_user_upper(inst);
        CHECK(std::abs(lo.value - b.lower) < 1e-3);
        CHECK(up.value >= lo.value - 1e-9);
        CHECK(std::abs(up.value - b.upper) < 0.02);
    }
}

TEST_CASE("bound ordering on random instances") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 4; ++t) {
        const SourceLibrary lib = random_pair(rng);
        const double D = 0.15 * u(rng), C = 0.6 * u(rng);
        const TwoUserInstance inst =
            make_two_user_instance(lib, {0}, {0, 1}, DistortionTuple::uniform(2, D), DistortionTuple::zeros(2), C);
        const TwoUserBound g = two_user_lower_genie(inst);
        const TwoUserBound up = two_user_upper(inst);
        CHECK(g.value <= up.value + 1e-9);
        // every user-2 term is at least H(X_l2)
        double hmax = 0.0;
        for (std::size_t l = 0; l < 2; ++l) hmax = std::max(hmax, oracle::H(lib.source_marginal(l)));
        CHECK(g.value >= hmax - 1e-9);

        // a point-mass demand distribution dominates the genie bound restricted to that demand
        for (std::size_t l2 = 0; l2 < 2; ++l2) {
            const TwoUserInstance single =
                make_two_user_instance(lib, {0}, {l2}, DistortionTuple::uniform(2, D), DistortionTuple::zeros(2), C);
            const TwoUserBound avg = two_user_avg_lower(single, {1.0});
            CHECK(avg.value >= two_user_lower_genie(single).value - 0.02);
            // with one demand the average bound has the upper bound's form
            CHECK(std::abs(avg.value - two_user_upper(single).value) < 0.02);
        }
        // average over demands lies below the worst demand
        const TwoUserBound mix = two_user_avg_lower(inst, {0.5, 0.5});
        CHECK(mix.value <= up.value + 0.02);
        CHECK(mix.value >= 0.5 * (oracle::H(lib.source_marginal(0)) + oracle::H(lib.source_marginal(1))) - 1e-9);
    }
}

TEST_CASE("search is deterministic") {
    std::mt19937_64 rng(8);
    const SourceLibrary lib = random_pair(rng);
    const TwoUserInstance inst =
        make_two_user_instance(lib, {0, 1}, {1}, DistortionTuple::uniform(2, 0.1), DistortionTuple::zeros(2), 0.2);
    TwoUserGridOptions opts;
    opts.seed = 5;
    CHECK(two_user_upper(inst, opts).value == two_user_upper(inst, opts).value);
    CHECK(two_user_avg_lower(inst, {1.0}, opts).value == two_user_avg_lower(inst, {1.0}, opts).value);
}
