#include <doctest.h>

#include "oracles.hpp"
#include "rdcache/error.hpp"
#include "rdcache/info.hpp"
#include "rdcache/rate_distortion.hpp"

using namespace rdcache;

namespace {

const std::vector<double> kFair = {0.5, 0.5};

double reeval_distortion(std::span<const double> p, const Matrix& w, const Matrix& d) {
    double e = 0.0;
    for (std::size_t x = 0; x < w.rows(); ++x)
        for (std::size_t y = 0; y < w.cols(); ++y) e += p[x] * w(x, y) * d(y, x);
    return e;
}

}  // namespace

TEST_CASE("binary source endpoints") {
    const auto d = hamming_matrix(2);
    CHECK(rd_function(kFair, d, 0.0).rate == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rd_function(kFair, d, 0.5).rate == 0.0);
    CHECK(rd_function(kFair, d, 0.7).rate == 0.0);
}

TEST_CASE("binary source interior matches 1 - h(D)") {
    const auto d = hamming_matrix(2);
    const auto r = rd_function(kFair, d, 0.1);
    CHECK(r.rate == doctest::Approx(1.0 - oracle::h2(0.1)).epsilon(1e-8));
    CHECK(r.rate == doctest::Approx(0.53100).epsilon(1e-5));
    CHECK(r.converged);
    // grid oracle can only be at or above the true minimum
    const double grid = oracle::binary_rd_grid(kFair, d, 0.1, 400);
    CHECK(r.rate <= grid + 1e-9);
    CHECK(grid - r.rate < 5e-3);
}

TEST_CASE("biased source and general distortion against grid") {
    const std::vector<double> p = {0.8, 0.2};
    Matrix d(2, 2, std::vector<double>{0.0, 2.0, 1.0, 0.0});
    for (double D : {0.05, 0.1, 0.15}) {
        const auto r = rd_function(p, d, D);
        const double grid = oracle::binary_rd_grid(p, d, D, 600);
        CHECK(r.rate <= grid + 1e-9);
        CHECK(grid - r.rate < 5e-3);
    }
}

TEST_CASE("achieving channel reproduces rate and distortion") {
    const std::vector<double> p = {0.5, 0.3, 0.2};
    Matrix d(3, 3, std::vector<double>{0, 1, 2, 1, 0, 1, 2, 1, 0});
    for (double D : {0.0, 0.1, 0.3, 0.45}) {
        const auto r = rd_function(p, d, D);
        CHECK(channel_mutual_information(p, r.achieving_channel.matrix) == doctest::Approx(r.rate).epsilon(1e-8));
        CHECK(reeval_distortion(p, r.achieving_channel.matrix, d) <= D + 1e-8);
    }
}

TEST_CASE("rd function is non-increasing and convex") {
    const std::vector<double> p = {0.5, 0.3, 0.2};
    Matrix d(3, 3, std::vector<double>{0, 1, 2, 1, 0, 1, 2, 1, 0});
    std::vector<double> r;
    const double step = 0.02;
    for (int i = 0; i <= 30; ++i) r.push_back(rd_function(p, d, i * step).rate);
    for (std::size_t i = 1; i < r.size(); ++i) CHECK(r[i] <= r[i - 1] + 1e-9);
    for (std::size_t i = 1; i + 1 < r.size(); ++i) CHECK(r[i] <= 0.5 * (r[i - 1] + r[i + 1]) + 1e-6);
}

TEST_CASE("zero distortion with overlapping zero sets") {
    // symbol 2 of the reconstruction is free for both source symbols
    const std::vector<double> p = {0.6, 0.4};
    Matrix d(3, 2, std::vector<double>{0, 1, 1, 0, 0, 0});
    CHECK(rd_function(p, d, 0.0).rate == doctest::Approx(0.0).epsilon(1e-9));
    // deterministic singleton zero sets: H(X)
    const std::vector<double> q = {0.6, 0.3, 0.1};
    CHECK(rd_function(q, hamming_matrix(3), 0.0).rate == doctest::Approx(oracle::H(q)).epsilon(1e-12));
}

TEST_CASE("errors") {
    const auto d = hamming_matrix(2);
    CHECK_THROWS_AS(rd_function(kFair, d, -0.1), Error);
    const std::vector<double> bad = {0.5, 0.6};
    CHECK_THROWS_AS(rd_function(bad, d, 0.1), Error);
}

TEST_CASE("conditional RD") {
    const auto d = hamming_matrix(2);
    // U independent of X
    Matrix indep(2, 3);
    for (int x = 0; x < 2; ++x)
        for (int u = 0; u < 3; ++u) indep(x, u) = 0.5 / 3.0;
    CHECK(conditional_rd_function(indep, d, 0.1).rate == doctest::Approx(rd_function(kFair, d, 0.1).rate).epsilon(1e-9));
    // U = X
    Matrix same(2, 2, std::vector<double>{0.5, 0, 0, 0.5});
    for (double D : {0.0, 0.1, 0.4}) CHECK(conditional_rd_function(same, d, D).rate == doctest::Approx(0.0).epsilon(1e-12));
    // DSBS side information, D <= rho
    const double rho = 0.2;
    Matrix dsbs(2, 2, dsbs_library(rho).pmf());
    for (double D : {0.0, 0.05, 0.1, 0.2}) {
        const auto r = conditional_rd_function(dsbs, d, D);
        CHECK(r.rate == doctest::Approx(oracle::h2(rho) - oracle::h2(D)).epsilon(1e-7));
        CHECK(r.rate <= rd_function(kFair, d, D).rate + 1e-12);
    }
}

TEST_CASE("conditional solver matches one-shot function") {
    const auto d = hamming_matrix(3);
    ConditionalRDSolver solver(d);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto j = oracle::random_pmf(rng, 6);
        Matrix joint(3, 2, j);
        std::vector<double> pu(2, 0.0);
        Matrix cond(2, 3);
        for (int x = 0; x < 3; ++x)
            for (int u = 0; u < 2; ++u) pu[u] += joint(x, u);
        for (int u = 0; u < 2; ++u)
            for (int x = 0; x < 3; ++x) cond(u, x) = joint(x, u) / pu[u];
        const double D = 0.05 * (trial % 7);
        CHECK(solver.rate(pu, cond, D) == doctest::Approx(conditional_rd_function(joint, d, D).rate).epsilon(1e-8));
    }
}

TEST_CASE("joint RD") {
    const auto lib = dsbs_library(0.1);
    CHECK(joint_rd_function(lib, DistortionTuple::uniform(2, 0.5)).rate == 0.0);
    CHECK(joint_rd_function(lib, DistortionTuple::zeros(2)).rate == doctest::Approx(1.0 + oracle::h2(0.1)).epsilon(1e-9));

    // below the critical distortion the DSBS joint RD is 1 + h(rho) - 2 h(D)
    const auto r = joint_rd_function(lib, DistortionTuple::uniform(2, 0.05));
    CHECK(r.rate == doctest::Approx(1.0 + oracle::h2(0.1) - 2.0 * oracle::h2(0.05)).epsilon(1e-6));
    CHECK(channel_mutual_information(lib.pmf(), r.achieving_channel.matrix) == doctest::Approx(r.rate).epsilon(1e-9));
    for (double v : r.achieved_distortions) CHECK(v <= 0.05 + 1e-6);

    // any feasible channel found by random search is no better
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        Matrix w(4, 4);
        for (int x = 0; x < 4; ++x) {
            const auto row = oracle::random_pmf(rng, 4);
            for (int y = 0; y < 4; ++y) w(x, y) = 0.9 * (y == x) + 0.1 * row[y];
        }
        double e0 = 0, e1 = 0;
        for (int x = 0; x < 4; ++x)
            for (int y = 0; y < 4; ++y) {
                e0 += lib.pmf()[x] * w(x, y) * (x / 2 != y / 2);
                e1 += lib.pmf()[x] * w(x, y) * (x % 2 != y % 2);
            }
        if (e0 <= 0.05 && e1 <= 0.05) CHECK(oracle::channel_mi(lib.pmf(), w) >= r.rate - 1e-9);
    }
}

TEST_CASE("chain-rule bound fails for lossy conditioning sources") {
    // X1 = X2: R_X1(1/2) + R_{X2|X1}(0) = 0, yet X2 alone needs one bit
    RawSource raw;
    raw.alphabet_sizes = {2, 2};
    raw.pmf = {0.5, 0.0, 0.0, 0.5};
    const auto lib = validate_library(raw);
    CHECK(joint_rd_function(lib, DistortionTuple({0.5, 0.0})).rate == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("joint RD sandwich and asymmetric targets") {
    std::mt19937_64 rng(5);
    RawSource raw;
    raw.alphabet_sizes = {2, 3};
    raw.pmf = oracle::random_pmf(rng, 6);
    const auto lib = validate_library(raw);
    const std::size_t s0[] = {0}, s1[] = {1};
    for (auto [a, b] : {std::pair{0.05, 0.1}, {0.2, 0.0}, {0.0, 0.3}, {0.1, 0.6}}) {
        const DistortionTuple D({a, b});
        const double joint = joint_rd_function(lib, D).rate;
        const double r0 = rd_function(marginal(lib, s0), lib.distortion(0), a).rate;
        const double r1 = rd_function(marginal(lib, s1), lib.distortion(1), b).rate;
        CHECK(std::max(r0, r1) <= joint + 1e-6);
        // chain-rule upper bound R_X1(D1) + R_{X2|X1}(D2); valid when X1 is reproduced exactly
        if (a == 0.0) {
            Matrix j21(3, 2);
            for (std::size_t x = 0; x < 6; ++x) j21(lib.symbol(x, 1), lib.symbol(x, 0)) = lib.pmf()[x];
            const double cond = conditional_rd_function(j21, lib.distortion(1), b).rate;
            CHECK(joint <= r0 + cond + 1e-6);
        }
    }
}
