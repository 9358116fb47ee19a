#include <doctest.h>

#include "oracles.hpp"
#include "rdcache/error.hpp"
#include "rdcache/info.hpp"
#include "rdcache/source_model.hpp"

using namespace rdcache;

TEST_CASE("entropy basics") {
    const std::vector<double> u2 = {0.5, 0.5};
    CHECK(entropy(u2) == doctest::Approx(1.0));
    CHECK(entropy(dsbs_library(0.1).pmf()) == doctest::Approx(1.0 + oracle::h2(0.1)).epsilon(1e-12));
    CHECK(entropy(dsbs_library(0.1).pmf()) == doctest::Approx(1.46900).epsilon(1e-5));
    const std::vector<double> point = {0.0, 1.0, 0.0};
    CHECK(entropy(point) == 0.0);
    const std::vector<double> bad = {0.5, 0.6};
    CHECK_THROWS_AS(entropy(bad), Error);
}

TEST_CASE("mutual information") {
    Matrix prod(2, 3);
    const double p[] = {0.3, 0.7}, q[] = {0.2, 0.5, 0.3};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 3; ++b) prod(a, b) = p[a] * q[b];
    CHECK(mutual_information(prod) == doctest::Approx(0.0).epsilon(1e-14));

    Matrix diag(2, 2, std::vector<double>{0.5, 0, 0, 0.5});
    CHECK(mutual_information(diag) == doctest::Approx(1.0));

    Matrix dsbs(2, 2, dsbs_library(0.1).pmf());
    CHECK(mutual_information(dsbs) == doctest::Approx(1.0 - oracle::h2(0.1)).epsilon(1e-12));
}

TEST_CASE("conditional mutual information") {
    // A = B xor noise given U, U independent: I(A;B|U) matches I(A;B)
    std::vector<double> j;
    const auto d = dsbs_library(0.2).pmf();
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int u = 0; u < 3; ++u) j.push_back(d[a * 2 + b] / 3.0);
    CHECK(conditional_mutual_information(j, 2, 2, 3) == doctest::Approx(1.0 - oracle::h2(0.2)).epsilon(1e-12));

    // B = U: I(A;B|U) = 0
    std::vector<double> k(2 * 2 * 2, 0.0);
    for (int a = 0; a < 2; ++a)
        for (int u = 0; u < 2; ++u) k[a * 4 + u * 2 + u] = d[a * 2 + u];
    CHECK(conditional_mutual_information(k, 2, 2, 2) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("joint table entropies obey chain rule") {
    std::mt19937_64 rng(7);
    const auto p = oracle::random_pmf(rng, 2 * 3 * 2);
    JointTable t({2, 3, 2}, p);
    CHECK(t.entropy(0b111) == doctest::Approx(oracle::H(p)).epsilon(1e-12));
    const double lhs = t.entropy(0b111);
    const double rhs = t.entropy(0b001) + (t.entropy(0b011) - t.entropy(0b001)) + (t.entropy(0b111) - t.entropy(0b011));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK(t.mutual_information(0b001, 0b010, 0b100) >= 0.0);
}
