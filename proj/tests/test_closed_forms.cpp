#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rdcache/closed_forms.hpp"
#include "rdcache/common_info.hpp"
#include "rdcache/error.hpp"

using namespace rdcache;

TEST_CASE("binary entropy values and inverse round trip") {
    CHECK(binary_entropy(0.5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(1.0) == 0.0);
    CHECK(binary_entropy(0.1) == doctest::Approx(0.4689955935892812).epsilon(1e-12));
    CHECK(binary_entropy_inverse(0.0) == 0.0);
    CHECK(binary_entropy_inverse(1.0) == 0.5);
    double prev = -1.0;
    for (int i = 0; i <= 200; ++i) {
        const double y = i / 200.0;
        const double p = binary_entropy_inverse(y);
        CHECK(p >= prev);
        prev = p;
        CHECK(std::abs(binary_entropy(p) - y) < 1e-10);
    }
    CHECK_THROWS_AS(binary_entropy(-0.1), Error);
    CHECK_THROWS_AS(binary_entropy_inverse(1.5), Error);
}

TEST_CASE("iid identical sources") {
    const std::vector<double> fair{0.5, 0.5};
    const Matrix d = hamming_matrix(2);
    CHECK(iid_identical_rdc(fair, d, 0.1, 0.0, 2) == doctest::Approx(1.0 - oracle::h2(0.1)).epsilon(1e-7));
    CHECK(iid_identical_rdc(fair, d, 0.1, 0.4, 2) == doctest::Approx(0.33100).epsilon(1e-4));
    const double r = 1.0 - oracle::h2(0.1);
    CHECK(iid_identical_rdc(fair, d, 0.1, 2.0 * r, 2) == doctest::Approx(0.0).epsilon(1e-7));
    CHECK_THROWS_AS(iid_identical_rdc(fair, d, 0.1, -1.0, 2), Error);
}

TEST_CASE("gaussian joint RD branches and continuity") {
    CHECK(gaussian_joint_rd(0.8, 1.5) == 0.0);
    CHECK(gaussian_joint_rd(0.8, 0.1) == doctest::Approx(0.5 * std::log2(36.0)).epsilon(1e-12));
    CHECK(gaussian_joint_rd(0.8, 0.1) == doctest::Approx(2.58496).epsilon(1e-5));
    for (double rho : {0.2, 0.5, 0.8, 0.95}) {
        const double b = 1.0 - rho;
        CHECK(std::abs(gaussian_joint_rd(rho, b * (1 - 1e-12)) - gaussian_joint_rd(rho, b * (1 + 1e-12))) < 1e-10);
        CHECK(gaussian_joint_rd(rho, b) == doctest::Approx(wyner_ci_gaussian(rho)).epsilon(1e-12));
        CHECK(std::abs(gaussian_joint_rd(rho, 1.0 - 1e-12) - gaussian_joint_rd(rho, 1.0 + 1e-12)) < 1e-10);
    }
    CHECK_THROWS_AS(gaussian_joint_rd(1.0, 0.1), Error);
    CHECK_THROWS_AS(gaussian_joint_rd(0.0, 0.1), Error);
}

TEST_CASE("gaussian regions") {
    CHECK(classify_gaussian_region(0.8, 0.1, 3.0).region == GaussianRegion::S1);
    const RegionTag s2 = classify_gaussian_region(0.8, 0.1, 2.0);
    CHECK(s2.region == GaussianRegion::S2);
    CHECK(s2.exact);
    CHECK(classify_gaussian_region(0.8, 0.5, 0.3).region == GaussianRegion::S4);
    const RegionTag s3 = classify_gaussian_region(0.8, 0.1, 0.5);
    CHECK(s3.region == GaussianRegion::S3);
    CHECK_FALSE(s3.exact);
    // boundaries go to the exact region
    CHECK(classify_gaussian_region(0.8, 0.1, gaussian_joint_rd(0.8, 0.1)).region == GaussianRegion::S1);
    CHECK(classify_gaussian_region(0.8, 0.1, wyner_ci_gaussian(0.8)).region == GaussianRegion::S2);
}

TEST_CASE("bivariate gaussian RDC values") {
    const GaussianRDC s2 = bivariate_gaussian_rdc(0.8, 0.1, 2.0);
    CHECK(s2.rate == doctest::Approx(0.29248).epsilon(1e-5));
    CHECK(bivariate_gaussian_rdc(0.8, 0.1, 3.0).rate == 0.0);
    const double kw = 0.5 * std::log2(9.0);
    const GaussianRDC s3 = bivariate_gaussian_rdc(0.8, 0.1, kw / 2.0);
    CHECK(std::abs(s3.rate - 1.0) < 1e-9);
    // S3/S4 formula equals the S2 value's upper envelope at C = 0: 0.5 log2(1/D)
    CHECK(bivariate_gaussian_rdc(0.8, 0.1, 0.0).rate == doctest::Approx(0.5 * std::log2(10.0)).epsilon(1e-12));
}

TEST_CASE("gaussian superuser lower bound") {
    Matrix cov(2, 2, std::vector<double>{1.0, 0.8, 0.8, 1.0});
    for (double C : {1.7, 2.0, 2.3}) {
        const GaussianLowerBound lb = gaussian_superuser_lower(cov, 0.1, C);
        CHECK(std::abs(lb.raw - bivariate_gaussian_rdc(0.8, 0.1, C).rate) < 1e-10);
        CHECK(lb.subset == std::vector<std::size_t>{0, 1});
        CHECK(std::abs(gaussian_pair_superuser_term(0.8, 0.1, C) - lb.raw) < 1e-12);
    }
    Matrix one(1, 1, std::vector<double>{1.0});
    CHECK(gaussian_superuser_lower(one, 0.25, 0.3).raw == doctest::Approx(1.0 - 0.3).epsilon(1e-12));
    // huge cache: raw maximand negative, clamped value zero
    const GaussianLowerBound neg = gaussian_superuser_lower(cov, 0.5, 10.0);
    CHECK(neg.raw < 0.0);
    CHECK(neg.clamped == 0.0);
    // three sources: compare against hand-computed subset terms
    Matrix cov3(3, 3, std::vector<double>{1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0});
    const double det12 = 1.0 - 0.25;
    const double det3 = 1.0 * (1.0 - 0.09) - 0.5 * (0.5 - 0.06) + 0.2 * (0.15 - 0.2);
    const double D = 0.05, C = 1.0;
    double expect = 0.5 * std::log2(1.0 / D) - C;
    expect = std::max(expect, (std::log2(det12) - 2 * std::log2(D)) / 4.0 - C / 2.0);
    expect = std::max(expect, (std::log2(det3) - 3 * std::log2(D)) / 6.0 - C / 3.0);
    CHECK(gaussian_superuser_lower(cov3, D, C).raw == doctest::Approx(expect).epsilon(1e-12));
    Matrix bad(2, 2, std::vector<double>{1.0, 2.0, 2.0, 1.0});
    CHECK_THROWS_AS(gaussian_superuser_lower(bad, 0.1, 0.0), Error);
}

TEST_CASE("DSBS bounds") {
    const double rho = 0.1;
    const double kw = wyner_ci_dsbs(rho);
    // high-precision evaluation of 1 + h(0.1) - 2 h(rho*)
    CHECK(std::abs(kw - 0.8727605668001543) < 1e-12);
    CHECK(dsbs_rho_star(rho) == doctest::Approx(0.0527864).epsilon(1e-6));
    const DsbsBounds zero = dsbs_rdc_bounds(rho, 0.0);
    CHECK(zero.lower == 1.0);
    CHECK(zero.upper == 1.0);
    CHECK(dsbs_rdc_bounds(rho, 1.0 + oracle::h2(rho)).upper == 0.0);
    const DsbsBounds at_kw = dsbs_rdc_bounds(rho, kw);
    CHECK(at_kw.exact);
    CHECK(std::abs(at_kw.upper - 0.2981175133945634) < 1e-12);
    // the lossy-branch upper formula meets h(rho*) at K_W from below
    const DsbsBounds below = dsbs_rdc_bounds(rho, kw - 1e-9);
    CHECK(std::abs(below.upper - oracle::h2(dsbs_rho_star(rho))) < 1e-6);
    CHECK(std::abs(dsbs_rdc_bounds(rho, 1e-6).upper - 1.0) < 1e-5);
    for (double r : {0.05, 0.1, 0.25, 0.4}) {
        for (int i = 0; i <= 50; ++i) {
            const double C = (1.0 + oracle::h2(r)) * i / 50.0;
            const DsbsBounds b = dsbs_rdc_bounds(r, C);
            CHECK(b.lower <= b.upper + 1e-12);
            if (C >= wyner_ci_dsbs(r)) CHECK(std::abs(b.lower - b.upper) < 1e-9);
            if (C > 0.0 && C < wyner_ci_dsbs(r)) CHECK(b.lower >= 1.0 - C - 1e-12);
        }
    }
    CHECK_THROWS_AS(dsbs_rdc_bounds(0.7, 0.1), Error);
    CHECK_THROWS_AS(dsbs_rdc_bounds(0.1, -0.1), Error);
}
