#pragma once

// Independent reference computations used only by the tests. Deliberately
// naive: direct formulas, grid searches and exhaustive enumeration, sharing
// no code with the library beyond the Matrix container.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "rdcache/matrix.hpp"

namespace oracle {

inline double h2(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log2(p) - (1 - p) * std::log2(1 - p);
}

inline double H(const std::vector<double>& p) {
    double s = 0.0;
    for (double v : p)
        if (v > 0) s -= v * std::log2(v);
    return s;
}

// I(X;Y) from p(x) and channel rows p(y|x).
inline double channel_mi(const std::vector<double>& p, const rdcache::Matrix& w) {
    std::vector<double> q(w.cols(), 0.0);
    for (std::size_t x = 0; x < w.rows(); ++x)
        for (std::size_t y = 0; y < w.cols(); ++y) q[y] += p[x] * w(x, y);
    double mi = 0.0;
    for (std::size_t x = 0; x < w.rows(); ++x)
        for (std::size_t y = 0; y < w.cols(); ++y)
            if (p[x] > 0 && w(x, y) > 0) mi += p[x] * w(x, y) * std::log2(w(x, y) / q[y]);
    return mi;
}

// Binary-input binary-output RD by exhaustive grid over the two crossover
// probabilities; the min over the feasible grid points.
inline double binary_rd_grid(const std::vector<double>& p, const rdcache::Matrix& d, double D, int steps) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= steps; ++i)
        for (int j = 0; j <= steps; ++j) {
            const double a = double(i) / steps, b = double(j) / steps;
            rdcache::Matrix w(2, 2, std::vector<double>{1 - a, a, b, 1 - b});
            double e = 0.0;
            for (std::size_t x = 0; x < 2; ++x)
                for (std::size_t y = 0; y < 2; ++y) e += p[x] * w(x, y) * d(y, x);
            if (e <= D + 1e-12) best = std::min(best, channel_mi(p, w));
        }
    return best;
}

// Gacs-Korner common information by enumerating every set partition of
// X_1's alphabet as the candidate common variable; a partition is feasible
// when each symbol of every other source only co-occurs with one block.
inline double gk_by_partitions(const std::vector<std::size_t>& sizes, const std::vector<double>& pmf) {
    const std::size_t L = sizes.size();
    std::vector<std::size_t> strides(L, 1);
    for (std::size_t i = L; i-- > 1;) strides[i - 1] = strides[i] * sizes[i];
    auto sym = [&](std::size_t j, std::size_t l) { return (j / strides[l]) % sizes[l]; };

    const std::size_t n = sizes[0];
    std::vector<double> p1(n, 0.0);
    for (std::size_t j = 0; j < pmf.size(); ++j) p1[sym(j, 0)] += pmf[j];

    double best = 0.0;
    std::vector<std::size_t> label(n, 0);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t used) {
        if (i == n) {
            for (std::size_t l = 1; l < L; ++l) {
                std::vector<long> seen(sizes[l], -1);
                for (std::size_t j = 0; j < pmf.size(); ++j) {
                    if (pmf[j] <= 1e-12) continue;
                    long& s = seen[sym(j, l)];
                    const long b = long(label[sym(j, 0)]);
                    if (s == -1) s = b;
                    else if (s != b) return;
                }
            }
            std::vector<double> q(used, 0.0);
            for (std::size_t x = 0; x < n; ++x) q[label[x]] += p1[x];
            best = std::max(best, H(q));
            return;
        }
        for (std::size_t b = 0; b <= used; ++b) {
            label[i] = b;
            rec(i + 1, std::max(used, b + 1));
        }
    };
    rec(0, 0);
    return best;
}

inline std::vector<double> random_pmf(std::mt19937_64& rng, std::size_t n, double zero_prob = 0.0) {
    std::exponential_distribution<double> ex(1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(n);
    double s = 0.0;
    for (auto& v : p) {
        v = u(rng) < zero_prob ? 0.0 : ex(rng);
        s += v;
    }
    if (s == 0.0) {
        p[0] = 1.0;
        return p;
    }
    for (auto& v : p) v /= s;
    return p;
}

}  // namespace oracle
