#include "rdcache/rate_distortion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "rdcache/error.hpp"
#include "rdcache/info.hpp"

namespace rdcache {

namespace {

constexpr double kMaxSlope = 1e9;
constexpr double kMinSlope = 1e-9;
constexpr double kStallGap = 1e-10;  // nats

struct BARun {
    bool converged = true;
    int iterations = 0;
};

// Blahut-Arimoto for source r against kernel K(x̂, x) (already exp(-s d) or
// a 0/1 support mask), accelerated by squared extrapolation (SQUAREM) with
// a monotonicity safeguard on the convex dual -sum_x r(x) log z(x).
// Updates the output marginal q in place.
class BAStepper {
public:
    BAStepper(std::span<const double> r, const Matrix& kernel) : r_(r), k_(kernel), z_(kernel.cols()), c_(kernel.rows()) {}

    // q_out = BA(q_in); returns true when q_in already meets the gap tolerance
    bool step(const std::vector<double>& q_in, std::vector<double>& q_out, double tol) {
        const std::size_t m = k_.rows(), n = k_.cols();
        mixture(q_in);
        double cmax = 0.0;
        for (std::size_t xh = 0; xh < m; ++xh) {
            double s = 0.0;
            for (std::size_t x = 0; x < n; ++x)
                if (r_[x] > 0.0 && z_[x] > 0.0) s += r_[x] * k_(xh, x) / z_[x];
            c_[xh] = s;
            if (q_in[xh] > 0.0) cmax = std::max(cmax, s);
        }
        // Jensen: sum q c log c <= log sum q c^2, a cheap lower bound on the gap
        double second = 0.0, total = 0.0;
        for (std::size_t xh = 0; xh < m; ++xh) second += q_in[xh] * c_[xh] * c_[xh];
        const bool check = std::log(cmax) - std::log(second) < tol;
        double avg = 0.0;
        q_out.resize(m);
        for (std::size_t xh = 0; xh < m; ++xh) {
            if (check && q_in[xh] > 0.0 && c_[xh] > 0.0) avg += q_in[xh] * c_[xh] * std::log(c_[xh]);
            q_out[xh] = q_in[xh] * c_[xh];
            total += q_out[xh];
        }
        for (double& v : q_out) v /= total;
        return check && std::log(cmax) - avg < tol;
    }

    // c(x̂) = sum_x r(x) K(x̂, x) / z(x) for every letter, used or not
    const std::vector<double>& weights(const std::vector<double>& q) {
        mixture(q);
        for (std::size_t xh = 0; xh < k_.rows(); ++xh) {
            double s = 0.0;
            for (std::size_t x = 0; x < k_.cols(); ++x)
                if (r_[x] > 0.0 && z_[x] > 0.0) s += r_[x] * k_(xh, x) / z_[x];
            c_[xh] = s;
        }
        return c_;
    }

    // Constrained Newton on the letters with q > 0. Letters pushed to the
    // boundary are zeroed and flagged in `hit`. Returns false if no step helped.
    bool newton(std::vector<double>& q, std::vector<char>& hit) {
        const std::size_t m = k_.rows(), n = k_.cols();
        bool moved = false;
        for (int it = 0; it < 40; ++it) {
            std::vector<std::size_t> act;
            for (std::size_t i = 0; i < m; ++i)
                if (q[i] > 0.0) act.push_back(i);
            const auto a = static_cast<Eigen::Index>(act.size());
            if (a < 2) break;
            mixture(q);
            Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(a + 1, a + 1);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(a + 1);
            for (Eigen::Index i = 0; i < a; ++i) {
                for (std::size_t x = 0; x < n; ++x) {
                    if (r_[x] <= 0.0 || z_[x] <= 0.0) continue;
                    const double ki = k_(act[i], x) / z_[x];
                    rhs(i) -= r_[x] * ki;
                    for (Eigen::Index j = 0; j <= i; ++j) kkt(i, j) -= r_[x] * ki * k_(act[j], x) / z_[x];
                }
                for (Eigen::Index j = 0; j < i; ++j) kkt(j, i) = kkt(i, j);
                kkt(i, a) = kkt(a, i) = 1.0;
            }
            const Eigen::VectorXd sol = kkt.partialPivLu().solve(rhs);
            double t = 1.0, dmax = 0.0;
            Eigen::Index block = -1;
            for (Eigen::Index i = 0; i < a; ++i) {
                dmax = std::max(dmax, std::abs(sol(i)));
                if (sol(i) < 0.0 && q[act[i]] + t * sol(i) <= 0.0) {
                    t = -q[act[i]] / sol(i);
                    block = i;
                }
            }
            if (!(dmax > 1e-16) || !std::isfinite(dmax)) break;
            const double f0 = dual(q);
            std::vector<double> trial(q);
            bool ok = false;
            for (int h = 0; h < 30 && !ok; ++h, t *= 0.5, block = -1) {
                for (Eigen::Index i = 0; i < a; ++i) trial[act[i]] = std::max(q[act[i]] + t * sol(i), 0.0);
                if (block >= 0) trial[act[block]] = 0.0;
                const double total = std::accumulate(trial.begin(), trial.end(), 0.0);
                for (double& v : trial) v /= total;
                ok = dual(trial) <= f0;
            }
            if (!ok) break;
            for (std::size_t i = 0; i < m; ++i)
                if (q[i] > 0.0 && trial[i] == 0.0) hit[i] = 1;
            q.swap(trial);
            moved = true;
            if (dmax * t < 1e-15) break;
        }
        return moved;
    }

    double dual(const std::vector<double>& q) {
        mixture(q);
        double v = 0.0;
        for (std::size_t x = 0; x < z_.size(); ++x)
            if (r_[x] > 0.0) v -= r_[x] * (z_[x] > 0.0 ? std::log(z_[x]) : -1e300);
        return v;
    }

private:
    void mixture(const std::vector<double>& q) {
        for (std::size_t x = 0; x < k_.cols(); ++x) {
            double s = 0.0;
            for (std::size_t xh = 0; xh < k_.rows(); ++xh) s += q[xh] * k_(xh, x);
            z_[x] = s;
        }
    }

    std::span<const double> r_;
    const Matrix& k_;
    std::vector<double> z_, c_;
};

BARun blahut_arimoto(std::span<const double> r, const Matrix& kernel, std::vector<double>& q,
                     const BAOptions& opts) {
    const std::size_t m = kernel.rows();
    BAStepper ba(r, kernel);
    std::vector<double> q1(m), q2(m), qx(m);
    std::vector<char> dropped(m, 0), kept(m, 0);
    BARun run;
    // The support test in step() only sees letters with q > 0. A letter whose
    // mass decays sublinearly (slopes next to a linear piece of the curve) is
    // dropped once it is small and shrinking; convergence is accepted only if
    // the dropped letters then satisfy c <= exp(tol), otherwise they return.
    // Letters that are starved but favoured get a usable mass back, letters
    // that are small and shrinking are dropped, then a Newton pass on the
    // remaining support. Dropped letters are rechecked before accepting.
    auto maintain = [&]() -> bool {
        const auto& c = ba.weights(q);
        double mean = 0.0;
        for (std::size_t i = 0; i < m; ++i) mean += q[i] * c[i];
        for (std::size_t i = 0; i < m; ++i) {
            if (q[i] <= 0.0 || q[i] >= 1e-6) continue;
            if (std::log(c[i] / mean) > opts.gap_tolerance) {
                q[i] = 1e-6;
            } else if (c[i] < mean && !kept[i]) {
                q[i] = 0.0;
                dropped[i] = 1;
            }
        }
        const double total = std::accumulate(q.begin(), q.end(), 0.0);
        for (double& v : q) v /= total;
        std::vector<double> trial(q);
        std::vector<char> hit(m, 0);
        const double before = ba.dual(q);
        if (ba.newton(trial, hit) && ba.dual(trial) < before) {
            q.swap(trial);
            for (std::size_t i = 0; i < m; ++i)
                if (hit[i]) dropped[i] = 1;
            return false;
        }
        // Newton cannot improve in double precision: accept a small gap
        const auto& w = ba.weights(q);
        double lo = 0.0, hi = 0.0;
        for (std::size_t i = 0; i < m; ++i) lo += q[i] * w[i];
        for (std::size_t i = 0; i < m; ++i)
            if (q[i] > 0.0 || dropped[i]) hi = std::max(hi, w[i]);
        return std::log(hi / lo) < kStallGap;
    };
    auto certified = [&] {
        const auto& c = ba.weights(q);
        double mean = 0.0;
        for (std::size_t i = 0; i < m; ++i) mean += q[i] * c[i];
        bool ok = true;
        for (std::size_t i = 0; i < m; ++i)
            if (dropped[i] && std::log(c[i] / mean) > opts.gap_tolerance) {
                ok = false;
                dropped[i] = 0;
                kept[i] = 1;
                q[i] = 1e-6;
            }
        if (!ok) {
            double total = 0.0;
            for (double v : q) total += v;
            for (double& v : q) v /= total;
        }
        return ok;
    };
    while (run.iterations < opts.max_iterations) {
        if (run.iterations > 0 && run.iterations % 200 == 0 && maintain()) return run;
        ++run.iterations;
        if (ba.step(q, q1, opts.gap_tolerance)) {
            if (certified()) {
                q.swap(q1);
                return run;
            }
            continue;
        }
        ++run.iterations;
        if (ba.step(q1, q2, opts.gap_tolerance)) {
            q.swap(q1);
            if (certified()) {
                q.swap(q2);
                return run;
            }
            continue;
        }
        double rr = 0.0, vv = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double d1 = q1[i] - q[i], d2 = q2[i] - 2.0 * q1[i] + q[i];
            rr += d1 * d1;
            vv += d2 * d2;
        }
        double alpha = vv > 0.0 ? -std::sqrt(rr / vv) : -1.0;
        alpha = std::min(alpha, -1.0);
        bool taken = false;
        // shrink the extrapolation until it stays inside the simplex and descends
        for (int tries = 0; tries < 6 && alpha < -1.0; ++tries, alpha = 0.5 * (alpha - 1.0)) {
            bool inside = true;
            double total = 0.0;
            for (std::size_t i = 0; i < m && inside; ++i) {
                const double d1 = q1[i] - q[i], d2 = q2[i] - 2.0 * q1[i] + q[i];
                qx[i] = q[i] - 2.0 * alpha * d1 + alpha * alpha * d2;
                inside = qx[i] > 0.0 || (qx[i] == 0.0 && q2[i] == 0.0);
                total += qx[i];
            }
            if (!inside) continue;
            for (double& v : qx) v /= total;
            if (ba.dual(qx) <= ba.dual(q2)) {
                q.swap(qx);
                taken = true;
                break;
            }
        }
        if (!taken) q.swap(q2);
    }
    run.converged = false;
    return run;
}

Matrix channel_from_marginal(std::span<const double> r, const Matrix& kernel, std::span<const double> q) {
    const std::size_t m = kernel.rows();
    const std::size_t n = kernel.cols();
    Matrix w(n, m);
    for (std::size_t x = 0; x < n; ++x) {
        double z = 0.0;
        for (std::size_t xh = 0; xh < m; ++xh) z += q[xh] * kernel(xh, x);
        if (z > 0.0) {
            for (std::size_t xh = 0; xh < m; ++xh) w(x, xh) = q[xh] * kernel(xh, x) / z;
        } else {
            // unreachable context (r[x] == 0 or q vanished on its support): pick first admissible symbol
            std::size_t best = 0;
            for (std::size_t xh = 0; xh < m; ++xh)
                if (kernel(xh, x) > kernel(best, x)) best = xh;
            w(x, best) = 1.0;
        }
        (void)r;
    }
    return w;
}

double expected_distortion(std::span<const double> r, const Matrix& w, const Matrix& d) {
    double e = 0.0;
    for (std::size_t x = 0; x < w.rows(); ++x) {
        if (r[x] <= 0.0) continue;
        for (std::size_t xh = 0; xh < w.cols(); ++xh) e += r[x] * w(x, xh) * d(xh, x);
    }
    return e;
}

Matrix exp_kernel(const Matrix& d, double s) {
    Matrix k(d.rows(), d.cols());
    for (std::size_t i = 0; i < d.data().size(); ++i) k.data()[i] = std::exp(-s * d.data()[i]);
    return k;
}

Matrix zero_mask(const Matrix& d) {
    Matrix k(d.rows(), d.cols());
    for (std::size_t i = 0; i < d.data().size(); ++i) k.data()[i] = d.data()[i] == 0.0 ? 1.0 : 0.0;
    return k;
}

// Per-u conditional source.
struct Component {
    double weight;
    std::vector<double> r;
};

struct Solution {
    std::vector<Matrix> channels;  // one per component, rows x, cols x̂
    double distortion = 0.0;
    double rate = 0.0;
    int iterations = 0;
    bool converged = true;
};

double mixture_rate(const std::vector<Component>& comps, const std::vector<Matrix>& channels) {
    double rate = 0.0;
    for (std::size_t u = 0; u < comps.size(); ++u)
        if (comps[u].weight > 0.0) rate += comps[u].weight * channel_mutual_information(comps[u].r, channels[u]);
    return rate;
}

Solution zero_rate_solution(const std::vector<Component>& comps, const Matrix& d) {
    Solution sol;
    for (const auto& c : comps) {
        std::size_t best = 0;
        double best_e = std::numeric_limits<double>::infinity();
        for (std::size_t xh = 0; xh < d.rows(); ++xh) {
            double e = 0.0;
            for (std::size_t x = 0; x < d.cols(); ++x) e += c.r[x] * d(xh, x);
            if (e < best_e - 1e-15) {
                best_e = e;
                best = xh;
            }
        }
        Matrix w(d.cols(), d.rows());
        for (std::size_t x = 0; x < d.cols(); ++x) w(x, best) = 1.0;
        sol.distortion += c.weight * best_e;
        sol.channels.push_back(std::move(w));
    }
    sol.rate = 0.0;
    return sol;
}

bool zero_sets_are_singletons(const Matrix& d) {
    for (std::size_t x = 0; x < d.cols(); ++x) {
        int zeros = 0;
        for (std::size_t xh = 0; xh < d.rows(); ++xh) zeros += d(xh, x) == 0.0;
        if (zeros != 1) return false;
    }
    return true;
}

// D = 0: minimize I over channels supported on the zero-distortion sets.
Solution lossless_solution(const std::vector<Component>& comps, const Matrix& d, const BAOptions& opts) {
    Solution sol;
    const Matrix mask = zero_mask(d);
    const bool singletons = zero_sets_are_singletons(d);
    for (const auto& c : comps) {
        std::vector<double> q(d.rows(), 1.0 / static_cast<double>(d.rows()));
        if (!singletons) {
            const BARun run = blahut_arimoto(c.r, mask, q, opts);
            sol.iterations += run.iterations;
            sol.converged = sol.converged && run.converged;
        }
        Matrix w = channel_from_marginal(c.r, mask, q);
        if (singletons) {
            w = Matrix(d.cols(), d.rows());
            for (std::size_t x = 0; x < d.cols(); ++x)
                for (std::size_t xh = 0; xh < d.rows(); ++xh)
                    if (d(xh, x) == 0.0) w(x, xh) = 1.0;
        }
        sol.channels.push_back(std::move(w));
    }
    sol.rate = mixture_rate(comps, sol.channels);
    sol.distortion = 0.0;
    for (std::size_t u = 0; u < comps.size(); ++u)
        sol.distortion += comps[u].weight * expected_distortion(comps[u].r, sol.channels[u], d);
    return sol;
}

class SlopeEvaluator {
public:
    SlopeEvaluator(const std::vector<Component>& comps, const Matrix& d, const BAOptions& opts,
                   std::vector<std::vector<double>>* warm)
        : comps_(comps), d_(d), opts_(opts),
          q_(comps.size(), std::vector<double>(d.rows(), 1.0 / static_cast<double>(d.rows()))) {
        if (warm && warm->size() == comps.size()) {
            for (std::size_t u = 0; u < comps.size(); ++u)
                if ((*warm)[u].size() == d.rows()) {
                    // keep every symbol alive so a stale start cannot pin it to zero
                    double total = 0.0;
                    for (std::size_t xh = 0; xh < d.rows(); ++xh) total += (q_[u][xh] = std::max((*warm)[u][xh], 1e-9));
                    for (double& v : q_[u]) v /= total;
                }
        }
    }

    const std::vector<std::vector<double>>& marginals() const { return q_; }

    Solution operator()(double s) {
        const Matrix kernel = exp_kernel(d_, s);
        Solution sol;
        for (std::size_t u = 0; u < comps_.size(); ++u) {
            const auto& c = comps_[u];
            if (c.weight <= 0.0) {
                sol.channels.push_back(channel_from_marginal(c.r, kernel, q_[u]));
                continue;
            }
            // reset marginals that collapsed onto symbols the kernel now disfavors
            for (double& v : q_[u]) v = std::max(v, 1e-300);
            const BARun run = blahut_arimoto(c.r, kernel, q_[u], opts_);
            sol.iterations += run.iterations;
            sol.converged = sol.converged && run.converged;
            Matrix w = channel_from_marginal(c.r, kernel, q_[u]);
            sol.distortion += c.weight * expected_distortion(c.r, w, d_);
            sol.channels.push_back(std::move(w));
        }
        sol.rate = mixture_rate(comps_, sol.channels);
        return sol;
    }

private:
    const std::vector<Component>& comps_;
    const Matrix& d_;
    const BAOptions& opts_;
    std::vector<std::vector<double>> q_;
};

struct ConditionalOutcome {
    Solution solution;
    double slope = 0.0;
};

Solution mix(const Solution& a, const Solution& b, double theta, const std::vector<Component>& comps,
             const Matrix& d) {
    Solution out;
    out.iterations = a.iterations + b.iterations;
    out.converged = a.converged && b.converged;
    for (std::size_t u = 0; u < comps.size(); ++u) {
        Matrix w = a.channels[u];
        for (std::size_t i = 0; i < w.data().size(); ++i)
            w.data()[i] = theta * a.channels[u].data()[i] + (1.0 - theta) * b.channels[u].data()[i];
        out.distortion += comps[u].weight * expected_distortion(comps[u].r, w, d);
        out.channels.push_back(std::move(w));
    }
    out.rate = mixture_rate(comps, out.channels);
    return out;
}

ConditionalOutcome solve_components(const std::vector<Component>& comps, const Matrix& d, double D,
                                    const BAOptions& opts, double warm_slope,
                                    std::vector<std::vector<double>>* warm_q = nullptr) {
    if (!(D >= 0.0) || !std::isfinite(D)) throw Error(ErrorCode::InvalidArgument, "distortion target must be >= 0");

    Solution zero = zero_rate_solution(comps, d);
    if (D >= zero.distortion - 1e-15) return {std::move(zero), 0.0};
    if (D == 0.0) return {lossless_solution(comps, d, opts), std::numeric_limits<double>::infinity()};

    SlopeEvaluator eval(comps, d, opts, warm_q);
    int iterations = 0;
    auto at = [&](double s) {
        Solution sol = eval(s);
        iterations += sol.iterations;
        return sol;
    };

    double s = std::clamp(warm_slope, 1e-3, 1e6);
    Solution cur = at(s);
    double s_lo = 0.0, s_hi = 0.0;
    Solution lo, hi;
    if (cur.distortion > D) {
        s_lo = s;
        lo = std::move(cur);
        double step = 1.25;
        for (;;) {
            double next = std::min(s_lo * step, kMaxSlope);
            Solution sol = at(next);
            if (sol.distortion <= D || next >= kMaxSlope) {
                s_hi = next;
                hi = std::move(sol);
                break;
            }
            s_lo = next;
            lo = std::move(sol);
            step *= step;
        }
        if (hi.distortion > D) {
            // slope cap reached; finish against the lossless solution
            hi = lossless_solution(comps, d, opts);
            s_hi = std::numeric_limits<double>::infinity();
        }
    } else {
        s_hi = s;
        hi = std::move(cur);
        double step = 1.25;
        for (;;) {
            double next = s_hi / step;
            if (next < kMinSlope) {
                s_lo = 0.0;
                lo = std::move(zero);
                break;
            }
            Solution sol = at(next);
            if (sol.distortion >= D) {
                s_lo = next;
                lo = std::move(sol);
                break;
            }
            s_hi = next;
            hi = std::move(sol);
            step *= step;
        }
    }

    // Illinois false position on log s; bisection while the lower end is s = 0
    const double tol = opts.distortion_tolerance;
    double f_lo = lo.distortion - D, f_hi = hi.distortion - D;
    int last_side = 0;
    for (int k = 0; k < opts.max_bisections && std::isfinite(s_hi); ++k) {
        if (lo.distortion - D <= tol || D - hi.distortion <= tol) break;
        // a bracket this narrow sits on a linear segment or resolves D to well
        // below the tolerances in use; the chord between its ends is then exact
        // up to (s_hi - s_lo) * (D_lo - D_hi) nats
        if (s_lo > 0.0 && s_hi - s_lo <= 1e-8 * s_hi) break;
        double mid;
        if (s_lo > 0.0) {
            const double a = std::log(s_lo), b = std::log(s_hi);
            double x = (a * f_hi - b * f_lo) / (f_hi - f_lo);
            if (!(x > a && x < b)) x = 0.5 * (a + b);
            mid = std::exp(x);
        } else {
            mid = 0.5 * s_hi;
        }
        Solution sol = at(mid);
        if (sol.distortion > D) {
            s_lo = mid;
            lo = std::move(sol);
            f_lo = lo.distortion - D;
            if (last_side == 1) f_hi *= 0.5;
            last_side = 1;
        } else {
            s_hi = mid;
            hi = std::move(sol);
            f_hi = hi.distortion - D;
            if (last_side == -1) f_lo *= 0.5;
            last_side = -1;
        }
    }

    const double span = lo.distortion - hi.distortion;
    const double theta = span > 0.0 ? (D - hi.distortion) / span : 0.0;
    Solution out = mix(lo, hi, std::clamp(theta, 0.0, 1.0), comps, d);
    if (warm_q) *warm_q = eval.marginals();
    out.iterations = iterations;
    out.converged = lo.converged && hi.converged;
    return {std::move(out), std::isfinite(s_hi) ? s_hi : s_lo};
}

void check_distortion_matrix(const Matrix& d, std::size_t source_size) {
    if (d.cols() != source_size || d.rows() == 0) throw Error(ErrorCode::ShapeMismatch, "distortion matrix shape");
    for (std::size_t x = 0; x < d.cols(); ++x) {
        bool zero = false;
        for (std::size_t xh = 0; xh < d.rows(); ++xh) {
            if (!std::isfinite(d(xh, x))) throw Error(ErrorCode::InfiniteDistortion, "non-finite distortion");
            zero = zero || d(xh, x) == 0.0;
        }
        if (!zero) throw Error(ErrorCode::MissingZeroDistortionSymbol, "symbol without zero distortion");
    }
}

void check_pmf(std::span<const double> p) {
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw Error(ErrorCode::InvalidPmf, "negative mass");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::InvalidPmf, "mass does not sum to one");
}

RDResult finish(ConditionalOutcome&& outcome, const std::vector<Component>& comps, std::size_t nx,
                std::size_t nxh, TestChannel::Context context, const BAOptions& opts) {
    RDResult res;
    Solution& sol = outcome.solution;
    res.rate = sol.rate;
    res.iterations = sol.iterations;
    res.converged = sol.converged;
    res.achieved_distortions = {sol.distortion};
    if (outcome.slope > 0.0 && std::isfinite(outcome.slope)) res.slopes = {outcome.slope};
    const std::size_t nu = comps.size();
    res.achieving_channel.context = context;
    res.achieving_channel.aux_size = nu;
    res.achieving_channel.matrix = Matrix(nx * nu, nxh);
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t u = 0; u < nu; ++u)
            for (std::size_t xh = 0; xh < nxh; ++xh)
                res.achieving_channel.matrix(x * nu + u, xh) = sol.channels[u](x, xh);
    if (!res.converged && opts.strict) {
        throw Error(ErrorCode::NoConvergence, "Blahut-Arimoto iteration cap reached");
    }
    return res;
}

}  // namespace

double zero_rate_distortion(std::span<const double> pmf_x, const Matrix& distortion) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t xh = 0; xh < distortion.rows(); ++xh) {
        double e = 0.0;
        for (std::size_t x = 0; x < distortion.cols(); ++x) e += pmf_x[x] * distortion(xh, x);
        best = std::min(best, e);
    }
    return best;
}

RDResult rd_function(std::span<const double> pmf_x, const Matrix& distortion, double D, const BAOptions& opts) {
    check_pmf(pmf_x);
    check_distortion_matrix(distortion, pmf_x.size());
    std::vector<Component> comps{{1.0, std::vector<double>(pmf_x.begin(), pmf_x.end())}};
    return finish(solve_components(comps, distortion, D, opts, 1.0), comps, pmf_x.size(), distortion.rows(),
                  TestChannel::Context::Source, opts);
}

namespace {

std::vector<Component> split_by_aux(const Matrix& joint_xu) {
    std::vector<Component> comps;
    for (std::size_t u = 0; u < joint_xu.cols(); ++u) {
        Component c{0.0, std::vector<double>(joint_xu.rows(), 0.0)};
        for (std::size_t x = 0; x < joint_xu.rows(); ++x) c.weight += joint_xu(x, u);
        if (c.weight > 0.0) {
            for (std::size_t x = 0; x < joint_xu.rows(); ++x) c.r[x] = joint_xu(x, u) / c.weight;
        } else {
            c.r.assign(joint_xu.rows(), 1.0 / static_cast<double>(joint_xu.rows()));
        }
        comps.push_back(std::move(c));
    }
    return comps;
}

}  // namespace

RDResult conditional_rd_function(const Matrix& joint_xu, const Matrix& distortion, double D,
                                 const BAOptions& opts) {
    check_pmf(joint_xu.data());
    check_distortion_matrix(distortion, joint_xu.rows());
    const auto comps = split_by_aux(joint_xu);
    return finish(solve_components(comps, distortion, D, opts, 1.0), comps, joint_xu.rows(), distortion.rows(),
                  TestChannel::Context::SourceAndAux, opts);
}

ConditionalRDSolver::ConditionalRDSolver(const Matrix& distortion, BAOptions opts)
    : distortion_(distortion), opts_(opts) {
    opts_.strict = false;
}

double ConditionalRDSolver::rate(std::span<const double> p_u, const Matrix& px_given_u, double D) {
    std::vector<Component> comps;
    std::vector<std::size_t> index;
    comps.reserve(p_u.size());
    for (std::size_t u = 0; u < p_u.size(); ++u) {
        if (p_u[u] <= 0.0) continue;
        auto row = px_given_u.row(u);
        comps.push_back({p_u[u], std::vector<double>(row.begin(), row.end())});
        index.push_back(u);
    }
    // marginals are cached per auxiliary letter
    if (warm_q_.size() < p_u.size()) warm_q_.resize(p_u.size());
    std::vector<std::vector<double>> warm(comps.size());
    for (std::size_t i = 0; i < comps.size(); ++i) warm[i] = warm_q_[index[i]];
    ConditionalOutcome out = solve_components(comps, distortion_, D, opts_, warm_slope_, &warm);
    for (std::size_t i = 0; i < comps.size(); ++i)
        if (!warm[i].empty()) warm_q_[index[i]] = std::move(warm[i]);
    if (out.slope > 0.0 && std::isfinite(out.slope)) warm_slope_ = out.slope;
    last_converged_ = out.solution.converged;
    last_slope_ = out.slope;
    return out.solution.rate;
}

// ---------------------------------------------------------------------------
// Joint RD with L constraints.

namespace {

struct JointProblem {
    const SourceLibrary& lib;
    std::size_t recon_total = 1;
    std::vector<std::size_t> recon_strides;

    explicit JointProblem(const SourceLibrary& l) : lib(l) {
        const std::size_t L = lib.num_sources();
        recon_strides.assign(L, 1);
        for (std::size_t i = L; i-- > 1;) recon_strides[i - 1] = recon_strides[i] * lib.recon_size(i);
        for (std::size_t i = 0; i < L; ++i) recon_total *= lib.recon_size(i);
    }

    std::size_t recon_symbol(std::size_t idx, std::size_t l) const {
        return (idx / recon_strides[l]) % lib.recon_size(l);
    }

    double d(std::size_t l, std::size_t xh_joint, std::size_t x_joint) const {
        return lib.distortion(l)(recon_symbol(xh_joint, l), lib.symbol(x_joint, l));
    }

    // slopes: +inf means the coordinate is restricted to zero distortion
    Matrix kernel(const std::vector<double>& slopes) const {
        Matrix k(recon_total, lib.joint_size());
        for (std::size_t xh = 0; xh < recon_total; ++xh)
            for (std::size_t x = 0; x < lib.joint_size(); ++x) {
                double cost = 0.0;
                bool allowed = true;
                for (std::size_t l = 0; l < slopes.size(); ++l) {
                    const double dv = d(l, xh, x);
                    if (std::isinf(slopes[l])) {
                        allowed = allowed && dv == 0.0;
                    } else {
                        cost += slopes[l] * dv;
                    }
                }
                k(xh, x) = allowed ? std::exp(-cost) : 0.0;
            }
        return k;
    }

    std::vector<double> distortions(const Matrix& w) const {
        std::vector<double> out(lib.num_sources(), 0.0);
        for (std::size_t x = 0; x < lib.joint_size(); ++x) {
            const double p = lib.pmf()[x];
            if (p <= 0.0) continue;
            for (std::size_t xh = 0; xh < recon_total; ++xh) {
                const double m = p * w(x, xh);
                if (m == 0.0) continue;
                for (std::size_t l = 0; l < out.size(); ++l) out[l] += m * d(l, xh, x);
            }
        }
        return out;
    }

    // Replace coordinate l of the reconstruction by its best response to the
    // other coordinates. A function of X̂ cannot increase I(X̄; X̂).
    Matrix best_response(const Matrix& w, std::size_t l) const {
        const std::size_t ml = lib.recon_size(l);
        const std::size_t stride = recon_strides[l];
        // cost[rest][candidate]
        std::vector<double> cost(recon_total * ml, 0.0);
        auto rest_of = [&](std::size_t xh) { return xh - recon_symbol(xh, l) * stride; };
        for (std::size_t x = 0; x < lib.joint_size(); ++x) {
            const double p = lib.pmf()[x];
            if (p <= 0.0) continue;
            for (std::size_t xh = 0; xh < recon_total; ++xh) {
                const double m = p * w(x, xh);
                if (m == 0.0) continue;
                const std::size_t rest = rest_of(xh);
                for (std::size_t c = 0; c < ml; ++c)
                    cost[rest * ml + c] += m * lib.distortion(l)(c, lib.symbol(x, l));
            }
        }
        Matrix out(w.rows(), w.cols());
        for (std::size_t x = 0; x < lib.joint_size(); ++x)
            for (std::size_t xh = 0; xh < recon_total; ++xh) {
                const double v = w(x, xh);
                if (v == 0.0) continue;
                const std::size_t rest = rest_of(xh);
                std::size_t best = 0;
                for (std::size_t c = 1; c < ml; ++c)
                    if (cost[rest * ml + c] < cost[rest * ml + best] - 1e-15) best = c;
                out(x, rest + best * stride) += v;
            }
        return out;
    }
};

struct JointState {
    Matrix channel;
    std::vector<double> distortions;
    bool converged = true;
    int iterations = 0;
};

}  // namespace

RDResult joint_rd_function(const SourceLibrary& lib, const DistortionTuple& D, const JointRDOptions& opts) {
    const std::size_t L = lib.num_sources();
    if (D.size() != L) throw Error(ErrorCode::ShapeMismatch, "distortion tuple length must equal L");

    if (L == 1) {
        RDResult r = rd_function(lib.pmf(), lib.distortion(0), D[0], opts.ba);
        r.achieving_channel.context = TestChannel::Context::JointSource;
        return r;
    }

    JointProblem prob(lib);
    const auto& p = lib.pmf();

    std::vector<double> slopes(L, 1.0);
    for (std::size_t l = 0; l < L; ++l) {
        if (D[l] == 0.0) slopes[l] = std::numeric_limits<double>::infinity();
        if (D[l] >= zero_rate_distortion(lib.source_marginal(l), lib.distortion(l))) slopes[l] = 0.0;
    }

    std::vector<double> q(prob.recon_total, 1.0 / static_cast<double>(prob.recon_total));
    int iterations = 0;
    bool converged = true;

    auto solve_at = [&](const std::vector<double>& s) {
        const Matrix k = prob.kernel(s);
        std::vector<double> qq = q;
        for (double& v : qq) v = std::max(v, 1e-300);
        const BARun run = blahut_arimoto(p, k, qq, opts.ba);
        iterations += run.iterations;
        JointState st;
        st.converged = run.converged;
        st.channel = channel_from_marginal(p, k, qq);
        for (std::size_t l = 0; l < L; ++l)
            if (s[l] == 0.0) st.channel = prob.best_response(st.channel, l);
        st.distortions = prob.distortions(st.channel);
        q = std::move(qq);
        return st;
    };

    bool all_zero_rate = std::all_of(slopes.begin(), slopes.end(), [](double s) { return s == 0.0; });
    JointState state = solve_at(slopes);
    if (!all_zero_rate) {
        for (int round = 0; round < opts.outer_rounds; ++round) {
            for (std::size_t l = 0; l < L; ++l) {
                if (std::isinf(slopes[l])) continue;
                // s_l = 0 is optimal when the constraint is slack there
                std::vector<double> s = slopes;
                s[l] = 0.0;
                JointState at_zero = solve_at(s);
                if (at_zero.distortions[l] <= D[l]) {
                    slopes[l] = 0.0;
                    continue;
                }
                double lo = 0.0;
                double hi = std::max(slopes[l], 1e-3);
                for (;;) {
                    s[l] = hi;
                    JointState st = solve_at(s);
                    if (st.distortions[l] <= D[l] || hi >= kMaxSlope) break;
                    lo = hi;
                    hi *= 2.0;
                }
                for (int k = 0; k < opts.ba.max_bisections; ++k) {
                    if (hi - lo <= 1e-12 * hi) break;
                    const double mid = lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * hi;
                    s[l] = mid;
                    JointState st = solve_at(s);
                    if (std::abs(st.distortions[l] - D[l]) < 1e-10) {
                        lo = hi = mid;
                        break;
                    }
                    (st.distortions[l] > D[l] ? lo : hi) = mid;
                }
                slopes[l] = hi;
            }
            state = solve_at(slopes);
            bool ok = true;
            for (std::size_t l = 0; l < L; ++l) {
                if (std::isinf(slopes[l])) continue;
                const double gap = state.distortions[l] - D[l];
                ok = ok && gap <= opts.constraint_tolerance &&
                     (slopes[l] == 0.0 || gap >= -opts.constraint_tolerance);
            }
            if (ok) break;
            if (round + 1 == opts.outer_rounds) converged = false;
        }
    }

    RDResult res;
    res.rate = channel_mutual_information(p, state.channel);
    res.achieved_distortions = state.distortions;
    res.iterations = iterations;
    res.converged = converged && state.converged;
    for (double s : slopes) res.slopes.push_back(s);
    res.achieving_channel.context = TestChannel::Context::JointSource;
    res.achieving_channel.matrix = std::move(state.channel);
    for (std::size_t l = 0; l < L; ++l) {
        if (res.achieved_distortions[l] > D[l] + opts.constraint_tolerance && !std::isinf(slopes[l])) {
            res.converged = false;
        }
    }
    if (!res.converged && opts.ba.strict) {
        throw Error(ErrorCode::NoConvergence, "joint RD slopes did not meet all constraints");
    }
    return res;
}

}  // namespace rdcache
