#include "rdcache/rdc_solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>

#include <boost/math/tools/toms748_solve.hpp>

#include "rdcache/error.hpp"
#include "rdcache/info.hpp"

namespace rdcache {

std::string to_string(Method m) {
    switch (m) {
        case Method::Solver: return "solver";
        case Method::Oracle: return "oracle";
        case Method::Genie: return "genie";
        case Method::Superuser: return "superuser";
        case Method::SuperGenie: return "super-genie";
        case Method::ClosedForm: return "closed-form";
    }
    return "unknown";
}

namespace {

bool is_hamming(const Matrix& d) {
    return d.rows() == d.cols() && d == hamming_matrix(d.rows());
}

void check_inputs(const SourceLibrary& lib, const DistortionTuple& D, double C) {
    if (D.size() != lib.num_sources()) throw Error(ErrorCode::ShapeMismatch, "distortion tuple length must equal L");
    if (!(C >= 0.0) || std::isnan(C)) throw Error(ErrorCode::InvalidCache, "cache capacity must be >= 0");
}

double aux_information(const SourceLibrary& lib, const Matrix& w) {
    return channel_mutual_information(lib.pmf(), w);
}

std::vector<double> aux_marginal(const SourceLibrary& lib, const Matrix& w) {
    std::vector<double> q(w.cols(), 0.0);
    for (std::size_t x = 0; x < w.rows(); ++x)
        for (std::size_t u = 0; u < w.cols(); ++u) q[u] += lib.pmf()[x] * w(x, u);
    return q;
}

// Evaluates max_l R_{X_l|U}(D_l) with one warm-started solver per source.
class Objective {
public:
    Objective(const SourceLibrary& lib, const DistortionTuple& D, const BAOptions& ba)
        : slopes(lib.num_sources(), 0.0), lib_(lib), D_(D) {
        for (std::size_t l = 0; l < lib.num_sources(); ++l) solvers_.emplace_back(lib.distortion(l), ba);
    }

    AuxEvaluation operator()(const Matrix& w) {
        ++calls;
        AuxEvaluation ev{aux_information(lib_, w), {}, 0.0};
        const auto q = aux_marginal(lib_, w);
        for (std::size_t l = 0; l < lib_.num_sources(); ++l) {
            Matrix cond(w.cols(), lib_.alphabet_size(l));
            for (std::size_t x = 0; x < w.rows(); ++x) {
                const double p = lib_.pmf()[x];
                if (p == 0.0) continue;
                const std::size_t s = lib_.symbol(x, l);
                for (std::size_t u = 0; u < w.cols(); ++u) cond(u, s) += p * w(x, u);
            }
            for (std::size_t u = 0; u < w.cols(); ++u)
                if (q[u] > 0.0)
                    for (std::size_t s = 0; s < cond.cols(); ++s) cond(u, s) /= q[u];
            const double r = solvers_[l].rate(q, cond, D_[l]);
            converged = converged && solvers_[l].last_converged();
            slopes[l] = solvers_[l].last_slope();
            ev.rates.push_back(r);
            ev.max_rate = std::max(ev.max_rate, r);
        }
        return ev;
    }

    std::vector<double> slopes;  // per source, from the last call
    long calls = 0;
    bool converged = true;

private:
    const SourceLibrary& lib_;
    const DistortionTuple& D_;
    std::vector<ConditionalRDSolver> solvers_;
};

// Mix toward the product channel 1 q^T (same p(u)) until I(X̄;U) <= C.
Matrix repair(const SourceLibrary& lib, const Matrix& w, double C) {
    if (aux_information(lib, w) <= C) return w;
    const auto q = aux_marginal(lib, w);
    auto mixed = [&](double t) {
        Matrix m = w;
        for (std::size_t x = 0; x < m.rows(); ++x)
            for (std::size_t u = 0; u < m.cols(); ++u) m(x, u) = (1.0 - t) * w(x, u) + t * q[u];
        return m;
    };
    auto excess = [&](double t) { return aux_information(lib, mixed(t)) - C; };
    // excess is decreasing in t; keep the feasible end of the bracket
    std::uintmax_t iters = 64;
    const auto br = boost::math::tools::toms748_solve(excess, 0.0, 1.0, excess(0.0), -C,
                                                      boost::math::tools::eps_tolerance<double>(44), iters);
    double t = br.second;
    while (excess(t) > 0.0 && t < 1.0) t = std::min(1.0, t + 1e-12);
    return mixed(t);
}

// Drop unused letters and merge letters with identical posteriors p(x̄|u).
Matrix compact(const SourceLibrary& lib, const Matrix& w) {
    const auto q = aux_marginal(lib, w);
    std::vector<std::vector<double>> post;
    std::vector<std::vector<double>> cols;
    for (std::size_t u = 0; u < w.cols(); ++u) {
        if (q[u] <= 1e-15) continue;
        std::vector<double> pst(w.rows()), col(w.rows());
        for (std::size_t x = 0; x < w.rows(); ++x) {
            pst[x] = lib.pmf()[x] * w(x, u) / q[u];
            col[x] = w(x, u);
        }
        bool merged = false;
        for (std::size_t k = 0; k < post.size() && !merged; ++k) {
            double diff = 0.0;
            for (std::size_t x = 0; x < w.rows(); ++x) diff = std::max(diff, std::abs(post[k][x] - pst[x]));
            if (diff < 1e-12) {
                for (std::size_t x = 0; x < w.rows(); ++x) cols[k][x] += col[x];
                merged = true;
            }
        }
        if (!merged) {
            post.push_back(std::move(pst));
            cols.push_back(std::move(col));
        }
    }
    if (cols.empty()) return Matrix(w.rows(), 1, 1.0);
    Matrix out(w.rows(), cols.size());
    for (std::size_t u = 0; u < cols.size(); ++u)
        for (std::size_t x = 0; x < w.rows(); ++x) out(x, u) = cols[u][x];
    // rows of zero-mass symbols carry no information; keep them stochastic
    for (std::size_t x = 0; x < w.rows(); ++x) {
        double s = 0.0;
        for (std::size_t u = 0; u < out.cols(); ++u) s += out(x, u);
        if (s <= 0.0) {
            out(x, 0) = 1.0;
        } else {
            for (std::size_t u = 0; u < out.cols(); ++u) out(x, u) /= s;
        }
    }
    return out;
}

Matrix pad(const Matrix& w, std::size_t k) {
    if (w.cols() >= k) return w;
    Matrix out(w.rows(), k);
    for (std::size_t x = 0; x < w.rows(); ++x)
        for (std::size_t u = 0; u < w.cols(); ++u) out(x, u) = w(x, u);
    return out;
}

// Fits a witness into k letters when possible (compact, then pad).
std::optional<Matrix> fit(const SourceLibrary& lib, const Matrix& w, std::size_t k) {
    Matrix c = compact(lib, w);
    if (c.cols() > k) return std::nullopt;
    return pad(c, k);
}

struct Candidate {
    Matrix w;
    AuxEvaluation ev;
};

bool better(const AuxEvaluation& a, const AuxEvaluation& b) { return a.max_rate < b.max_rate - 1e-13; }

// (1/beta) log sum exp(beta r_l); beta = 0 means the plain maximum.
double score(const AuxEvaluation& ev, double beta) {
    if (beta <= 0.0) return ev.max_rate;
    double s = 0.0;
    for (double r : ev.rates) s += std::exp(beta * (r - ev.max_rate));
    return ev.max_rate + std::log(s) / beta;
}

// Coordinate pattern search: shift mass between two letters of one row,
// repair feasibility, keep strict improvements. A successful move is
// repeated with a doubled step; the step halves after a sweep that gains
// less than 1e-10, and at most max_sweeps sweeps run per step size.
// With beta > 0 the max over sources is smoothed, which lets single
// coordinate moves travel along the ridge where two rates tie.
void pattern_search(const SourceLibrary& lib, double C, Objective& f, Candidate& cand, double step,
                    double min_step, int max_sweeps = 8, double beta = 0.0) {
    const std::size_t n = cand.w.rows();
    const std::size_t k = cand.w.cols();
    if (k < 2) return;
    auto try_move = [&](std::size_t x, std::size_t a, std::size_t b, double m) {
        Matrix trial = cand.w;
        m = std::min(m, trial(x, a));
        trial(x, a) -= m;
        trial(x, b) += m;
        trial = repair(lib, trial, C);
        AuxEvaluation ev = f(trial);
        if (!(score(ev, beta) < score(cand.ev, beta) - 1e-13)) return false;
        cand.w = std::move(trial);
        cand.ev = std::move(ev);
        return true;
    };
    int sweeps = 0;
    while (step >= min_step) {
        const double start = score(cand.ev, beta);
        for (std::size_t x = 0; x < n; ++x) {
            if (lib.pmf()[x] <= 0.0) continue;
            // empty letters are interchangeable; only the first one is a target
            const auto q = aux_marginal(lib, cand.w);
            std::vector<std::size_t> targets;
            bool empty_seen = false;
            for (std::size_t u = 0; u < k; ++u) {
                if (q[u] > 0.0) {
                    targets.push_back(u);
                } else if (!empty_seen) {
                    targets.push_back(u);
                    empty_seen = true;
                }
            }
            for (std::size_t a = 0; a < k; ++a)
                for (std::size_t b : targets) {
                    if (a == b || cand.w(x, a) <= 0.0 || !try_move(x, a, b, step)) continue;
                    double m = 2.0 * step;
                    for (int rep = 0; rep < 6 && cand.w(x, a) > 0.0 && try_move(x, a, b, m); ++rep) m *= 2.0;
                }
        }
        // diagonal moves across two rows, for small alphabets only
        if (n * (n - 1) * k * (k - 1) <= 64) {
            for (std::size_t x = 0; x < n; ++x)
                for (std::size_t y = x + 1; y < n; ++y) {
                    if (lib.pmf()[x] <= 0.0 || lib.pmf()[y] <= 0.0) continue;
                    for (std::size_t a = 0; a < k; ++a)
                        for (std::size_t b = 0; b < k; ++b)
                            for (std::size_t c = 0; c < k; ++c)
                                for (std::size_t d = 0; d < k; ++d) {
                                    if (a == b || c == d) continue;
                                    Matrix trial = cand.w;
                                    const double mx = std::min(step, trial(x, a)), my = std::min(step, trial(y, c));
                                    if (mx <= 0.0 || my <= 0.0) continue;
                                    trial(x, a) -= mx;
                                    trial(x, b) += mx;
                                    trial(y, c) -= my;
                                    trial(y, d) += my;
                                    trial = repair(lib, trial, C);
                                    AuxEvaluation ev = f(trial);
                                    if (score(ev, beta) < score(cand.ev, beta) - 1e-13) {
                                        cand.w = std::move(trial);
                                        cand.ev = std::move(ev);
                                    }
                                }
                }
        }
        ++sweeps;
        if (start - score(cand.ev, beta) < 1e-10 || sweeps >= max_sweeps) {
            step *= 0.5;
            sweeps = 0;
        }
    }
}

// Alternating minimization of the Lagrangian
//   lam I(X̄;U) + sum_l mu_l [ I(X_l; X̂_l | U) + s_l E d_l ]
// over p(u|x̄), the reconstruction channels and their output marginals.
// Every update is a closed-form minimizer, so the Lagrangian never grows.
// Slopes are frozen at the values reported by the exact evaluation.
class LagrangianDescent {
public:
    LagrangianDescent(const SourceLibrary& lib, const std::vector<double>& slopes) : lib_(lib) {
        for (std::size_t l = 0; l < lib.num_sources(); ++l) {
            const Matrix& d = lib.distortion(l);
            Matrix k(d.rows(), d.cols());
            for (std::size_t i = 0; i < d.data().size(); ++i) {
                const double v = d.data()[i];
                k.data()[i] = std::isinf(slopes[l]) ? (v == 0.0 ? 1.0 : 0.0) : std::exp(-slopes[l] * v);
            }
            kernels_.push_back(std::move(k));
        }
    }

    Matrix run(const Matrix& w0, double lam, const std::vector<double>& mu, int iters) const {
        const std::size_t n = w0.rows(), k = w0.cols(), L = lib_.num_sources();
        Matrix w = w0;
        // output marginals Q_l(x̂|u), rows u
        std::vector<Matrix> Q;
        for (std::size_t l = 0; l < L; ++l) Q.emplace_back(k, lib_.recon_size(l), 1.0 / lib_.recon_size(l));
        std::vector<Matrix> logz(L);
        std::vector<double> pu(k);
        for (int it = 0; it < iters; ++it) {
            std::fill(pu.begin(), pu.end(), 0.0);
            for (std::size_t x = 0; x < n; ++x)
                for (std::size_t u = 0; u < k; ++u) pu[u] += lib_.pmf()[x] * w(x, u);
            for (std::size_t l = 0; l < L; ++l) {
                const Matrix& K = kernels_[l];
                const std::size_t nx = lib_.alphabet_size(l), nr = lib_.recon_size(l);
                Matrix pxu(nx, k);
                for (std::size_t x = 0; x < n; ++x)
                    for (std::size_t u = 0; u < k; ++u) pxu(lib_.symbol(x, l), u) += lib_.pmf()[x] * w(x, u);
                // one Blahut-Arimoto step per letter, then the partition function
                Matrix q_new(k, nr);
                for (std::size_t u = 0; u < k; ++u) {
                    if (pu[u] <= 0.0) continue;
                    for (std::size_t x = 0; x < nx; ++x) {
                        if (pxu(x, u) <= 0.0) continue;
                        double z = 0.0;
                        for (std::size_t r = 0; r < nr; ++r) z += Q[l](u, r) * K(r, x);
                        if (z <= 0.0) continue;
                        for (std::size_t r = 0; r < nr; ++r) q_new(u, r) += pxu(x, u) / pu[u] * Q[l](u, r) * K(r, x) / z;
                    }
                    double t = 0.0;
                    for (std::size_t r = 0; r < nr; ++r) t += q_new(u, r);
                    if (t > 0.0)
                        for (std::size_t r = 0; r < nr; ++r) Q[l](u, r) = q_new(u, r) / t;
                }
                logz[l] = Matrix(nx, k);
                for (std::size_t x = 0; x < nx; ++x)
                    for (std::size_t u = 0; u < k; ++u) {
                        double z = 0.0;
                        for (std::size_t r = 0; r < nr; ++r) z += Q[l](u, r) * K(r, x);
                        logz[l](x, u) = z > 0.0 ? std::log(z) : -std::numeric_limits<double>::infinity();
                    }
            }
            for (std::size_t x = 0; x < n; ++x) {
                if (lib_.pmf()[x] <= 0.0) continue;
                std::vector<double> e(k, -std::numeric_limits<double>::infinity());
                double top = -std::numeric_limits<double>::infinity();
                for (std::size_t u = 0; u < k; ++u) {
                    if (pu[u] <= 0.0) continue;
                    double v = std::log(pu[u]);
                    for (std::size_t l = 0; l < L; ++l)
                        if (mu[l] > 0.0) v += mu[l] / lam * logz[l](lib_.symbol(x, l), u);
                    e[u] = v;
                    top = std::max(top, v);
                }
                if (!std::isfinite(top)) continue;
                double t = 0.0;
                for (std::size_t u = 0; u < k; ++u) t += (w(x, u) = std::isfinite(e[u]) ? std::exp(e[u] - top) : 0.0);
                for (std::size_t u = 0; u < k; ++u) w(x, u) /= t;
            }
        }
        return w;
    }

private:
    const SourceLibrary& lib_;
    std::vector<Matrix> kernels_;
};

// Runs the Lagrangian descent from the candidate, tuning lam so that the
// result uses the whole cache, and keeps any improvement. The source
// weights drift toward the sources attaining the maximum.
void lagrangian_refine(const SourceLibrary& lib, double C, Objective& f, Candidate& cand, int rounds = 4) {
    if (cand.w.cols() < 2) return;
    const std::size_t L = lib.num_sources();
    AuxEvaluation ev = f(cand.w);
    std::vector<double> slopes = f.slopes;
    std::vector<double> mu(L);
    for (int round = 0; round < rounds; ++round) {
        double total = 0.0;
        for (std::size_t l = 0; l < L; ++l)
            total += (mu[l] = round == 0 ? (ev.rates[l] >= ev.max_rate - 1e-3 ? 1.0 : 0.05)
                                         : mu[l] * std::exp(20.0 * (ev.rates[l] - ev.max_rate)));
        for (double& m : mu) m /= total;
        const LagrangianDescent descent(lib, slopes);
        double lo = std::log(1e-3), hi = std::log(1e2);
        Matrix best_w = descent.run(cand.w, std::exp(hi), mu, 100);
        for (int i = 0; i < 25; ++i) {
            const double mid = 0.5 * (lo + hi);
            Matrix w = descent.run(cand.w, std::exp(mid), mu, 100);
            if (aux_information(lib, w) > C) {
                lo = mid;
            } else {
                hi = mid;
                best_w = std::move(w);
            }
        }
        Matrix trial = repair(lib, best_w, C);
        AuxEvaluation tev = f(trial);
        if (!better(tev, cand.ev)) break;
        cand.w = std::move(trial);
        cand.ev = tev;
        ev = std::move(tev);
        slopes = f.slopes;
    }
}

// Restricted growth strings: all set partitions of n items into <= k blocks.
void enumerate_partitions(std::size_t n, std::size_t k, std::size_t limit,
                          const std::function<void(const std::vector<std::size_t>&)>& visit) {
    std::vector<std::size_t> label(n, 0);
    std::size_t count = 0;
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t used) {
        if (count >= limit) return;
        if (i == n) {
            ++count;
            visit(label);
            return;
        }
        for (std::size_t b = 0; b <= used && b < k; ++b) {
            label[i] = b;
            rec(i + 1, std::max(used, b + 1));
        }
    };
    rec(0, 0);
}

Matrix deterministic(std::size_t n, std::size_t k, const std::vector<std::size_t>& label) {
    Matrix w(n, k);
    for (std::size_t x = 0; x < n; ++x) w(x, label[x]) = 1.0;
    return w;
}

// Time sharing: U = (T, U_T) with P(T = 0) = lambda.
Matrix time_share(const Matrix& a, const Matrix& b, double lambda) {
    Matrix out(a.rows(), a.cols() + b.cols());
    for (std::size_t x = 0; x < a.rows(); ++x) {
        for (std::size_t u = 0; u < a.cols(); ++u) out(x, u) = lambda * a(x, u);
        for (std::size_t u = 0; u < b.cols(); ++u) out(x, a.cols() + u) = (1.0 - lambda) * b(x, u);
    }
    return out;
}

// Number of lattice compositions of `steps` into `a` parts, saturating.
double lattice_size(int steps, std::size_t a) {
    double c = 1.0;
    for (std::size_t i = 1; i < a; ++i) c = c * (steps + static_cast<double>(i)) / static_cast<double>(i);
    return c;
}

// Visits every p(u|x̄) with entries on the lattice 1/steps, up to relabelling
// of the letters. Rows of zero-mass symbols stay pinned to the first letter.
void for_each_lattice_channel(const SourceLibrary& lib, int steps, std::size_t a,
                              const std::function<void(const Matrix&)>& visit) {
    const std::size_t n = lib.joint_size();
    std::vector<std::vector<int>> comps;
    std::vector<int> cur(a, 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
        if (i + 1 == a) {
            cur[i] = left;
            comps.push_back(cur);
            return;
        }
        for (int v = left; v >= 0; --v) {
            cur[i] = v;
            rec(i + 1, left - v);
        }
    };
    rec(0, steps);

    std::vector<std::size_t> free_rows;
    for (std::size_t x = 0; x < n; ++x)
        if (lib.pmf()[x] > 0.0) free_rows.push_back(x);

    std::vector<std::size_t> idx(free_rows.size(), 0);
    Matrix w(n, a);
    for (std::size_t x = 0; x < n; ++x) w(x, 0) = 1.0;
    const double inv = 1.0 / steps;
    for (;;) {
        for (std::size_t r = 0; r < free_rows.size(); ++r)
            for (std::size_t u = 0; u < a; ++u) w(free_rows[r], u) = comps[idx[r]][u] * inv;
        // keep columns in non-increasing lexicographic order over the free rows
        bool canonical = true;
        for (std::size_t u = 0; u + 1 < a && canonical; ++u) {
            for (std::size_t r = 0; r < free_rows.size(); ++r) {
                const double c0 = w(free_rows[r], u), c1 = w(free_rows[r], u + 1);
                if (c0 > c1) break;
                if (c0 < c1) {
                    canonical = false;
                    break;
                }
            }
        }
        if (canonical) visit(w);
        std::size_t r = 0;
        while (r < idx.size() && ++idx[r] == comps.size()) idx[r++] = 0;
        if (r == idx.size()) break;
    }
}

// Best feasible points of the finest lattice whose size fits the budget.
// The binary-auxiliary landscape has isolated basins that random starts miss.
std::vector<Matrix> lattice_starts(const SourceLibrary& lib, Objective& f, std::size_t k, double C,
                                   double budget, std::size_t keep) {
    std::size_t free_rows = 0;
    for (double p : lib.pmf()) free_rows += p > 0.0;
    int steps = 0;
    while (std::pow(lattice_size(steps + 1, k), static_cast<double>(free_rows)) <= budget) ++steps;
    if (steps < 2) return {};
    std::vector<Candidate> best;
    for_each_lattice_channel(lib, steps, k, [&](const Matrix& w) {
        if (aux_information(lib, w) > C) return;
        AuxEvaluation ev = f(w);
        if (best.size() == keep && !better(ev, best.back().ev)) return;
        if (best.size() == keep) best.pop_back();
        auto at = std::find_if(best.begin(), best.end(), [&](const Candidate& c) { return better(ev, c.ev); });
        best.insert(at, Candidate{w, std::move(ev)});
    });
    std::vector<Matrix> out;
    for (auto& c : best) out.push_back(std::move(c.w));
    return out;
}

struct SearchContext {
    const SourceLibrary& lib;
    const DistortionTuple& D;
    const RDCOptions& opts;
    std::size_t k;
    double joint_rate;
    Matrix joint_witness;  // p(x̂̄|x̄) compacted, as an auxiliary channel
};

SearchContext make_context(const SourceLibrary& lib, const DistortionTuple& D, const RDCOptions& opts) {
    JointRDOptions jo;
    jo.ba.strict = false;
    const RDResult jr = joint_rd_function(lib, D, jo);
    return {lib, D, opts, default_aux_size(lib, D, opts.aux_cap), jr.rate, compact(lib, jr.achieving_channel.matrix)};
}

Candidate make_candidate(SearchContext& ctx, Objective& f, const Matrix& w, double C) {
    Matrix r = repair(ctx.lib, pad(w, ctx.k), C);
    AuxEvaluation ev = f(r);
    return {std::move(r), std::move(ev)};
}

Candidate search(SearchContext& ctx, double C, const std::vector<Matrix>& extra_starts, bool seeds_only) {
    const auto& lib = ctx.lib;
    const auto& opts = ctx.opts;
    const std::size_t n = lib.joint_size();
    const std::size_t k = ctx.k;
    Objective f(lib, ctx.D, opts.search_ba);

    std::vector<Matrix> starts;
    if (seeds_only) {
        for (const auto& e : extra_starts)
            if (auto fitted = fit(lib, e, k)) starts.push_back(std::move(*fitted));
    }
    if (starts.empty()) {
        starts.push_back(Matrix(n, k));
        for (std::size_t x = 0; x < n; ++x) starts.back()(x, 0) = 1.0;
        if (ctx.joint_witness.cols() <= k) starts.push_back(ctx.joint_witness);
        enumerate_partitions(n, k, static_cast<std::size_t>(opts.max_partition_starts),
                             [&](const std::vector<std::size_t>& label) { starts.push_back(deterministic(n, k, label)); });
        for (std::size_t l = 0; l < lib.num_sources() && lib.alphabet_size(l) <= k; ++l) {
            std::vector<std::size_t> label(n);
            for (std::size_t x = 0; x < n; ++x) label[x] = lib.symbol(x, l);
            starts.push_back(deterministic(n, k, label));
        }
        std::mt19937_64 rng(opts.seed);
        std::gamma_distribution<double> gamma(1.0, 1.0);
        for (int r = 0; r < opts.restarts; ++r) {
            // supports cycle through 2..min(k, |X̄|) letters; the search can open more
            const std::size_t widest = std::min(k, n);
            const std::size_t active = widest < 2 ? widest : 2 + static_cast<std::size_t>(r) % (widest - 1);
            Matrix w(n, k);
            for (std::size_t x = 0; x < n; ++x) {
                double s = 0.0;
                for (std::size_t u = 0; u < active; ++u) s += (w(x, u) = gamma(rng));
                for (std::size_t u = 0; u < active; ++u) w(x, u) /= s;
            }
            starts.push_back(std::move(w));
        }
        for (const auto& e : extra_starts)
            if (auto fitted = fit(lib, e, k)) starts.push_back(std::move(*fitted));
    }
    // lattice starts are always polished, on top of the best few
    const std::size_t first_lattice = starts.size();
    if (!seeds_only)
        for (auto& w : lattice_starts(lib, f, k, C, opts.lattice_budget, 3)) starts.push_back(std::move(w));

    std::vector<Candidate> cands;
    cands.reserve(starts.size());
    for (const auto& s : starts) cands.push_back(make_candidate(ctx, f, s, C));

    // short descent from every fresh start, full descent from the best few
    if (!seeds_only)
        for (auto& c : cands) lagrangian_refine(lib, C, f, c, 2);
    std::vector<std::size_t> order(cands.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cands[a].ev.max_rate < cands[b].ev.max_rate; });
    const std::size_t polish = std::min<std::size_t>(static_cast<std::size_t>(std::max(opts.polish, 1)), cands.size());
    std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(polish));
    for (std::size_t i = first_lattice; i < cands.size(); ++i)
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) chosen.push_back(i);
    for (std::size_t i : chosen) {
        auto& c = cands[i];
        lagrangian_refine(lib, C, f, c);
        if (lib.num_sources() > 1) {
            // smoothed pass from a copy; kept only if the exact value improves
            Candidate s = c;
            pattern_search(lib, C, f, s, 0.0625, opts.coarse_step, 50, 200.0);
            if (better(s.ev, c.ev)) c = std::move(s);
        }
        pattern_search(lib, C, f, c, 0.0625, opts.coarse_step, 50);
        lagrangian_refine(lib, C, f, c);
        pattern_search(lib, C, f, c, opts.coarse_step, opts.min_step, 50);
    }
    std::size_t best = chosen[0];
    for (std::size_t i : chosen)
        if (better(cands[i].ev, cands[best].ev)) best = i;
    return std::move(cands[best]);
}

TradeoffPoint finalize(const SourceLibrary& lib, const DistortionTuple& D, double C, const Matrix& w) {
    TradeoffPoint pt;
    pt.cache = C;
    pt.distortions = D;
    Matrix c = compact(lib, w);
    BAOptions strict_off;
    strict_off.strict = false;
    const AuxEvaluation ev = evaluate_aux_channel(lib, D, AuxChannel{c}, strict_off);
    pt.rate = ev.max_rate;
    pt.cache_used = ev.cache_used;
    pt.witness = AuxChannel{std::move(c)};
    pt.method = Method::Solver;
    return pt;
}

TradeoffPoint solve_point(SearchContext& ctx, double C, const std::vector<Matrix>& extra_starts,
                          bool seeds_only = false) {
    if (C >= ctx.joint_rate) {
        // caching the joint RD description leaves nothing to send
        return finalize(ctx.lib, ctx.D, C, ctx.joint_witness);
    }
    std::vector<Matrix> starts = extra_starts;
    if (!seeds_only && ctx.k > 2) {
        // binary auxiliaries are cheap to search and seed the full alphabet
        SearchContext narrow = ctx;
        narrow.k = 2;
        starts.push_back(search(narrow, C, extra_starts, false).w);
    }
    Candidate best = search(ctx, C, starts, seeds_only);
    TradeoffPoint pt = finalize(ctx.lib, ctx.D, C, best.w);
    return pt;
}

}  // namespace

std::size_t default_aux_size(const SourceLibrary& lib, const DistortionTuple& D, std::size_t user_cap) {
    const std::size_t L = lib.num_sources();
    bool hamming_lossless = true;
    for (std::size_t l = 0; l < L; ++l) hamming_lossless = hamming_lossless && D[l] == 0.0 && is_hamming(lib.distortion(l));
    const std::size_t cap = lib.joint_size() + (hamming_lossless ? L : 2 * L);
    return user_cap == 0 ? cap : std::min(cap, user_cap);
}

AuxEvaluation evaluate_aux_channel(const SourceLibrary& lib, const DistortionTuple& D, const AuxChannel& aux,
                                   const BAOptions& ba) {
    if (aux.matrix.rows() != lib.joint_size()) throw Error(ErrorCode::ShapeMismatch, "aux channel rows must equal |X̄|");
    for (std::size_t x = 0; x < aux.matrix.rows(); ++x) {
        double s = 0.0;
        for (double v : aux.matrix.row(x)) {
            if (v < 0.0) throw Error(ErrorCode::InvalidPmf, "negative aux channel entry");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-9) throw Error(ErrorCode::InvalidPmf, "aux channel row does not sum to one");
    }
    Objective f(lib, D, ba);
    return f(aux.matrix);
}

TradeoffPoint rdc_value(const SourceLibrary& lib, const DistortionTuple& D, double C, const RDCOptions& opts) {
    check_inputs(lib, D, C);
    SearchContext ctx = make_context(lib, D, opts);
    return solve_point(ctx, C, {});
}

// ---------------------------------------------------------------------------
// Brute force

namespace {

struct GridPoint {
    double info;
    double rate;
    Matrix w;
};

std::vector<GridPoint> scan_grid(const SourceLibrary& lib, const DistortionTuple& D, int steps, std::size_t a,
                                 double info_cap) {
    if (lib.joint_size() > 4 || a > 3 || a == 0) {
        throw Error(ErrorCode::InstanceTooLarge, "brute force needs |X̄| <= 4 and aux size <= 3");
    }
    if (steps < 1) throw Error(ErrorCode::InvalidArgument, "grid_steps must be >= 1");
    BAOptions ba;
    ba.strict = false;
    ba.gap_tolerance = 1e-12;
    Objective f(lib, D, ba);

    std::vector<GridPoint> out;
    for_each_lattice_channel(lib, steps, a, [&](const Matrix& w) {
        const double info = aux_information(lib, w);
        if (info <= info_cap + 1e-12) out.push_back({info, f(w).max_rate, w});
    });
    return out;
}

TradeoffPoint best_on_grid(const DistortionTuple& D, double C,
                           const std::vector<GridPoint>& grid) {
    const GridPoint* best = nullptr;
    for (const auto& g : grid)
        if (g.info <= C + 1e-12 && (!best || g.rate < best->rate - 1e-15)) best = &g;
    TradeoffPoint pt;
    pt.cache = C;
    pt.distortions = D;
    pt.method = Method::Oracle;
    if (best) {
        pt.rate = best->rate;
        pt.cache_used = best->info;
        pt.witness = AuxChannel{best->w};
    }
    return pt;
}

}  // namespace

TradeoffPoint rdc_brute_force(const SourceLibrary& lib, const DistortionTuple& D, double C, int grid_steps,
                              std::size_t aux_size) {
    check_inputs(lib, D, C);
    return best_on_grid(D, C, scan_grid(lib, D, grid_steps, aux_size, C));
}

std::vector<TradeoffPoint> rdc_brute_force_curve(const SourceLibrary& lib, const DistortionTuple& D,
                                                 const std::vector<double>& caches, int grid_steps,
                                                 std::size_t aux_size) {
    double cmax = 0.0;
    for (double C : caches) {
        check_inputs(lib, D, C);
        cmax = std::max(cmax, C);
    }
    const auto grid = scan_grid(lib, D, grid_steps, aux_size, cmax);
    std::vector<TradeoffPoint> out;
    for (double C : caches) out.push_back(best_on_grid(D, C, grid));
    return out;
}

double grid_gap(int grid_steps, std::size_t joint_size, std::size_t aux_size) {
    const double eps = static_cast<double>(aux_size - 1) / (2.0 * grid_steps);
    const double h = eps <= 0.0 || eps >= 1.0 ? 0.0 : -eps * std::log2(eps) - (1 - eps) * std::log2(1 - eps);
    return eps * std::log2(static_cast<double>(joint_size * aux_size)) + h;
}

// ---------------------------------------------------------------------------
// Bounds

BoundTerms bound_terms(const SourceLibrary& lib, const DistortionTuple& D) {
    const std::size_t L = lib.num_sources();
    if (D.size() != L) throw Error(ErrorCode::ShapeMismatch, "distortion tuple length must equal L");
    if (L > 8) throw Error(ErrorCode::InstanceTooLarge, "subset bounds need L <= 8");
    BoundTerms t;
    JointRDOptions jo;
    jo.ba.strict = false;
    for (std::size_t l = 0; l < L; ++l) t.marginal_rates.push_back(rd_function(lib.source_marginal(l), lib.distortion(l), D[l]).rate);
    for (std::size_t mask = 1; mask < (std::size_t{1} << L); ++mask) {
        std::vector<std::size_t> subset;
        std::vector<double> dsub;
        for (std::size_t l = 0; l < L; ++l)
            if (mask & (std::size_t{1} << l)) {
                subset.push_back(l);
                dsub.push_back(D[l]);
            }
        double r;
        if (subset.size() == 1) {
            r = t.marginal_rates[subset[0]];
        } else {
            r = joint_rd_function(sub_library(lib, subset), DistortionTuple(dsub), jo).rate;
        }
        t.subset_rates.emplace_back(mask, r);
        if (subset.size() == L) t.joint_rate = r;
    }
    if (L == 1) t.joint_rate = t.marginal_rates[0];
    return t;
}

double genie_bound(const BoundTerms& t, double C) {
    const double m = *std::max_element(t.marginal_rates.begin(), t.marginal_rates.end());
    return std::max(0.0, m - C);
}

double superuser_bound(const BoundTerms& t, std::size_t L, double C) {
    return std::max(0.0, (t.joint_rate - C) / static_cast<double>(L));
}

double super_genie_bound(const BoundTerms& t, double C) {
    double best = 0.0;
    for (const auto& [mask, r] : t.subset_rates) {
        const double s = static_cast<double>(std::popcount(mask));
        best = std::max(best, (r - C) / s);
    }
    return best;
}

double genie_bound(const SourceLibrary& lib, const DistortionTuple& D, double C) {
    check_inputs(lib, D, C);
    double m = 0.0;
    for (std::size_t l = 0; l < lib.num_sources(); ++l)
        m = std::max(m, rd_function(lib.source_marginal(l), lib.distortion(l), D[l]).rate);
    return std::max(0.0, m - C);
}

double superuser_bound(const SourceLibrary& lib, const DistortionTuple& D, double C) {
    check_inputs(lib, D, C);
    JointRDOptions jo;
    jo.ba.strict = false;
    const double r = joint_rd_function(lib, D, jo).rate;
    return std::max(0.0, (r - C) / static_cast<double>(lib.num_sources()));
}

double super_genie_bound(const SourceLibrary& lib, const DistortionTuple& D, double C) {
    check_inputs(lib, D, C);
    return super_genie_bound(bound_terms(lib, D), C);
}

// ---------------------------------------------------------------------------
// Curves and critical capacities

TradeoffCurve rdc_curve(const SourceLibrary& lib, const DistortionTuple& D, const std::vector<double>& caches,
                        const RDCOptions& opts) {
    for (double C : caches) check_inputs(lib, D, C);
    TradeoffCurve curve;
    curve.distortions = D;
    if (caches.empty()) return curve;

    std::vector<std::size_t> order(caches.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return caches[a] < caches[b]; });

    SearchContext ctx = make_context(lib, D, opts);
    const BoundTerms terms = bound_terms(lib, D);
    const std::size_t L = lib.num_sources();

    std::vector<TradeoffPoint> pts(caches.size());
    std::vector<Matrix> pool;
    // forward sweep seeds each point with the witnesses found so far
    for (std::size_t i : order) {
        pts[i] = solve_point(ctx, caches[i], pool);
        pool.push_back(pts[i].witness->matrix);
    }
    // backward sweep: witnesses from larger caches, repaired downward
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const std::size_t i = *it;
        if (caches[i] >= ctx.joint_rate) continue;
        TradeoffPoint again = solve_point(ctx, caches[i], pool, true);
        if (again.rate < pts[i].rate - 1e-12) pts[i] = std::move(again);
    }
    // time sharing between witnesses on either side of each point
    BAOptions ba;
    ba.strict = false;
    for (std::size_t i = 0; i < caches.size(); ++i) {
        const double C = caches[i];
        for (std::size_t j = 0; j < caches.size(); ++j) {
            for (std::size_t m = 0; m < caches.size(); ++m) {
                const double cj = pts[j].cache_used, cm = pts[m].cache_used;
                if (!(cj < C && C < cm)) continue;
                const double lambda = (cm - C) / (cm - cj);
                const Matrix ts = compact(lib, time_share(pts[j].witness->matrix, pts[m].witness->matrix, lambda));
                if (ts.cols() > ctx.k) continue;
                const AuxEvaluation ev = evaluate_aux_channel(lib, D, AuxChannel{ts}, ba);
                if (ev.cache_used <= C + 1e-9 && ev.max_rate < pts[i].rate - 1e-12) {
                    pts[i].rate = ev.max_rate;
                    pts[i].cache_used = ev.cache_used;
                    pts[i].witness = AuxChannel{ts};
                }
            }
        }
    }

    double best_so_far = std::numeric_limits<double>::infinity();
    std::vector<double> envelope(caches.size());
    for (std::size_t i : order) {
        best_so_far = std::min(best_so_far, pts[i].rate);
        envelope[i] = best_so_far;
    }
    for (std::size_t i = 0; i < caches.size(); ++i) {
        const double C = caches[i];
        const double violation = pts[i].rate - envelope[i];
        curve.max_monotonicity_violation = std::max(curve.max_monotonicity_violation, violation);
        if (violation > 1e-4) {
            curve.warnings.push_back("raw rate at C=" + std::to_string(C) + " exceeds the envelope by " +
                                     std::to_string(violation));
        }
        curve.points.push_back({C, pts[i].rate, envelope[i], genie_bound(terms, C), superuser_bound(terms, L, C),
                                super_genie_bound(terms, C), pts[i].witness->aux_size(), pts[i].cache_used,
                                pts[i].converged, pts[i].witness});
    }
    return curve;
}

namespace {

// Bisection for the boundary of {C : pred(C)} between a point where pred
// holds and one where it fails.
double refine_boundary(double holds, double fails, const std::function<bool(double)>& pred, int iters = 12) {
    for (int i = 0; i < iters; ++i) {
        const double mid = 0.5 * (holds + fails);
        (pred(mid) ? holds : fails) = mid;
    }
    return holds;
}

std::vector<std::size_t> sorted_by_cache(const TradeoffCurve& curve) {
    std::vector<std::size_t> order(curve.points.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return curve.points[a].cache < curve.points[b].cache; });
    return order;
}

}  // namespace

double critical_capacity_genie(const SourceLibrary& lib, const DistortionTuple& D, const TradeoffCurve& curve,
                               const RDCOptions& opts, double tol) {
    if (curve.points.empty()) throw Error(ErrorCode::InvalidArgument, "empty curve");
    const BoundTerms terms = bound_terms(lib, D);
    const double cap = *std::max_element(terms.marginal_rates.begin(), terms.marginal_rates.end());
    auto holds = [&](double C) {
        return std::abs(rdc_value(lib, D, C, opts).rate - genie_bound(terms, C)) <= tol;
    };
    const auto order = sorted_by_cache(curve);
    // beyond max_l R_{X_l}(D_l) the genie bound is zero and equality is vacuous
    std::optional<std::size_t> last;
    for (std::size_t i : order) {
        const auto& p = curve.points[i];
        if (p.cache > cap + 1e-12) break;
        if (std::abs(p.rate_envelope - p.genie) <= tol) last = i;
        else break;
    }
    if (!last) return 0.0;
    const double c_hold = curve.points[*last].cache;
    double c_fail = cap;
    for (std::size_t i : order)
        if (curve.points[i].cache > c_hold) {
            c_fail = std::min(curve.points[i].cache, cap);
            break;
        }
    if (c_fail <= c_hold) return c_hold;
    if (holds(c_fail)) return c_fail;
    return refine_boundary(c_hold, c_fail, holds);
}

double critical_capacity_superuser(const SourceLibrary& lib, const DistortionTuple& D, const TradeoffCurve& curve,
                                   const RDCOptions& opts, double tol) {
    if (curve.points.empty()) throw Error(ErrorCode::InvalidArgument, "empty curve");
    const BoundTerms terms = bound_terms(lib, D);
    const std::size_t L = lib.num_sources();
    auto holds = [&](double C) {
        return std::abs(rdc_value(lib, D, C, opts).rate - superuser_bound(terms, L, C)) <= tol;
    };
    const auto order = sorted_by_cache(curve);
    std::optional<std::size_t> first;
    for (std::size_t i : order)
        if (std::abs(curve.points[i].rate_envelope - curve.points[i].superuser) <= tol) {
            first = i;
            break;
        }
    const double c_hold = first ? curve.points[*first].cache : terms.joint_rate;
    double c_fail = -1.0;
    for (std::size_t i : order)
        if (curve.points[i].cache < c_hold) c_fail = curve.points[i].cache;
    if (c_fail < 0.0) return c_hold;
    return refine_boundary(c_hold, c_fail, holds);
}

GrayWynerPoint gray_wyner_min_max(const SourceLibrary& lib, const DistortionTuple& D, double C,
                                  const RDCOptions& opts) {
    const TradeoffPoint pt = rdc_value(lib, D, C, opts);
    const Matrix& w = pt.witness->matrix;
    const std::size_t k = w.cols();
    GrayWynerPoint gw;
    gw.common_rate = aux_information(lib, w);
    gw.min_max_rate = 0.0;
    BAOptions ba;
    ba.strict = false;
    for (std::size_t l = 0; l < lib.num_sources(); ++l) {
        const std::size_t nx = lib.alphabet_size(l);
        const std::size_t nxh = lib.recon_size(l);
        Matrix joint_xu(nx, k);
        for (std::size_t x = 0; x < lib.joint_size(); ++x)
            for (std::size_t u = 0; u < k; ++u) joint_xu(lib.symbol(x, l), u) += lib.pmf()[x] * w(x, u);
        const RDResult r = conditional_rd_function(joint_xu, lib.distortion(l), D[l], ba);
        // explicit joint over (x_l, x̂_l, u) from the achieving channel
        JointTable t({nx, nxh, k});
        double dist = 0.0;
        for (std::size_t x = 0; x < nx; ++x)
            for (std::size_t u = 0; u < k; ++u)
                for (std::size_t xh = 0; xh < nxh; ++xh) {
                    const double m = joint_xu(x, u) * r.achieving_channel.matrix(x * k + u, xh);
                    t.pmf()[(x * nxh + xh) * k + u] = m;
                    dist += m * lib.distortion(l)(xh, x);
                }
        const double rate = t.mutual_information(0b001, 0b010, 0b100);
        gw.private_rates.push_back(rate);
        gw.achieved_distortions.push_back(dist);
        gw.min_max_rate = std::max(gw.min_max_rate, rate);
    }
    return gw;
}

}  // namespace rdcache
