#include "rdcache/two_user.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "rdcache/closed_forms.hpp"
#include "rdcache/error.hpp"
#include "rdcache/info.hpp"
#include "rdcache/rate_distortion.hpp"

namespace rdcache {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxJoint = 4;
constexpr std::size_t kMaxRecon = 3;
constexpr std::size_t kMaxOutcomes = 256;

using Vars = std::vector<Matrix>;

// ---------------------------------------------------------------------------
// Generic min-max search over products of row-stochastic blocks.

struct Program {
    std::vector<Matrix> masks;  // 1 where a cell may carry mass
    // Fills the min-max terms; false when a distortion constraint fails.
    std::function<bool(const Vars&, std::vector<double>&)> terms;
    // Moves reconstruction blocks toward zero distortion until feasible.
    std::function<void(Vars&)> repair;
    std::vector<Vars> starts;
    std::size_t table_cells = 1;  // size of the largest joint table, for the slack
};

double smooth_max(const std::vector<double>& t, double beta) {
    const double m = *std::max_element(t.begin(), t.end());
    if (!std::isfinite(beta)) return m;
    double s = 0.0;
    for (double v : t) s += std::exp(beta * (v - m));
    return m + std::log(s) / beta;
}

class Searcher {
public:
    Searcher(const Program& prog, const TwoUserGridOptions& opts) : prog_(prog), opts_(opts) {}

    TwoUserBound run() {
        TwoUserBound out;
        best_ = kInf;
        std::vector<Vars> seeds = prog_.starts;

        const double lattice = lattice_count();
        if (lattice <= static_cast<double>(opts_.max_grid_points)) {
            out.exhaustive = true;
            enumerate();
            if (best_vars_) seeds.insert(seeds.begin(), *best_vars_);
        }

        std::mt19937_64 rng(opts_.seed);
        for (int r = 0; r < opts_.random_starts; ++r) seeds.push_back(random_point(rng));

        // short coarse pass on every seed, full refinement on the best two
        std::vector<std::pair<double, Vars>> coarse;
        for (Vars v : seeds) {
            prog_.repair(v);
            const double f = descend(v, 100.0, 0, std::min(2, opts_.refine_levels), 20);
            coarse.emplace_back(f, std::move(v));
        }
        std::stable_sort(coarse.begin(), coarse.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t i = 0; i < std::min<std::size_t>(2, coarse.size()); ++i) {
            Vars v = coarse[i].second;
            descend(v, 100.0, 0, opts_.refine_levels, 60);
            descend(v, kInf, 2, opts_.refine_levels, 60);
        }
        if (best_vars_) {
            Vars v = *best_vars_;
            descend(v, kInf, 1, opts_.refine_levels + 2, 100);
        }

        out.value = best_;
        out.evaluations = evaluations_;
        out.slack = slack();
        return out;
    }

private:
    // Exact objective with best-point bookkeeping; smoothed value returned.
    double eval(const Vars& v, double beta) {
        ++evaluations_;
        if (!prog_.terms(v, terms_)) return kInf;
        const double exact = *std::max_element(terms_.begin(), terms_.end());
        if (exact < best_) {
            best_ = exact;
            best_vars_ = v;
        }
        return smooth_max(terms_, beta);
    }

    double descend(Vars& v, double beta, int first_level, int last_level, int max_sweeps) {
        double f = eval(v, beta);
        if (!std::isfinite(f)) {
            prog_.repair(v);
            f = eval(v, beta);
        }
        for (int level = first_level; level <= last_level; ++level) {
            const double step = 1.0 / (opts_.grid_steps * std::ldexp(1.0, level));
            for (int sweep = 0; sweep < max_sweeps; ++sweep) {
                const double before = f;
                for (std::size_t b = 0; b < v.size(); ++b) {
                    const Matrix& mask = prog_.masks[b];
                    for (std::size_t r = 0; r < mask.rows(); ++r)
                        for (std::size_t j = 0; j < mask.cols(); ++j) {
                            if (mask(r, j) == 0.0) continue;
                            for (std::size_t k = 0; k < mask.cols(); ++k) {
                                if (k == j || mask(r, k) == 0.0) continue;
                                const double delta = std::min(step, v[b](r, j));
                                if (delta <= 0.0) break;
                                Vars trial = v;
                                trial[b](r, j) -= delta;
                                trial[b](r, k) += delta;
                                double g = eval(trial, beta);
                                if (!std::isfinite(g)) {
                                    prog_.repair(trial);
                                    g = eval(trial, beta);
                                }
                                if (g < f - 1e-13) {
                                    f = g;
                                    v = std::move(trial);
                                }
                            }
                        }
                }
                if (before - f < 1e-11) break;
            }
        }
        return f;
    }

    // Lattice points per row: compositions of grid_steps over allowed cells.
    static double compositions(std::size_t cells, int steps) {
        double c = 1.0;
        for (std::size_t i = 1; i < cells; ++i) c = c * static_cast<double>(steps + i) / static_cast<double>(i);
        return c;
    }

    double lattice_count() const {
        double total = 1.0;
        for (const Matrix& m : prog_.masks)
            for (std::size_t r = 0; r < m.rows(); ++r) {
                std::size_t cells = 0;
                for (std::size_t j = 0; j < m.cols(); ++j) cells += m(r, j) != 0.0;
                total *= compositions(cells, opts_.grid_steps);
                if (total > 1e18) return total;
            }
        return total;
    }

    static void row_lattice(std::size_t cells, int steps, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
        if (cur.size() + 1 == cells) {
            int used = std::accumulate(cur.begin(), cur.end(), 0);
            cur.push_back(steps - used);
            out.push_back(cur);
            cur.pop_back();
            return;
        }
        const int used = std::accumulate(cur.begin(), cur.end(), 0);
        for (int a = 0; a <= steps - used; ++a) {
            cur.push_back(a);
            row_lattice(cells, steps, cur, out);
            cur.pop_back();
        }
    }

    void enumerate() {
        struct Row {
            std::size_t block, row;
            std::vector<std::size_t> cells;
            std::vector<std::vector<int>> options;
        };
        std::vector<Row> rows;
        Vars v;
        for (std::size_t b = 0; b < prog_.masks.size(); ++b) {
            const Matrix& m = prog_.masks[b];
            v.emplace_back(m.rows(), m.cols());
            for (std::size_t r = 0; r < m.rows(); ++r) {
                Row row{b, r, {}, {}};
                for (std::size_t j = 0; j < m.cols(); ++j)
                    if (m(r, j) != 0.0) row.cells.push_back(j);
                std::vector<int> cur;
                row_lattice(row.cells.size(), opts_.grid_steps, cur, row.options);
                rows.push_back(std::move(row));
            }
        }
        auto set_row = [&](const Row& row, std::size_t o) {
            for (std::size_t c = 0; c < row.cells.size(); ++c)
                v[row.block](row.row, row.cells[c]) = row.options[o][c] / static_cast<double>(opts_.grid_steps);
        };
        std::vector<std::size_t> idx(rows.size(), 0);
        for (std::size_t i = 0; i < rows.size(); ++i) set_row(rows[i], 0);
        while (true) {
            eval(v, kInf);
            std::size_t i = 0;
            for (; i < rows.size(); ++i) {
                if (++idx[i] < rows[i].options.size()) {
                    set_row(rows[i], idx[i]);
                    break;
                }
                idx[i] = 0;
                set_row(rows[i], 0);
            }
            if (i == rows.size()) break;
        }
    }

    Vars random_point(std::mt19937_64& rng) const {
        std::gamma_distribution<double> gamma(0.5, 1.0);
        Vars v;
        for (const Matrix& m : prog_.masks) {
            Matrix w(m.rows(), m.cols());
            for (std::size_t r = 0; r < m.rows(); ++r) {
                double s = 0.0;
                for (std::size_t j = 0; j < m.cols(); ++j) {
                    if (m(r, j) == 0.0) continue;
                    w(r, j) = gamma(rng) + 1e-12;
                    s += w(r, j);
                }
                for (std::size_t j = 0; j < m.cols(); ++j) w(r, j) /= s;
            }
            v.push_back(std::move(w));
        }
        return v;
    }

    // Fannes-type continuity bound for a lattice move of every free row
    // (three entropy differences per term).
    double slack() const {
        std::size_t widest = 1;
        for (const Matrix& m : prog_.masks)
            for (std::size_t r = 0; r < m.rows(); ++r) {
                std::size_t cells = 0;
                for (std::size_t j = 0; j < m.cols(); ++j) cells += m(r, j) != 0.0;
                widest = std::max(widest, cells);
            }
        if (widest == 1) return 0.0;
        const double eps = std::min(0.5, (widest - 1.0) / (2.0 * opts_.grid_steps));
        return 3.0 * (eps * std::log2(static_cast<double>(prog_.table_cells)) + binary_entropy(eps));
    }

    const Program& prog_;
    const TwoUserGridOptions& opts_;
    std::vector<double> terms_;
    double best_ = kInf;
    std::optional<Vars> best_vars_;
    std::size_t evaluations_ = 0;
};

// ---------------------------------------------------------------------------
// Shared pieces.

// First zero-distortion reconstruction of source letter x.
std::size_t zero_letter(const Matrix& d, std::size_t x) {
    for (std::size_t r = 0; r < d.rows(); ++r)
        if (d(r, x) == 0.0) return r;
    throw Error(ErrorCode::MissingZeroDistortionSymbol, "source letter without a zero-distortion reconstruction");
}

// Cells a reconstruction row may use: all of them, or only exact matches when
// the target is zero.
std::vector<char> allowed_letters(const Matrix& d, std::size_t x, double target) {
    std::vector<char> ok(d.rows(), 1);
    if (target == 0.0)
        for (std::size_t r = 0; r < d.rows(); ++r) ok[r] = d(r, x) == 0.0;
    return ok;
}

bool within(double e, double target) { return e <= target * (1.0 + 1e-12) + 1e-14; }

// Product alphabet of several reconstruction components.
struct ProductAlphabet {
    std::vector<std::size_t> sizes;
    std::size_t total = 1;

    explicit ProductAlphabet(std::vector<std::size_t> s) : sizes(std::move(s)) {
        for (std::size_t a : sizes) total *= a;
    }
    std::size_t digit(std::size_t index, std::size_t c) const {
        for (std::size_t j = sizes.size(); j-- > c + 1;) index /= sizes[j];
        return index % sizes[c];
    }
};

void check_size(const SourceLibrary& lib, const TwoUserInstance& inst) {
    if (lib.joint_size() > kMaxJoint) throw Error(ErrorCode::InstanceTooLarge, "two-user search needs |X̄| <= 4");
    for (std::size_t l : inst.demands1)
        if (lib.recon_size(l) > kMaxRecon) throw Error(ErrorCode::InstanceTooLarge, "reconstruction alphabets must be <= 3");
    for (std::size_t l : inst.demands2)
        if (inst.delta[l].rows() > kMaxRecon) throw Error(ErrorCode::InstanceTooLarge, "reconstruction alphabets must be <= 3");
}

std::vector<std::size_t> unique_sorted(std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

// Rows of an RD-achieving channel for source l, indexed by the source letter.
Matrix rd_rows(const SourceLibrary& lib, const Matrix& d, std::size_t l, double target) {
    const RDResult r = rd_function(lib.source_marginal(l), d, target);
    return r.achieving_channel.matrix;
}

double mi(const JointTable& t, std::uint32_t a, std::uint32_t b, std::uint32_t c = 0) {
    return std::max(0.0, t.mutual_information(a, b, c));
}

// Scale factor that brings expected distortion e down to target by mixing
// toward a zero-distortion channel.
double mix_needed(double e, double target) { return within(e, target) ? 0.0 : 1.0 - target / e; }

}  // namespace

// ---------------------------------------------------------------------------

TwoUserInstance make_two_user_instance(SourceLibrary lib, std::vector<std::size_t> demands1,
                                       std::vector<std::size_t> demands2, DistortionTuple D, DistortionTuple Delta,
                                       double cache, std::vector<Matrix> delta) {
    const std::size_t L = lib.num_sources();
    if (demands1.empty() || demands2.empty()) throw Error(ErrorCode::EmptySubset, "demand sets must be nonempty");
    for (std::size_t l : demands1)
        if (l >= L) throw Error(ErrorCode::IndexOutOfRange, "user-1 demand out of range");
    for (std::size_t l : demands2)
        if (l >= L) throw Error(ErrorCode::IndexOutOfRange, "user-2 demand out of range");
    if (D.size() != L || Delta.size() != L) throw Error(ErrorCode::ShapeMismatch, "one target per source required");
    if (!(cache >= 0.0) || !std::isfinite(cache)) throw Error(ErrorCode::InvalidCache, "cache must be finite and >= 0");
    if (delta.empty()) delta.resize(L);
    if (delta.size() != L) throw Error(ErrorCode::ShapeMismatch, "one user-2 distortion matrix per source required");
    for (std::size_t l = 0; l < L; ++l) {
        if (delta[l].empty()) delta[l] = hamming_matrix(lib.alphabet_size(l));
        if (delta[l].cols() != lib.alphabet_size(l))
            throw Error(ErrorCode::ShapeMismatch, "user-2 distortion matrix must have |X_l| columns");
        for (double v : delta[l].data()) {
            if (!std::isfinite(v)) throw Error(ErrorCode::InfiniteDistortion, "user-2 distortion must be finite");
            if (v < 0.0) throw Error(ErrorCode::InvalidArgument, "user-2 distortion must be >= 0");
        }
        for (std::size_t x = 0; x < lib.alphabet_size(l); ++x) zero_letter(delta[l], x);
    }
    return TwoUserInstance{std::move(lib), unique_sorted(std::move(demands1)), unique_sorted(std::move(demands2)),
                           std::move(delta), std::move(D), std::move(Delta), cache};
}

TwoUserBound two_user_upper(const TwoUserInstance& inst, const TwoUserGridOptions& opts) {
    const SourceLibrary& lib = inst.lib;
    check_size(lib, inst);
    const std::size_t n = lib.joint_size();
    const std::size_t k = opts.aux_size ? opts.aux_size : 3;
    if (k > n + 2 * lib.num_sources()) throw Error(ErrorCode::InstanceTooLarge, "auxiliary alphabet above |X̄| + 2L");
    const std::vector<double>& p = lib.pmf();
    const std::size_t L1 = inst.demands1.size(), L2 = inst.demands2.size();

    // blocks: U, then X̂_l1 rows (x̄, u), then X̃_l2 rows (x̄, u)
    struct Recon {
        std::size_t source;
        const Matrix* d;
        double target;
    };
    std::vector<Recon> recon;
    for (std::size_t l : inst.demands1) recon.push_back({l, &lib.distortion(l), inst.D[l]});
    for (std::size_t l : inst.demands2) recon.push_back({l, &inst.delta[l], inst.Delta[l]});

    Program prog;
    prog.masks.emplace_back(n, k, 1.0);
    for (const Recon& rc : recon) {
        Matrix m(n * k, rc.d->rows());
        for (std::size_t x = 0; x < n; ++x) {
            const auto ok = allowed_letters(*rc.d, lib.symbol(x, rc.source), rc.target);
            for (std::size_t u = 0; u < k; ++u)
                for (std::size_t a = 0; a < ok.size(); ++a) m(x * k + u, a) = ok[a];
        }
        prog.masks.push_back(std::move(m));
    }
    std::size_t widest = 1;
    for (const Recon& rc : recon) widest = std::max(widest, rc.d->rows());
    prog.table_cells = n * k * widest * widest;

    auto distortion = [&](const Vars& v, std::size_t c) {
        const Recon& rc = recon[c];
        const Matrix& W = v[1 + c];
        double e = 0.0;
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t u = 0; u < k; ++u) {
                const double w = p[x] * v[0](x, u);
                if (w == 0.0) continue;
                for (std::size_t a = 0; a < rc.d->rows(); ++a) e += w * W(x * k + u, a) * (*rc.d)(a, lib.symbol(x, rc.source));
            }
        return e;
    };
    auto anchor_row = [&](const Recon& rc, std::size_t x) { return zero_letter(*rc.d, lib.symbol(x, rc.source)); };

    prog.repair = [&](Vars& v) {
        for (std::size_t c = 0; c < recon.size(); ++c) {
            const double t = mix_needed(distortion(v, c), recon[c].target);
            if (t <= 0.0) continue;
            Matrix& W = v[1 + c];
            for (std::size_t x = 0; x < n; ++x)
                for (std::size_t u = 0; u < k; ++u) {
                    for (std::size_t a = 0; a < W.cols(); ++a) W(x * k + u, a) *= 1.0 - t;
                    W(x * k + u, anchor_row(recon[c], x)) += t;
                }
        }
    };

    prog.terms = [&](const Vars& v, std::vector<double>& out) {
        for (std::size_t c = 0; c < recon.size(); ++c)
            if (!within(distortion(v, c), recon[c].target)) return false;
        out.clear();
        for (std::size_t i = 0; i < L1; ++i)
            for (std::size_t j = 0; j < L2; ++j) {
                const Matrix& Wa = v[1 + i];
                const Matrix& Wb = v[1 + L1 + j];
                const std::size_t na = Wa.cols(), nb = Wb.cols();
                JointTable t({n, k, na, nb});
                auto& q = t.pmf();
                for (std::size_t x = 0; x < n; ++x)
                    for (std::size_t u = 0; u < k; ++u) {
                        const double w = p[x] * v[0](x, u);
                        if (w == 0.0) continue;
                        for (std::size_t a = 0; a < na; ++a)
                            for (std::size_t b = 0; b < nb; ++b)
                                q[((x * k + u) * na + a) * nb + b] = w * Wa(x * k + u, a) * Wb(x * k + u, b);
                    }
                out.push_back(mi(t, 0b0001, 0b1110) - inst.cache);
                out.push_back(mi(t, 0b0011, 0b1000) + mi(t, 0b0001, 0b0100, 0b1010));
            }
        return true;
    };

    // starts: a few deterministic auxiliaries times lossless / RD-optimal reconstructions
    std::vector<Matrix> aux_starts;
    aux_starts.emplace_back(n, k, 0.0);
    for (std::size_t x = 0; x < n; ++x) aux_starts.back()(x, 0) = 1.0;
    for (std::size_t l = 0; l < lib.num_sources(); ++l) {
        Matrix U(n, k);
        for (std::size_t x = 0; x < n; ++x) U(x, lib.symbol(x, l) % k) = 1.0;
        aux_starts.push_back(std::move(U));
    }
    {
        Matrix U(n, k);
        for (std::size_t x = 0; x < n; ++x) U(x, x % k) = 1.0;
        aux_starts.push_back(std::move(U));
        Matrix V(n, k, 1.0 / static_cast<double>(k));
        aux_starts.push_back(std::move(V));
    }
    for (int mode = 0; mode < 2; ++mode) {
        std::vector<Matrix> rc_blocks;
        for (const Recon& rc : recon) {
            Matrix W(n * k, rc.d->rows());
            const Matrix rd = mode == 0 ? Matrix() : rd_rows(lib, *rc.d, rc.source, rc.target);
            for (std::size_t x = 0; x < n; ++x)
                for (std::size_t u = 0; u < k; ++u) {
                    if (mode == 0 || rc.target == 0.0) {
                        W(x * k + u, anchor_row(rc, x)) = 1.0;
                    } else {
                        for (std::size_t a = 0; a < W.cols(); ++a) W(x * k + u, a) = rd(lib.symbol(x, rc.source), a);
                    }
                }
            rc_blocks.push_back(std::move(W));
        }
        for (const Matrix& U : aux_starts) {
            Vars v{U};
            v.insert(v.end(), rc_blocks.begin(), rc_blocks.end());
            prog.starts.push_back(std::move(v));
        }
    }

    TwoUserBound out = Searcher(prog, opts).run();
    out.aux_size = k;
    return out;
}

TwoUserBound two_user_lower_genie(const TwoUserInstance& inst, const TwoUserGridOptions& opts) {
    const SourceLibrary& lib = inst.lib;
    check_size(lib, inst);
    const std::size_t n = lib.joint_size();
    const std::vector<double>& p = lib.pmf();
    const std::size_t L1 = inst.demands1.size(), L2 = inst.demands2.size();

    struct Recon {
        std::size_t source;
        const Matrix* d;
        double target;
    };
    std::vector<Recon> recon;
    std::vector<std::size_t> sizes;
    for (std::size_t l : inst.demands1) recon.push_back({l, &lib.distortion(l), inst.D[l]});
    for (std::size_t l : inst.demands2) recon.push_back({l, &inst.delta[l], inst.Delta[l]});
    for (const Recon& rc : recon) sizes.push_back(rc.d->rows());
    const ProductAlphabet A(sizes);
    if (A.total > kMaxOutcomes) throw Error(ErrorCode::InstanceTooLarge, "joint reconstruction alphabet above 256");

    Program prog;
    Matrix mask(n, A.total, 1.0);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t c = 0; c < recon.size(); ++c) {
            const auto ok = allowed_letters(*recon[c].d, lib.symbol(x, recon[c].source), recon[c].target);
            for (std::size_t o = 0; o < A.total; ++o)
                if (!ok[A.digit(o, c)]) mask(x, o) = 0.0;
        }
    prog.masks.push_back(mask);
    prog.table_cells = n * A.total;

    std::vector<std::size_t> anchor(n, 0);
    for (std::size_t x = 0; x < n; ++x) {
        std::size_t o = 0;
        for (std::size_t c = 0; c < recon.size(); ++c)
            o = o * sizes[c] + zero_letter(*recon[c].d, lib.symbol(x, recon[c].source));
        anchor[x] = o;
    }

    auto distortions = [&](const Vars& v) {
        std::vector<double> e(recon.size(), 0.0);
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t o = 0; o < A.total; ++o) {
                const double w = p[x] * v[0](x, o);
                if (w == 0.0) continue;
                for (std::size_t c = 0; c < recon.size(); ++c)
                    e[c] += w * (*recon[c].d)(A.digit(o, c), lib.symbol(x, recon[c].source));
            }
        return e;
    };
    prog.repair = [&](Vars& v) {
        const auto e = distortions(v);
        double t = 0.0;
        for (std::size_t c = 0; c < recon.size(); ++c) t = std::max(t, mix_needed(e[c], recon[c].target));
        if (t <= 0.0) return;
        for (std::size_t x = 0; x < n; ++x) {
            for (std::size_t o = 0; o < A.total; ++o) v[0](x, o) *= 1.0 - t;
            v[0](x, anchor[x]) += t;
        }
    };

    std::vector<std::size_t> dims{n};
    dims.insert(dims.end(), sizes.begin(), sizes.end());
    prog.terms = [&, dims](const Vars& v, std::vector<double>& out) {
        const auto e = distortions(v);
        for (std::size_t c = 0; c < recon.size(); ++c)
            if (!within(e[c], recon[c].target)) return false;
        JointTable t(dims);
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t o = 0; o < A.total; ++o) t.pmf()[x * A.total + o] = p[x] * v[0](x, o);
        out.clear();
        for (std::size_t i = 0; i < L1; ++i)
            for (std::size_t j = 0; j < L2; ++j) {
                const std::uint32_t xa = 1u << (1 + i), xb = 1u << (1 + L1 + j);
                out.push_back(mi(t, 1u, xb));
                out.push_back(mi(t, 1u, xa | xb) - inst.cache);
            }
        return true;
    };

    // starts: lossless, independent RD-optimal components
    {
        Matrix W(n, A.total);
        for (std::size_t x = 0; x < n; ++x) W(x, anchor[x]) = 1.0;
        prog.starts.push_back({W});
        std::vector<Matrix> rd;
        for (const Recon& rc : recon) rd.push_back(rd_rows(lib, *rc.d, rc.source, rc.target));
        Matrix R(n, A.total);
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t o = 0; o < A.total; ++o) {
                double w = 1.0;
                for (std::size_t c = 0; c < recon.size(); ++c) {
                    const std::size_t sx = lib.symbol(x, recon[c].source);
                    w *= recon[c].target == 0.0 ? (A.digit(o, c) == zero_letter(*recon[c].d, sx) ? 1.0 : 0.0)
                                                : rd[c](sx, A.digit(o, c));
                }
                R(x, o) = w;
            }
        prog.starts.push_back({R});
    }

    return Searcher(prog, opts).run();
}

TwoUserBound two_user_avg_lower(const TwoUserInstance& inst, const std::vector<double>& p_I,
                                const TwoUserGridOptions& opts) {
    const SourceLibrary& lib = inst.lib;
    check_size(lib, inst);
    const std::size_t n = lib.joint_size();
    const std::vector<double>& p = lib.pmf();
    const std::size_t L1 = inst.demands1.size(), L2 = inst.demands2.size();
    if (p_I.size() != L2) throw Error(ErrorCode::ShapeMismatch, "p_I needs one entry per user-2 demand");
    double mass = 0.0;
    for (double q : p_I) {
        if (!(q >= 0.0)) throw Error(ErrorCode::InvalidPmf, "p_I entries must be >= 0");
        mass += q;
    }
    if (std::abs(mass - 1.0) > 1e-9) throw Error(ErrorCode::InvalidPmf, "p_I must sum to one");
    for (std::size_t l : inst.demands2)
        if (inst.Delta[l] != 0.0) throw Error(ErrorCode::InvalidArgument, "average-demand bound needs lossless user 2");

    std::vector<std::size_t> sizes;
    for (std::size_t l : inst.demands1) sizes.push_back(lib.recon_size(l));
    const ProductAlphabet A(sizes);
    if (A.total * n * L2 > kMaxOutcomes) throw Error(ErrorCode::InstanceTooLarge, "auxiliary context above 256 rows");
    const std::size_t cap = n + 2 * L1;
    const std::size_t k = opts.aux_size ? opts.aux_size : std::min(cap, A.total + 1);
    if (k > cap) throw Error(ErrorCode::InstanceTooLarge, "auxiliary alphabet above |X̄| + 2 L1");

    // blocks: X̂ family given x̄; U given (x̂, x̄, i) at row (a * n + x) * L2 + i
    Program prog;
    Matrix mask(n, A.total, 1.0);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t c = 0; c < L1; ++c) {
            const std::size_t l = inst.demands1[c];
            const auto ok = allowed_letters(lib.distortion(l), lib.symbol(x, l), inst.D[l]);
            for (std::size_t o = 0; o < A.total; ++o)
                if (!ok[A.digit(o, c)]) mask(x, o) = 0.0;
        }
    prog.masks.push_back(mask);
    prog.masks.emplace_back(A.total * n * L2, k, 1.0);
    std::size_t widest_x = 1;
    for (std::size_t l : inst.demands2) widest_x = std::max(widest_x, lib.alphabet_size(l));
    prog.table_cells = n * widest_x * A.total * k;

    std::vector<std::size_t> anchor(n, 0);
    for (std::size_t x = 0; x < n; ++x) {
        std::size_t o = 0;
        for (std::size_t c = 0; c < L1; ++c) {
            const std::size_t l = inst.demands1[c];
            o = o * sizes[c] + zero_letter(lib.distortion(l), lib.symbol(x, l));
        }
        anchor[x] = o;
    }
    auto distortions = [&](const Vars& v) {
        std::vector<double> e(L1, 0.0);
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t o = 0; o < A.total; ++o) {
                const double w = p[x] * v[0](x, o);
                if (w == 0.0) continue;
                for (std::size_t c = 0; c < L1; ++c) {
                    const std::size_t l = inst.demands1[c];
                    e[c] += w * lib.distortion(l)(A.digit(o, c), lib.symbol(x, l));
                }
            }
        return e;
    };
    prog.repair = [&](Vars& v) {
        const auto e = distortions(v);
        double t = 0.0;
        for (std::size_t c = 0; c < L1; ++c) t = std::max(t, mix_needed(e[c], inst.D[inst.demands1[c]]));
        if (t <= 0.0) return;
        for (std::size_t x = 0; x < n; ++x) {
            for (std::size_t o = 0; o < A.total; ++o) v[0](x, o) *= 1.0 - t;
            v[0](x, anchor[x]) += t;
        }
    };

    std::vector<double> h_demand(L2);
    for (std::size_t i = 0; i < L2; ++i) h_demand[i] = entropy(lib.source_marginal(inst.demands2[i]));

    // variables: X̄ (bit 0), X_i (bit 1), X̂ components (bits 2..), U (last)
    const std::uint32_t ubit = 1u << (2 + L1);
    prog.terms = [&](const Vars& v, std::vector<double>& out) {
        const auto e = distortions(v);
        for (std::size_t c = 0; c < L1; ++c)
            if (!within(e[c], inst.D[inst.demands1[c]])) return false;
        std::vector<double> a_terms(L1, 0.0), b_terms(L1, 0.0);
        for (std::size_t i = 0; i < L2; ++i) {
            if (p_I[i] == 0.0) continue;
            const std::size_t l2 = inst.demands2[i];
            const std::size_t nx = lib.alphabet_size(l2);
            std::vector<std::size_t> dims{n, nx};
            dims.insert(dims.end(), sizes.begin(), sizes.end());
            dims.push_back(k);
            JointTable t(dims);
            for (std::size_t x = 0; x < n; ++x)
                for (std::size_t o = 0; o < A.total; ++o) {
                    const double w = p[x] * v[0](x, o);
                    if (w == 0.0) continue;
                    const std::size_t row = (o * n + x) * L2 + i;
                    for (std::size_t u = 0; u < k; ++u)
                        t.pmf()[((x * nx + lib.symbol(x, l2)) * A.total + o) * k + u] = w * v[1](row, u);
                }
            for (std::size_t c = 0; c < L1; ++c) {
                const std::uint32_t xa = 1u << (2 + c);
                a_terms[c] += p_I[i] * mi(t, 1u, ubit | xa | 2u);
                b_terms[c] += p_I[i] * (h_demand[i] + mi(t, 1u, xa, ubit | 2u));
            }
        }
        out.clear();
        for (std::size_t c = 0; c < L1; ++c) {
            out.push_back(a_terms[c] - inst.cache);
            out.push_back(b_terms[c]);
        }
        return true;
    };

    // starts: X̂ lossless or RD-optimal; U constant, U = X̂ family, U = X̄
    std::vector<Matrix> recon_starts;
    {
        Matrix W(n, A.total);
        for (std::size_t x = 0; x < n; ++x) W(x, anchor[x]) = 1.0;
        recon_starts.push_back(W);
        std::vector<Matrix> rd;
        for (std::size_t l : inst.demands1) rd.push_back(rd_rows(lib, lib.distortion(l), l, inst.D[l]));
        Matrix R(n, A.total);
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t o = 0; o < A.total; ++o) {
                double w = 1.0;
                for (std::size_t c = 0; c < L1; ++c) {
                    const std::size_t l = inst.demands1[c];
                    const std::size_t sx = lib.symbol(x, l);
                    w *= inst.D[l] == 0.0 ? (A.digit(o, c) == zero_letter(lib.distortion(l), sx) ? 1.0 : 0.0)
                                          : rd[c](sx, A.digit(o, c));
                }
                R(x, o) = w;
            }
        recon_starts.push_back(R);
    }
    const std::size_t rows = A.total * n * L2;
    std::vector<Matrix> aux_starts;
    for (int mode = 0; mode < 3; ++mode) {
        Matrix U(rows, k);
        for (std::size_t o = 0; o < A.total; ++o)
            for (std::size_t x = 0; x < n; ++x)
                for (std::size_t i = 0; i < L2; ++i) {
                    const std::size_t u = mode == 0 ? 0 : (mode == 1 ? o % k : x % k);
                    U((o * n + x) * L2 + i, u) = 1.0;
                }
        aux_starts.push_back(std::move(U));
    }
    for (const Matrix& W : recon_starts)
        for (const Matrix& U : aux_starts) prog.starts.push_back({W, U});

    TwoUserBound out = Searcher(prog, opts).run();
    out.aux_size = k;
    return out;
}

TwoUserDsbsBounds two_user_dsbs_bounds(double rho, double D, double C) {
    if (!(rho >= 0.0 && rho <= 0.5)) throw Error(ErrorCode::RhoOutOfRange, "rho must lie in [0, 1/2]");
    if (!(D >= 0.0 && D <= 0.5)) throw Error(ErrorCode::InvalidArgument, "D must lie in [0, 1/2]");
    if (!(C >= 0.0) || !std::isfinite(C)) throw Error(ErrorCode::InvalidCache, "cache must be finite and >= 0");
    TwoUserDsbsBounds b;
    b.d_star = 0.5 * (1.0 - std::sqrt(1.0 - 2.0 * rho));
    b.lower = 1.0 + std::max(0.0, binary_entropy(rho) - binary_entropy(D) - C);
    b.exact = D <= b.d_star;
    if (b.exact) {
        b.upper = b.lower;
    } else {
        const double inner = std::clamp((2.0 * D - rho) / (2.0 * (1.0 - rho)), 0.0, 1.0);
        b.upper = 1.0 + std::max(0.0, binary_entropy(D) - rho - (1.0 - rho) * binary_entropy(inner) - C);
    }
    return b;
}

double two_user_lossless_lower(const SourceLibrary& lib, const std::vector<std::size_t>& demands1,
                               const std::vector<std::size_t>& demands2, double C) {
    if (demands1.empty() || demands2.empty()) throw Error(ErrorCode::EmptySubset, "demand sets must be nonempty");
    double best = 0.0;
    for (std::size_t a : demands1)
        for (std::size_t b : demands2) {
            if (a >= lib.num_sources() || b >= lib.num_sources())
                throw Error(ErrorCode::IndexOutOfRange, "demand out of range");
            const std::vector<std::size_t> one{b};
            std::vector<std::size_t> pair{std::min(a, b), std::max(a, b)};
            if (a == b) pair.pop_back();
            best = std::max({best, entropy(marginal(lib, one)), entropy(marginal(lib, pair)) - C});
        }
    return best;
}

}  // namespace rdcache
