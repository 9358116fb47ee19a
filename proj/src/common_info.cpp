#include "rdcache/common_info.hpp"

#include <algorithm>
#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/connected_components.hpp>
#include <cmath>
#include <limits>

#include "rdcache/closed_forms.hpp"
#include "rdcache/error.hpp"
#include "rdcache/rate_distortion.hpp"
#include "rdcache/rdc_solver.hpp"

namespace rdcache {

CommonPartGraph common_part_graph(const SourceLibrary& lib, double mass_threshold) {
    const std::size_t L = lib.num_sources();
    std::vector<std::size_t> offset(L + 1, 0);
    for (std::size_t l = 0; l < L; ++l) offset[l + 1] = offset[l] + lib.alphabet_size(l);

    using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::undirectedS>;
    Graph g(offset[L]);
    for (std::size_t x = 0; x < lib.joint_size(); ++x) {
        if (!(lib.pmf()[x] > mass_threshold)) continue;
        // a path through the L symbols connects all of them
        for (std::size_t l = 0; l + 1 < L; ++l)
            boost::add_edge(offset[l] + lib.symbol(x, l), offset[l + 1] + lib.symbol(x, l + 1), g);
    }
    std::vector<std::size_t> comp(offset[L]);
    CommonPartGraph out;
    out.num_components = static_cast<std::size_t>(boost::connected_components(g, comp.data()));
    out.component.resize(L);
    for (std::size_t l = 0; l < L; ++l)
        out.component[l].assign(comp.begin() + static_cast<std::ptrdiff_t>(offset[l]),
                                comp.begin() + static_cast<std::ptrdiff_t>(offset[l + 1]));
    return out;
}

CommonInfoResult gacs_korner_zero(const SourceLibrary& lib) {
    CommonInfoResult res;
    res.graph = common_part_graph(lib);
    std::vector<double> q(res.graph.num_components, 0.0);
    const auto p1 = lib.source_marginal(0);
    for (std::size_t x = 0; x < p1.size(); ++x) q[res.graph.component[0][x]] += p1[x];
    res.value = entropy_unchecked(q);
    return res;
}

GKCandidate make_gk_candidate(const SourceLibrary& lib, const Matrix& aux,
                              const std::vector<Matrix>& recon_channels) {
    const std::size_t L = lib.num_sources();
    const std::size_t k = aux.cols();
    if (aux.rows() != lib.joint_size() || recon_channels.size() != L) {
        throw Error(ErrorCode::ShapeMismatch, "candidate shapes do not match the library");
    }
    std::vector<std::size_t> dims(lib.alphabet_sizes());
    dims.push_back(k);
    for (std::size_t l = 0; l < L; ++l) {
        if (recon_channels[l].rows() != lib.alphabet_size(l) * k || recon_channels[l].cols() != lib.recon_size(l)) {
            throw Error(ErrorCode::ShapeMismatch, "reconstruction channel shape");
        }
        dims.push_back(lib.recon_size(l));
    }
    JointTable t(dims);
    std::size_t recon_total = 1;
    for (std::size_t l = 0; l < L; ++l) recon_total *= lib.recon_size(l);
    for (std::size_t x = 0; x < lib.joint_size(); ++x) {
        for (std::size_t u = 0; u < k; ++u) {
            const double pxu = lib.pmf()[x] * aux(x, u);
            if (pxu == 0.0) continue;
            for (std::size_t r = 0; r < recon_total; ++r) {
                double m = pxu;
                std::size_t rest = r;
                for (std::size_t l = L; l-- > 0;) {
                    const std::size_t xh = rest % lib.recon_size(l);
                    rest /= lib.recon_size(l);
                    m *= recon_channels[l](lib.symbol(x, l) * k + u, xh);
                }
                t.pmf()[(x * k + u) * recon_total + r] = m;
            }
        }
    }
    return {std::move(t)};
}

namespace {

// Total variation between p(a,b,c) and p(a|b) p(b,c) over variable masks.
double markov_gap(const JointTable& t, std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    const auto& dims = t.dims();
    const std::size_t nv = dims.size();
    auto size_of = [&](std::uint32_t m) {
        std::size_t s = 1;
        for (std::size_t v = 0; v < nv; ++v)
            if (m & (1u << v)) s *= dims[v];
        return s;
    };
    const auto pabc = t.marginal(a | b | c);
    const auto pab = t.marginal(a | b);
    const auto pbc = t.marginal(b | c);
    const auto pb = t.marginal(b);
    // index of a sub-mask value inside the marginal of `m`
    auto project = [&](const std::vector<std::size_t>& vals, std::uint32_t m) {
        std::size_t idx = 0;
        for (std::size_t v = 0; v < nv; ++v)
            if (m & (1u << v)) idx = idx * dims[v] + vals[v];
        return idx;
    };
    const std::uint32_t all = a | b | c;
    std::vector<std::size_t> vals(nv, 0);
    double tv = 0.0;
    const std::size_t total = size_of(all);
    for (std::size_t j = 0; j < total; ++j) {
        std::size_t rest = j;
        for (std::size_t v = nv; v-- > 0;)
            if (all & (1u << v)) {
                vals[v] = rest % dims[v];
                rest /= dims[v];
            }
        const double b_mass = pb[project(vals, b)];
        const double factored = b_mass > 0.0 ? pab[project(vals, a | b)] * pbc[project(vals, b | c)] / b_mass : 0.0;
        tv += std::abs(pabc[project(vals, all)] - factored);
    }
    return 0.5 * tv;
}

}  // namespace

GKCheckReport gacs_korner_lossy_report(const SourceLibrary& lib, const DistortionTuple& D,
                                       const GKCandidate& candidate, double tol) {
    const std::size_t L = lib.num_sources();
    if (D.size() != L) throw Error(ErrorCode::ShapeMismatch, "distortion tuple length must equal L");
    const auto& t = candidate.joint;
    if (t.dims().size() != 2 * L + 1) throw Error(ErrorCode::ShapeMismatch, "candidate must hold 2L+1 variables");
    const std::uint32_t u_mask = 1u << L;
    std::uint32_t sources = 0;
    for (std::size_t l = 0; l < L; ++l) sources |= 1u << l;

    GKCheckReport rep;
    rep.value = t.mutual_information(sources, u_mask);
    for (std::size_t l = 0; l < L; ++l) {
        const std::uint32_t xl = 1u << l;
        const std::uint32_t xh = 1u << (L + 1 + l);
        const std::string tag = " (source " + std::to_string(l) + ")";
        if (markov_gap(t, u_mask, xl, sources & ~xl) > tol) rep.violations.push_back("(i) U - X_l - X_rest" + tag);
        if (markov_gap(t, u_mask, xh, xl) > tol) rep.violations.push_back("(ii) U - X̂_l - X_l" + tag);
        const auto pxx = t.marginal(xl | xh);  // index x * |X̂| + x̂
        double dist = 0.0;
        Matrix joint(lib.alphabet_size(l), lib.recon_size(l));
        for (std::size_t x = 0; x < lib.alphabet_size(l); ++x)
            for (std::size_t r = 0; r < lib.recon_size(l); ++r) {
                const double m = pxx[x * lib.recon_size(l) + r];
                joint(x, r) = m;
                dist += m * lib.distortion(l)(r, x);
            }
        if (dist > D[l] + tol) rep.violations.push_back("(iii) distortion" + tag);
        const double rd = rd_function(lib.source_marginal(l), lib.distortion(l), D[l]).rate;
        if (std::abs(mutual_information_unchecked(joint) - rd) > tol) rep.violations.push_back("(iv) RD equality" + tag);
    }
    rep.feasible = rep.violations.empty();
    return rep;
}

GKCheckReport gacs_korner_lossy_check(const SourceLibrary& lib, const DistortionTuple& D,
                                      const GKCandidate& candidate, double tol) {
    GKCheckReport rep = gacs_korner_lossy_report(lib, D, candidate, tol);
    if (!rep.feasible) {
        std::string msg;
        for (const auto& v : rep.violations) msg += (msg.empty() ? "" : "; ") + v;
        throw Error(ErrorCode::ConditionViolated, msg);
    }
    return rep;
}

double wyner_ci_dsbs(double rho) {
    const double rs = dsbs_rho_star(rho);
    return std::max(0.0, 1.0 + binary_entropy(rho) - 2.0 * binary_entropy(rs));
}

double wyner_ci_gaussian(double rho) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw Error(ErrorCode::RhoOutOfRange, "correlation must lie in [0,1]");
    if (rho >= 1.0 - 1e-12) return std::numeric_limits<double>::infinity();
    return 0.5 * std::log2((1.0 + rho) / (1.0 - rho));
}

KgkCgReport kgk_vs_cg_check(const SourceLibrary& lib, const DistortionTuple& D, const RDCOptions& opts,
                            int grid_points, double tol) {
    for (std::size_t l = 0; l < lib.num_sources(); ++l) {
        const Matrix& d = lib.distortion(l);
        if (D[l] != 0.0 || d.rows() != d.cols() || !(d == hamming_matrix(d.rows()))) {
            throw Error(ErrorCode::InvalidArgument, "only the zero-distortion Hamming case is supported");
        }
    }
    KgkCgReport rep;
    rep.k_gk = gacs_korner_zero(lib).value;
    std::vector<double> h;
    for (std::size_t l = 0; l < lib.num_sources(); ++l) h.push_back(entropy_unchecked(lib.source_marginal(l)));
    const double hmax = *std::max_element(h.begin(), h.end());
    const double hmin = *std::min_element(h.begin(), h.end());
    std::vector<double> grid;
    for (int i = 0; i < grid_points; ++i) grid.push_back(hmax * i / std::max(1, grid_points - 1));
    const TradeoffCurve curve = rdc_curve(lib, D, grid, opts);
    rep.c_g = critical_capacity_genie(lib, D, curve, opts);
    rep.inequality_holds = rep.c_g >= rep.k_gk - tol;
    rep.marginal_rates_equal = hmax - hmin <= 1e-9;
    rep.equality_holds = std::abs(rep.c_g - rep.k_gk) <= tol;
    return rep;
}

}  // namespace rdcache
