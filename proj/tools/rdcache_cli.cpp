// Command-line front end: emits plot-ready CSV or JSON tables.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rdcache/closed_forms.hpp"
#include "rdcache/common_info.hpp"
#include "rdcache/error.hpp"
#include "rdcache/f_separable.hpp"
#include "rdcache/rate_distortion.hpp"
#include "rdcache/rdc_solver.hpp"
#include "rdcache/spec_io.hpp"
#include "rdcache/two_user.hpp"

#ifndef RDCACHE_VERSION
#define RDCACHE_VERSION "0.0.0"
#endif

using namespace rdcache;
using nlohmann::json;

namespace {

constexpr int kConfigError = 2;

struct Config {
    std::string spec_path;
    std::string d_list;
    std::string c_grid;
    std::string format = "csv";
    std::string out;
    std::uint64_t seed = 0;
    int restarts = 20;
    std::size_t aux_cap = 0;
    int grid_steps = 16;
    std::size_t source = 0;
    double rho = 0.1;
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;
};

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

std::vector<double> parse_list(const std::string& text, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            config_error(std::string(flag) + ": cannot parse '" + item + "'");
        }
    }
    if (out.empty()) config_error(std::string(flag) + " needs at least one value");
    return out;
}

// start:stop:steps gives steps + 1 evenly spaced values (steps >= 1).
std::vector<double> parse_grid(const std::string& text) {
    std::stringstream ss(text);
    std::string a, b, c;
    if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c))
        config_error("--C-grid must look like start:stop:steps");
    double lo = 0.0, hi = 0.0;
    long steps = 0;
    try {
        lo = std::stod(a);
        hi = std::stod(b);
        steps = std::stol(c);
    } catch (const std::exception&) {
        config_error("--C-grid must look like start:stop:steps");
    }
    if (steps < 1) config_error("--C-grid needs steps >= 1");
    if (!(hi >= lo) || lo < 0.0) config_error("--C-grid needs 0 <= start <= stop");
    std::vector<double> out;
    for (long i = 0; i <= steps; ++i) out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps));
    return out;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot open spec file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_hash(const std::string& command, const Config& c) {
    std::ostringstream os;
    os << command << '|' << c.d_list << '|' << c.c_grid << '|' << c.seed << '|' << c.restarts << '|' << c.aux_cap << '|'
       << c.grid_steps << '|' << c.source << '|' << c.rho << '|';
    if (!c.spec_path.empty()) os << read_file(c.spec_path);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(os.str())));
    return buf;
}

std::string csv_cell(const json& v) {
    if (v.is_null()) return "nan";
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v.get<double>());
    return buf;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(); }

void emit(const Table& t, const std::string& command, const Config& c, std::ostream& os) {
    const std::string hash = config_hash(command, c);
    if (c.format == "json") {
        json doc;
        doc["meta"] = {{"tool", "rdcache"}, {"version", RDCACHE_VERSION}, {"command", command},
                       {"config_hash", hash}, {"seed", c.seed}};
        doc["columns"] = t.columns;
        doc["rows"] = t.rows;
        os << doc.dump(2) << '\n';
        return;
    }
    os << "# rdcache " << RDCACHE_VERSION << " command=" << command << " config_hash=" << hash << " seed=" << c.seed
       << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
        os << '\n';
    }
}

SourceSpec require_library(const Config& c) {
    if (c.spec_path.empty()) config_error("--spec is required");
    SourceSpec spec = load_source_spec(c.spec_path);
    if (!spec.library) config_error("spec has no discrete library");
    return spec;
}

DistortionTuple targets_for(const SourceLibrary& lib, const std::vector<double>& values) {
    if (values.size() == 1) return DistortionTuple::uniform(lib.num_sources(), values[0]);
    if (values.size() != lib.num_sources()) config_error("--D needs one value or one per source");
    return DistortionTuple(values);
}

RDCOptions solver_options(const Config& c) {
    RDCOptions o;
    o.seed = c.seed;
    o.restarts = c.restarts;
    o.aux_cap = c.aux_cap;
    return o;
}

// DSBS parameter when the library is a DSBS with Hamming distortions.
std::optional<double> dsbs_rho(const SourceLibrary& lib) {
    if (lib.alphabet_sizes() != std::vector<std::size_t>{2, 2}) return std::nullopt;
    const auto& p = lib.pmf();
    if (std::abs(p[0] - p[3]) > 1e-12 || std::abs(p[1] - p[2]) > 1e-12 || std::abs(p[0] + p[1] - 0.5) > 1e-12)
        return std::nullopt;
    for (std::size_t l = 0; l < 2; ++l)
        if (lib.distortion(l) != hamming_matrix(2)) return std::nullopt;
    return 2.0 * p[1];
}

Table cmd_rd(const Config& c) {
    const SourceSpec spec = require_library(c);
    const SourceLibrary& lib = *spec.library;
    if (c.source >= lib.num_sources()) config_error("--source out of range");
    Table t{{"D", "R", "converged"}, {}};
    BAOptions ba;
    ba.strict = false;
    for (double D : parse_list(c.d_list, "--D")) {
        if (D < 0.0) config_error("--D values must be >= 0");
        const RDResult r = rd_function(lib.source_marginal(c.source), lib.distortion(c.source), D, ba);
        t.rows.push_back({D, r.rate, r.converged});
    }
    return t;
}

Table cmd_rdc(const Config& c) {
    const SourceSpec spec = require_library(c);
    SourceLibrary lib = *spec.library;
    DistortionTuple D = targets_for(lib, parse_list(c.d_list, "--D"));
    if (!spec.transforms.empty()) {
        lib = transformed_library(lib, spec.transforms);
        D = transformed_targets(D, spec.transforms);
    }
    const TradeoffCurve curve = rdc_curve(lib, D, parse_grid(c.c_grid), solver_options(c));
    Table t{{"C", "R_solver", "R_genie", "R_superuser", "R_supergenie", "R_envelope", "witness_aux_size", "cache_used",
             "converged"},
            {}};
    for (const CurvePoint& p : curve.points)
        t.rows.push_back({p.cache, p.rate_raw, p.genie, p.superuser, p.super_genie, p.rate_envelope, p.witness_aux_size,
                          p.cache_used, p.converged});
    return t;
}

Table cmd_common_info(const Config& c) {
    if (c.spec_path.empty()) config_error("--spec is required");
    const SourceSpec spec = load_source_spec(c.spec_path);
    Table t{{"quantity", "value"}, {}};
    if (spec.library) {
        const SourceLibrary& lib = *spec.library;
        const CommonInfoResult gk = gacs_korner_zero(lib);
        t.rows.push_back({"K_GK", gk.value});
        t.rows.push_back({"components", gk.graph.num_components});
        for (std::size_t l = 0; l < lib.num_sources(); ++l)
            for (std::size_t x = 0; x < lib.alphabet_size(l); ++x)
                t.rows.push_back({"component[" + std::to_string(l) + "][" + std::to_string(x) + "]",
                                  gk.graph.component[l][x]});
        if (const auto rho = dsbs_rho(lib)) {
            t.rows.push_back({"dsbs_rho", *rho});
            t.rows.push_back({"K_W_dsbs", wyner_ci_dsbs(*rho)});
        }
    }
    if (spec.gaussian_rho) {
        t.rows.push_back({"gaussian_rho", *spec.gaussian_rho});
        t.rows.push_back({"K_W_gaussian", number(wyner_ci_gaussian(*spec.gaussian_rho))});
    }
    return t;
}

Table cmd_dsbs(const Config& c) {
    Table t{{"C", "lower", "upper", "exact"}, {}};
    for (double C : parse_grid(c.c_grid)) {
        const DsbsBounds b = dsbs_rdc_bounds(c.rho, C);
        t.rows.push_back({C, b.lower, b.upper, b.exact});
    }
    return t;
}

const char* region_name(GaussianRegion r) {
    switch (r) {
        case GaussianRegion::S1: return "S1";
        case GaussianRegion::S2: return "S2";
        case GaussianRegion::S3: return "S3";
        case GaussianRegion::S4: return "S4";
    }
    return "?";
}

Table cmd_gaussian(const Config& c) {
    Table t{{"D", "C", "region", "rate_or_upper", "superuser_lower", "exact"}, {}};
    const Matrix cov(2, 2, std::vector<double>{1.0, c.rho, c.rho, 1.0});
    for (double D : parse_list(c.d_list, "--D"))
        for (double C : parse_grid(c.c_grid)) {
            const GaussianRDC g = bivariate_gaussian_rdc(c.rho, D, C);
            const GaussianLowerBound lb = gaussian_superuser_lower(cov, D, C);
            t.rows.push_back({D, C, region_name(g.tag.region), g.rate, lb.clamped, g.tag.exact});
        }
    return t;
}

Table cmd_two_user(const Config& c) {
    const SourceSpec spec = require_library(c);
    if (!spec.two_user) config_error("spec has no two_user section");
    const SourceLibrary& lib = *spec.library;
    const TwoUserSpec& tu = *spec.two_user;
    const std::size_t L = lib.num_sources();

    std::vector<double> dvals = tu.D;
    if (dvals.empty()) {
        if (c.d_list.empty()) config_error("two-user run needs D in the spec or --D");
        dvals = parse_list(c.d_list, "--D");
    }
    const DistortionTuple D = targets_for(lib, dvals);
    const DistortionTuple Delta = tu.Delta.empty() ? DistortionTuple::zeros(L) : targets_for(lib, tu.Delta);

    TwoUserGridOptions opts;
    opts.grid_steps = c.grid_steps;
    opts.aux_size = c.aux_cap;
    opts.seed = c.seed;

    bool lossless2 = true;
    for (std::size_t l : tu.demands2) lossless2 = lossless2 && Delta[l] == 0.0;
    std::vector<double> p_I = tu.p_I;
    if (p_I.empty()) p_I.assign(tu.demands2.size(), 1.0 / static_cast<double>(tu.demands2.size()));

    const auto rho = dsbs_rho(lib);
    const bool dsbs_case = rho && lossless2 && D[0] == D[1] && D[0] <= 0.5 &&
                           tu.demands1 == std::vector<std::size_t>{0, 1} && tu.demands2 == std::vector<std::size_t>{0, 1};

    Table t{{"C", "lower_genie", "lower_avg", "upper"}, {}};
    if (dsbs_case) {
        t.columns.push_back("dsbs_lower");
        t.columns.push_back("dsbs_upper");
    }
    for (double C : parse_grid(c.c_grid)) {
        const TwoUserInstance inst = make_two_user_instance(lib, tu.demands1, tu.demands2, D, Delta, C, tu.delta);
        std::vector<json> row{C, two_user_lower_genie(inst, opts).value};
        row.push_back(lossless2 ? number(two_user_avg_lower(inst, p_I, opts).value) : json());
        row.push_back(two_user_upper(inst, opts).value);
        if (dsbs_case) {
            const TwoUserDsbsBounds b = two_user_dsbs_bounds(*rho, D[0], C);
            row.push_back(b.lower);
            row.push_back(b.upper);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rate-distortion-cache tradeoffs, bounds and common information"};
    app.require_subcommand(1);
    app.set_version_flag("--version", RDCACHE_VERSION);
    Config cfg;

    auto add_output = [&](CLI::App* s) {
        s->add_option("--format", cfg.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        s->add_option("--out", cfg.out, "output file (default stdout)");
        s->add_option("--seed", cfg.seed, "random seed");
    };

    auto* rd = app.add_subcommand("rd", "marginal rate-distortion sweep of one source");
    rd->add_option("--spec", cfg.spec_path, "source spec (JSON)")->required();
    rd->add_option("--source", cfg.source, "0-based source index");
    rd->add_option("--D", cfg.d_list, "comma-separated distortion values")->required();
    add_output(rd);

    auto* rdc = app.add_subcommand("rdc", "RDC curve with genie, superuser and super-genie bounds");
    rdc->add_option("--spec", cfg.spec_path, "source spec (JSON)")->required();
    rdc->add_option("--D", cfg.d_list, "one target, or one per source")->required();
    rdc->add_option("--C-grid", cfg.c_grid, "start:stop:steps")->required();
    rdc->add_option("--restarts", cfg.restarts, "random starts per point")->check(CLI::NonNegativeNumber);
    rdc->add_option("--aux-cap", cfg.aux_cap, "auxiliary alphabet cap (0: default size)");
    add_output(rdc);

    auto* ci = app.add_subcommand("common-info", "Gacs-Korner components and Wyner closed forms");
    ci->add_option("--spec", cfg.spec_path, "source spec (JSON)")->required();
    add_output(ci);

    auto* dsbs = app.add_subcommand("dsbs", "closed-form DSBS lossless bounds");
    dsbs->add_option("--rho", cfg.rho, "crossover probability in [0, 1/2]");
    dsbs->add_option("--C-grid", cfg.c_grid, "start:stop:steps")->required();
    add_output(dsbs);

    auto* gauss = app.add_subcommand("gaussian", "bivariate Gaussian RDC and superuser lower bound");
    gauss->add_option("--rho", cfg.rho, "correlation in (0, 1)");
    gauss->add_option("--D", cfg.d_list, "comma-separated distortion values")->required();
    gauss->add_option("--C-grid", cfg.c_grid, "start:stop:steps")->required();
    add_output(gauss);

    auto* two = app.add_subcommand("two-user", "two-user genie, average-demand and achievable bounds");
    two->add_option("--spec", cfg.spec_path, "source spec with a two_user section")->required();
    two->add_option("--D", cfg.d_list, "user-1 targets when the spec has none");
    two->add_option("--C-grid", cfg.c_grid, "start:stop:steps")->required();
    two->add_option("--grid-steps", cfg.grid_steps, "lattice resolution 1/N")->check(CLI::PositiveNumber);
    two->add_option("--aux-cap", cfg.aux_cap, "auxiliary alphabet size (0: default)");
    add_output(two);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        Table table;
        std::string command;
        for (CLI::App* sub : app.get_subcommands()) command = sub->get_name();
        if (command == "rd") table = cmd_rd(cfg);
        else if (command == "rdc") table = cmd_rdc(cfg);
        else if (command == "common-info") table = cmd_common_info(cfg);
        else if (command == "dsbs") table = cmd_dsbs(cfg);
        else if (command == "gaussian") table = cmd_gaussian(cfg);
        else table = cmd_two_user(cfg);

        if (cfg.out.empty()) {
            emit(table, command, cfg, std::cout);
        } else {
            std::ofstream out(cfg.out);
            if (!out) config_error("cannot write '" + cfg.out + "'");
            emit(table, command, cfg, out);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::NoConvergence ? 1 : kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
