#include "rdcache/spec_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rdcache/error.hpp"

namespace rdcache {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

template <class T>
std::vector<T> read_list(const json& j, const char* key) {
    if (!j.is_array()) config_error(std::string("'") + key + "' must be an array");
    try {
        return j.get<std::vector<T>>();
    } catch (const json::exception&) {
        config_error(std::string("'") + key + "' has entries of the wrong type");
    }
}

Matrix read_matrix(const json& j, std::size_t rows, std::size_t cols, const char* key) {
    if (j.is_string()) {
        if (j.get<std::string>() != "hamming") config_error(std::string(key) + ": unknown matrix name");
        return Matrix();
    }
    if (!j.is_array()) config_error(std::string(key) + ": matrix must be \"hamming\" or an array");
    std::vector<double> flat;
    if (!j.empty() && j.front().is_array()) {
        for (const json& row : j) {
            const auto r = read_list<double>(row, key);
            if (r.size() != cols) config_error(std::string(key) + ": row length differs from the source alphabet");
            flat.insert(flat.end(), r.begin(), r.end());
        }
    } else {
        flat = read_list<double>(j, key);
    }
    if (rows == 0) rows = cols ? flat.size() / cols : 0;
    if (flat.size() != rows * cols) config_error(std::string(key) + ": matrix has the wrong number of entries");
    return Matrix(rows, cols, std::move(flat));
}

DistortionTransform transform_from(const json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        config_error("transform needs a string 'kind'");
    const std::string kind = j["kind"].get<std::string>();
    const json params = j.value("params", json());
    auto scalar = [&](const char* name) {
        if (params.is_number()) return params.get<double>();
        if (params.is_object() && params.contains(name) && params[name].is_number()) return params[name].get<double>();
        config_error("transform '" + kind + "' needs a numeric parameter '" + name + "'");
    };
    if (kind == "identity") return DistortionTransform::identity();
    if (kind == "power") return DistortionTransform::power(scalar("exponent"));
    if (kind == "exp") return DistortionTransform::exp(scalar("scale"));
    if (kind == "table") {
        if (!params.is_object() || !params.contains("x") || !params.contains("y"))
            config_error("table transform needs params {x: [...], y: [...]}");
        return DistortionTransform::table(read_list<double>(params["x"], "x"), read_list<double>(params["y"], "y"));
    }
    config_error("unknown transform kind '" + kind + "'");
}

std::vector<std::size_t> read_indices(const json& j, const char* key) { return read_list<std::size_t>(j, key); }

}  // namespace

DistortionTransform parse_transform(const std::string& json_text) {
    try {
        return transform_from(json::parse(json_text));
    } catch (const json::parse_error& e) {
        config_error(std::string("invalid JSON: ") + e.what());
    }
}

SourceSpec parse_source_spec(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        config_error(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) config_error("spec must be a JSON object");

    SourceSpec spec;
    if (j.contains("gaussian")) {
        const json& g = j["gaussian"];
        if (!g.is_object() || !g.contains("rho") || !g["rho"].is_number()) config_error("gaussian needs a numeric 'rho'");
        spec.gaussian_rho = g["rho"].get<double>();
    }
    if (!j.contains("alphabet_sizes")) {
        if (!spec.gaussian_rho) config_error("spec needs 'alphabet_sizes' and 'pmf'");
        return spec;
    }
    if (!j.contains("pmf")) config_error("spec needs 'pmf'");

    RawSource raw;
    raw.alphabet_sizes = read_list<std::size_t>(j["alphabet_sizes"], "alphabet_sizes");
    raw.pmf = read_list<double>(j["pmf"], "pmf");
    if (j.contains("recon_alphabet_sizes"))
        raw.recon_alphabet_sizes = read_list<std::size_t>(j["recon_alphabet_sizes"], "recon_alphabet_sizes");
    const std::size_t L = raw.alphabet_sizes.size();
    const auto recon = [&](std::size_t l) {
        return raw.recon_alphabet_sizes.empty() ? raw.alphabet_sizes[l] : raw.recon_alphabet_sizes.at(l);
    };
    if (!raw.recon_alphabet_sizes.empty() && raw.recon_alphabet_sizes.size() != L)
        config_error("'recon_alphabet_sizes' needs one entry per source");
    if (j.contains("distortions")) {
        const json& d = j["distortions"];
        if (d.is_string()) {
            raw.distortions.assign(L, read_matrix(d, 0, 0, "distortions"));
        } else {
            if (!d.is_array() || d.size() != L) config_error("'distortions' needs one entry per source");
            for (std::size_t l = 0; l < L; ++l)
                raw.distortions.push_back(read_matrix(d[l], recon(l), raw.alphabet_sizes[l], "distortions"));
        }
    }
    if (j.contains("d_max")) {
        if (!j["d_max"].is_number()) config_error("'d_max' must be a number");
        raw.d_max = j["d_max"].get<double>();
    }
    spec.library = validate_library(raw);

    if (j.contains("f")) {
        const json& f = j["f"];
        if (!f.is_array() || f.size() != L) config_error("'f' needs one transform per source");
        for (const json& t : f) spec.transforms.push_back(transform_from(t));
    }

    if (j.contains("two_user")) {
        const json& t = j["two_user"];
        if (!t.is_object() || !t.contains("demands1") || !t.contains("demands2"))
            config_error("two_user needs 'demands1' and 'demands2'");
        TwoUserSpec tu;
        tu.demands1 = read_indices(t["demands1"], "demands1");
        tu.demands2 = read_indices(t["demands2"], "demands2");
        if (t.contains("delta")) {
            const json& d = t["delta"];
            if (!d.is_array() || d.size() != L) config_error("two_user.delta needs one entry per source");
            for (std::size_t l = 0; l < L; ++l) tu.delta.push_back(read_matrix(d[l], 0, raw.alphabet_sizes[l], "delta"));
        }
        if (t.contains("D")) tu.D = read_list<double>(t["D"], "D");
        if (t.contains("Delta")) tu.Delta = read_list<double>(t["Delta"], "Delta");
        if (t.contains("p_I")) tu.p_I = read_list<double>(t["p_I"], "p_I");
        spec.two_user = std::move(tu);
    }
    return spec;
}

SourceSpec load_source_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot open spec file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_source_spec(ss.str());
}

}  // namespace rdcache
