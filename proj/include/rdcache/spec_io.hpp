#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rdcache/f_separable.hpp"
#include "rdcache/source_model.hpp"

namespace rdcache {

/// Optional two-user section of a source spec (0-based source indices).
struct TwoUserSpec {
    std::vector<std::size_t> demands1;
    std::vector<std::size_t> demands2;
    std::vector<Matrix> delta;       // empty entries: Hamming
    std::vector<double> D;           // empty: taken from the command line
    std::vector<double> Delta;       // empty: zeros
    std::vector<double> p_I;         // empty: uniform over demands2
};

/// Parsed source spec. Either a discrete library or a Gaussian template
/// ({"gaussian": {"rho": r}}) used by the closed-form commands.
struct SourceSpec {
    std::optional<SourceLibrary> library;
    std::vector<DistortionTransform> transforms;  // empty: identity everywhere
    std::optional<double> gaussian_rho;
    std::optional<TwoUserSpec> two_user;
};

/// JSON keys: alphabet_sizes, pmf (row-major), recon_alphabet_sizes,
/// distortions (per source: "hamming", a flat row-major list, or a list of
/// rows), d_max, f (per source: {"kind", "params"}), two_user, gaussian.
/// Malformed input raises Error(ConfigError); library validation errors
/// keep their own codes.
SourceSpec parse_source_spec(const std::string& json_text);
SourceSpec load_source_spec(const std::string& path);

DistortionTransform parse_transform(const std::string& json_text);

}  // namespace rdcache
