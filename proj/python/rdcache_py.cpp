#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rdcache/closed_forms.hpp"
#include "rdcache/common_info.hpp"
#include "rdcache/error.hpp"
#include "rdcache/f_separable.hpp"
#include "rdcache/rate_distortion.hpp"
#include "rdcache/rdc_solver.hpp"
#include "rdcache/spec_io.hpp"
#include "rdcache/two_user.hpp"

namespace py = pybind11;
using namespace rdcache;

namespace {

using Rows = std::vector<std::vector<double>>;

Matrix to_matrix(const Rows& rows) {
    if (rows.empty()) return Matrix();
    std::vector<double> flat;
    for (const auto& r : rows) {
        if (r.size() != rows.front().size()) throw Error(ErrorCode::ShapeMismatch, "ragged matrix");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return Matrix(rows.size(), rows.front().size(), std::move(flat));
}

Rows to_rows(const Matrix& m) {
    Rows out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
    return out;
}

SourceLibrary make_library(std::vector<std::size_t> sizes, std::vector<double> pmf, std::vector<Rows> distortions,
                           std::vector<std::size_t> recon_sizes) {
    RawSource raw;
    raw.alphabet_sizes = std::move(sizes);
    raw.pmf = std::move(pmf);
    raw.recon_alphabet_sizes = std::move(recon_sizes);
    for (const auto& d : distortions) raw.distortions.push_back(to_matrix(d));
    return validate_library(raw);
}

RDCOptions options(std::uint64_t seed, int restarts, std::size_t aux_cap) {
    RDCOptions o;
    o.seed = seed;
    o.restarts = restarts;
    o.aux_cap = aux_cap;
    return o;
}

py::dict point_dict(const TradeoffPoint& p) {
    py::dict d;
    d["cache"] = p.cache;
    d["rate"] = p.rate;
    d["cache_used"] = p.cache_used;
    d["converged"] = p.converged;
    d["method"] = to_string(p.method);
    d["witness"] = p.witness ? py::cast(to_rows(p.witness->matrix)) : py::none();
    return d;
}

DistortionTransform transform_from(const py::object& o) {
    if (py::isinstance<DistortionTransform>(o)) return o.cast<DistortionTransform>();
    return parse_transform(py::str(py::module_::import("json").attr("dumps")(o)));
}

}  // namespace

PYBIND11_MODULE(_rdcache, m) {
    m.doc() = "Rate-distortion with a shared cache";

    static py::exception<Error> error(m, "RdcacheError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, e.what());
        }
    });

    py::class_<SourceLibrary>(m, "SourceLibrary")
        .def(py::init(&make_library), py::arg("alphabet_sizes"), py::arg("pmf"),
             py::arg("distortions") = std::vector<Rows>{}, py::arg("recon_alphabet_sizes") = std::vector<std::size_t>{})
        .def_property_readonly("num_sources", &SourceLibrary::num_sources)
        .def_property_readonly("alphabet_sizes", &SourceLibrary::alphabet_sizes)
        .def_property_readonly("recon_alphabet_sizes", &SourceLibrary::recon_alphabet_sizes)
        .def_property_readonly("pmf", &SourceLibrary::pmf)
        .def("distortion", [](const SourceLibrary& l, std::size_t i) { return to_rows(l.distortion(i)); })
        .def("marginal", &SourceLibrary::source_marginal)
        .def("__repr__", [](const SourceLibrary& l) {
            return "<SourceLibrary L=" + std::to_string(l.num_sources()) + " |X|=" + std::to_string(l.joint_size()) + ">";
        });

    m.def("dsbs_library", &dsbs_library, py::arg("rho"));
    m.def(
        "iid_library",
        [](const std::vector<double>& pmf, const Rows& d, std::size_t copies) {
            return iid_library(pmf, d.empty() ? hamming_matrix(pmf.size()) : to_matrix(d), copies);
        },
        py::arg("pmf"), py::arg("distortion") = Rows{}, py::arg("copies") = 2);
    m.def(
        "load_spec",
        [](const std::string& path) {
            const SourceSpec s = load_source_spec(path);
            py::dict d;
            d["library"] = s.library ? py::cast(*s.library) : py::none();
            d["transforms"] = s.transforms;
            d["gaussian_rho"] = s.gaussian_rho ? py::cast(*s.gaussian_rho) : py::none();
            return d;
        },
        py::arg("path"));

    m.def(
        "rd_function",
        [](const std::vector<double>& pmf, const Rows& d, double D) {
            return rd_function(pmf, d.empty() ? hamming_matrix(pmf.size()) : to_matrix(d), D).rate;
        },
        py::arg("pmf"), py::arg("distortion") = Rows{}, py::arg("D") = 0.0);
    m.def(
        "joint_rd",
        [](const SourceLibrary& lib, std::vector<double> D) { return joint_rd_function(lib, DistortionTuple(D)).rate; },
        py::arg("library"), py::arg("D"));

    m.def(
        "rdc_value",
        [](const SourceLibrary& lib, std::vector<double> D, double C, std::uint64_t seed, int restarts,
           std::size_t aux_cap) {
            TradeoffPoint p;
            {
                py::gil_scoped_release release;
                p = rdc_value(lib, DistortionTuple(D), C, options(seed, restarts, aux_cap));
            }
            return point_dict(p);
        },
        py::arg("library"), py::arg("D"), py::arg("C"), py::arg("seed") = 0, py::arg("restarts") = 20,
        py::arg("aux_cap") = 0);
    m.def(
        "rdc_curve",
        [](const SourceLibrary& lib, std::vector<double> D, std::vector<double> caches, std::uint64_t seed,
           int restarts, std::size_t aux_cap) {
            TradeoffCurve c;
            {
                py::gil_scoped_release release;
                c = rdc_curve(lib, DistortionTuple(D), caches, options(seed, restarts, aux_cap));
            }
            py::list rows;
            for (const auto& p : c.points) {
                py::dict d;
                d["cache"] = p.cache;
                d["rate"] = p.rate_envelope;
                d["rate_raw"] = p.rate_raw;
                d["genie"] = p.genie;
                d["superuser"] = p.superuser;
                d["super_genie"] = p.super_genie;
                d["cache_used"] = p.cache_used;
                rows.append(d);
            }
            return rows;
        },
        py::arg("library"), py::arg("D"), py::arg("caches"), py::arg("seed") = 0, py::arg("restarts") = 20,
        py::arg("aux_cap") = 0);
    m.def(
        "rdc_brute_force",
        [](const SourceLibrary& lib, std::vector<double> D, double C, int grid_steps, std::size_t aux_size) {
            return point_dict(rdc_brute_force(lib, DistortionTuple(D), C, grid_steps, aux_size));
        },
        py::arg("library"), py::arg("D"), py::arg("C"), py::arg("grid_steps") = 16, py::arg("aux_size") = 2);
    m.def(
        "bounds",
        [](const SourceLibrary& lib, std::vector<double> D, double C) {
            const BoundTerms t = bound_terms(lib, DistortionTuple(D));
            py::dict d;
            d["genie"] = genie_bound(t, C);
            d["superuser"] = superuser_bound(t, lib.num_sources(), C);
            d["super_genie"] = super_genie_bound(t, C);
            return d;
        },
        py::arg("library"), py::arg("D"), py::arg("C"));

    m.def(
        "gacs_korner", [](const SourceLibrary& lib) { return gacs_korner_zero(lib).value; }, py::arg("library"));
    m.def("wyner_ci_dsbs", &wyner_ci_dsbs, py::arg("rho"));
    m.def("wyner_ci_gaussian", &wyner_ci_gaussian, py::arg("rho"));

    m.def(
        "dsbs_rdc_bounds",
        [](double rho, double C) {
            const DsbsBounds b = dsbs_rdc_bounds(rho, C);
            return py::make_tuple(b.lower, b.upper);
        },
        py::arg("rho"), py::arg("C"));
    m.def(
        "gaussian_rdc",
        [](double rho, double D, double C) {
            const GaussianRDC g = bivariate_gaussian_rdc(rho, D, C);
            static const char* names[] = {"S1", "S2", "S3", "S4"};
            return py::make_tuple(g.rate, names[static_cast<int>(g.tag.region)], g.tag.exact);
        },
        py::arg("rho"), py::arg("D"), py::arg("C"));

    py::class_<DistortionTransform>(m, "DistortionTransform")
        .def_static("identity", &DistortionTransform::identity)
        .def_static("power", &DistortionTransform::power, py::arg("exponent"))
        .def_static("exp", &DistortionTransform::exp, py::arg("scale"))
        .def_static("table", &DistortionTransform::table, py::arg("x"), py::arg("y"))
        .def("__call__", &DistortionTransform::operator())
        .def("inverse", &DistortionTransform::inverse)
        .def("__repr__", &DistortionTransform::describe);
    m.def(
        "f_separable_rdc",
        [](const SourceLibrary& lib, const std::vector<py::object>& fs, std::vector<double> D, double C,
           std::uint64_t seed) {
            std::vector<DistortionTransform> ts;
            for (const auto& f : fs) ts.push_back(transform_from(f));
            return point_dict(f_separable_rdc(lib, ts, DistortionTuple(D), C, options(seed, 20, 0)));
        },
        py::arg("library"), py::arg("transforms"), py::arg("D"), py::arg("C"), py::arg("seed") = 0);

    m.def(
        "two_user_dsbs_bounds",
        [](double rho, double D, double C) {
            const TwoUserDsbsBounds b = two_user_dsbs_bounds(rho, D, C);
            return py::make_tuple(b.lower, b.upper);
        },
        py::arg("rho"), py::arg("D"), py::arg("C"));
    m.def(
        "two_user_bounds",
        [](const SourceLibrary& lib, std::vector<std::size_t> d1, std::vector<std::size_t> d2, std::vector<double> D,
           std::vector<double> Delta, double C, int grid_steps, std::size_t aux_size, std::uint64_t seed) {
            if (Delta.empty()) Delta.assign(lib.num_sources(), 0.0);
            const TwoUserInstance inst =
                make_two_user_instance(lib, d1, d2, DistortionTuple(D), DistortionTuple(Delta), C);
            TwoUserGridOptions o;
            o.grid_steps = grid_steps;
            o.aux_size = aux_size;
            o.seed = seed;
            double lo, up;
            {
                py::gil_scoped_release release;
                lo = two_user_lower_genie(inst, o).value;
                up = two_user_upper(inst, o).value;
            }
            return py::make_tuple(lo, up);
        },
        py::arg("library"), py::arg("demands1"), py::arg("demands2"), py::arg("D"), py::arg("Delta") = std::vector<double>{},
        py::arg("C") = 0.0, py::arg("grid_steps") = 16, py::arg("aux_size") = 0, py::arg("seed") = 0);
}
