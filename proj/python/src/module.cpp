#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "naxray/bayes.hpp"
#include "naxray/errors.hpp"
#include "naxray/io.hpp"
#include "naxray/normalop.hpp"
#include "naxray/transport.hpp"

namespace py = pybind11;
using namespace naxray;
namespace fs = std::filesystem;

namespace
{
SolverConfig solver(int steps_per_unit)
{
    SolverConfig cfg;
    cfg.steps_per_unit = steps_per_unit;
    cfg.validate();
    return cfg;
}

py::array_t<cplx> coeff_array(PotentialField const& f)
{
    auto c = f.coeffs();
    std::size_t mm = static_cast<std::size_t>(f.matrix_size());
    py::array_t<cplx> out({c.size() / (mm * mm), mm, mm});
    std::copy(c.begin(), c.end(), out.mutable_data());
    return out;
}

void set_coeffs(PotentialField& f, py::array_t<cplx, py::array::c_style | py::array::forcecast> a)
{
    if (static_cast<std::size_t>(a.size()) != f.coeffs().size())
        throw DomainError("coefficient array has " + std::to_string(a.size()) + " entries, expected " +
                          std::to_string(f.coeffs().size()));
    std::copy(a.data(), a.data() + a.size(), f.coeffs().begin());
}

// Scattering data for n uniformly sampled inward directions.
py::dict scattering(PotentialField const& f, std::size_t n, std::uint64_t seed, int steps_per_unit)
{
    Rng rng(seed);
    auto bds = sample_boundary_uniform(f.dim(), n, rng);
    auto recs = scattering_data(Attenuation(f), bds, solver(steps_per_unit));
    std::size_t const d = f.dim(), m = f.matrix_size();
    py::array_t<double> x({n, d}), v({n, d});
    py::array_t<cplx> c({n, m, m});
    auto xs = x.mutable_unchecked<2>();
    auto vs = v.mutable_unchecked<2>();
    auto cs = c.mutable_unchecked<3>();
    for (std::size_t k = 0; k < n; ++k)
    {
        for (std::size_t i = 0; i < d; ++i)
        {
            xs(k, i) = recs[k].bd.x[i];
            vs(k, i) = recs[k].bd.v[i];
        }
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                cs(k, i, j) = recs[k].value(i, j);
    }
    py::dict out;
    out["x"] = x;
    out["v"] = v;
    out["value"] = c;
    return out;
}
}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Non-abelian X-ray transform: forward solver, estimates, symbols and Bayesian inversion.";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<DegenerateInputError>(m, "DegenerateInputError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::enum_<Structure>(m, "Structure")
        .value("general_complex", Structure::general_complex)
        .value("general_real", Structure::general_real)
        .value("skew_symmetric", Structure::skew_symmetric)
        .value("skew_hermitian", Structure::skew_hermitian);

    py::class_<PotentialField>(m, "PotentialField")
        .def(py::init<int, int, int, double, Structure>(), py::arg("d"), py::arg("m"), py::arg("modes"),
             py::arg("half_width") = 2.0, py::arg("structure") = Structure::general_complex)
        .def_property_readonly("dim", &PotentialField::dim)
        .def_property_readonly("matrix_size", &PotentialField::matrix_size)
        .def_property_readonly("modes", &PotentialField::modes)
        .def_property_readonly("half_width", &PotentialField::half_width)
        .def_property_readonly("structure", &PotentialField::structure)
        .def_property("coeffs", &coeff_array, &set_coeffs, "Fourier coefficients, shape (modes^d, m, m).")
        .def("__call__", &PotentialField::evaluate, py::arg("x"))
        .def("__add__", [](PotentialField const& a, PotentialField const& b) { return a + b; })
        .def("__sub__", [](PotentialField const& a, PotentialField const& b) { return a - b; })
        .def("__mul__", [](PotentialField const& a, double s) { return s * a; })
        .def("__rmul__", [](PotentialField const& a, double s) { return s * a; });

    m.def(
        "random_field",
        [](int d, int m_, int modes, Structure s, double amplitude, double decay, double half_width,
           std::uint64_t seed) {
            Rng rng(seed);
            return random_field(d, m_, modes, half_width, s, amplitude, decay, rng);
        },
        py::arg("d"), py::arg("m"), py::arg("modes"), py::arg("structure"), py::arg("amplitude") = 1.0,
        py::arg("decay") = 1.0, py::arg("half_width") = 2.0, py::arg("seed") = 0);
    m.def("linf_norm", py::overload_cast<PotentialField const&, int>(&linf_norm), py::arg("field"),
          py::arg("grid") = 33);
    m.def("l2_distance", &l2_distance_on_ball, py::arg("f"), py::arg("g"), py::arg("order") = 64);
    m.def("read_field", [](fs::path const& p) { return io::read_field(p); }, py::arg("path"));
    m.def("write_field", [](fs::path const& p, PotentialField const& f) { io::write_field(p, f); }, py::arg("path"),
          py::arg("field"));

    m.def(
        "scattering_value",
        [](PotentialField const& f, Vec const& x, Vec const& v, int spu) {
            return scattering_value(Attenuation(f), BoundaryDirection::make(x, v), solver(spu));
        },
        py::arg("field"), py::arg("x"), py::arg("v"), py::arg("steps_per_unit") = 256);
    m.def("scattering_data", &scattering, py::arg("field"), py::arg("n"), py::arg("seed") = 0,
          py::arg("steps_per_unit") = 256, "Scattering data on n uniform inward directions as arrays x, v, value.");
    m.def(
        "xray",
        [](PotentialField const& f, Vec const& x, Vec const& v, int spu) {
            return weighted_xray(Weight::identity(), f, BoundaryDirection::make(x, v), solver(spu));
        },
        py::arg("field"), py::arg("x"), py::arg("v"), py::arg("steps_per_unit") = 256);
    m.def(
        "pseudolin_residual",
        [](PotentialField const& phi, PotentialField const& psi, Vec const& x, Vec const& v, double delta, int spu) {
            return pseudolin_residual(Attenuation(phi), Attenuation(psi), BoundaryDirection::make(x, v), delta,
                                      solver(spu));
        },
        py::arg("phi"), py::arg("psi"), py::arg("x"), py::arg("v"), py::arg("delta") = 0.25,
        py::arg("steps_per_unit") = 256);

    m.def(
        "constant_weight_symbol",
        [](CMat const& w, int d, double xi, Vec const& eta, int n_quad) {
            auto data = weight_data(d, n_quad, [w](Vec const&) { return w; });
            return symbol_matrix(data, {xi, eta, 1.0});
        },
        py::arg("weight"), py::arg("d"), py::arg("xi"), py::arg("eta"), py::arg("n_quad") = 512,
        "Principal symbol of the normal operator for a constant weight.");

    m.def(
        "log_likelihood",
        [](PotentialField const& phi, fs::path const& dataset, int spu) {
            return log_likelihood(phi, io::read_dataset(dataset), solver(spu));
        },
        py::arg("field"), py::arg("dataset"), py::arg("steps_per_unit") = 256);
    m.def(
        "hellinger",
        [](PotentialField const& phi, PotentialField const& psi, std::size_t n_mc, std::uint64_t seed, int spu) {
            Rng rng(seed);
            return hellinger(Attenuation(phi), Attenuation(psi), n_mc, rng, solver(spu));
        },
        py::arg("phi"), py::arg("psi"), py::arg("n_mc") = 1000, py::arg("seed") = 0, py::arg("steps_per_unit") = 64);

    m.def("fmt", &io::fmt, py::arg("x"), "Round-trip text of a double (%.17g, trailing zeros trimmed).");
}
