#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "peridyn/bench.hpp"
#include "peridyn/cli_commands.hpp"
#include "peridyn/config.hpp"
#include "peridyn/engine.hpp"
#include "peridyn/formulas.hpp"
#include "peridyn/geometry.hpp"
#include "peridyn/io.hpp"

namespace py = pybind11;
using namespace peridyn;

namespace {

std::vector<Real> flat_from_array(const py::array_t<double, py::array::c_style>& arr,
                                  const char* name) {
    if (arr.ndim() != 2 || arr.shape(1) != 3)
        throw py::value_error(std::string(name) + " must be an (n, 3) array");
    std::vector<Real> out(std::size_t(arr.size()));
    const auto view = arr.unchecked<2>();
    for (py::ssize_t i = 0; i < arr.shape(0); ++i)
        for (py::ssize_t c = 0; c < 3; ++c)
            out[std::size_t(3 * i + c)] = Real(view(i, c));
    return out;
}

Vec3 vec3_of(const std::array<double, 3>& a) { return {Real(a[0]), Real(a[1]), Real(a[2])}; }

Regime regime_of(const std::string& name) {
    if (name == "3d")
        return Regime::three_d;
    if (name == "plane_stress")
        return Regime::plane_stress;
    if (name == "plane_strain")
        return Regime::plane_strain;
    throw py::value_error("regime must be 3d, plane_stress or plane_strain");
}

} // namespace

PYBIND11_MODULE(_peridyn, m) {
    m.doc() = "Mesh-free bond-based peridynamics solver";

    m.def("pmb_micromodulus", &pmb_micromodulus, py::arg("bulk_modulus"), py::arg("horizon"),
          "PMB micromodulus 18 K / (pi delta^4)");
    m.def(
        "critical_stretch",
        [](double g, double e, double d, const std::string& regime) {
            return critical_stretch(Real(g), Real(e), Real(d), regime_of(regime));
        },
        py::arg("fracture_energy"), py::arg("youngs_modulus"), py::arg("horizon"),
        py::arg("regime") = "3d");
    m.def(
        "bond_stretch",
        [](const std::array<double, 3>& xi, const std::array<double, 3>& eta) {
            return bond_stretch(vec3_of(xi), vec3_of(eta));
        },
        py::arg("xi"), py::arg("eta"));
    m.def("local_damage", &local_damage, py::arg("n_neigh_current"), py::arg("n_neigh_initial"));
    m.def("rayleigh_speed", &rayleigh_speed, py::arg("youngs_modulus"), py::arg("poisson"),
          py::arg("density"));
    m.def(
        "crack_speed",
        [](const std::array<double, 3>& a, const std::array<double, 3>& b, double dt) {
            return crack_speed(vec3_of(a), vec3_of(b), Real(dt));
        },
        py::arg("tip_t"), py::arg("tip_t_plus"), py::arg("dt"));
    m.def("memory_estimate", &bench::memory_estimate, py::arg("n"), py::arg("group_size"),
          py::arg("multi_material") = false, py::arg("stiffness_corrections") = false,
          "Approximate global memory footprint in bytes");

    m.def(
        "reduce_group",
        [](const py::array_t<double, py::array::c_style>& arr) {
            auto flat = flat_from_array(arr, "contributions");
            std::vector<Vec3> buf(flat.size() / 3);
            for (std::size_t i = 0; i < buf.size(); ++i)
                buf[i] = {flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]};
            const Vec3 sum = reduce_group(buf);
            return std::array<double, 3>{double(sum.x), double(sum.y), double(sum.z)};
        },
        py::arg("contributions"),
        "Deterministic pairwise tree sum of an (N, 3) contribution block; N must be a power of two");

    m.def(
        "build_family",
        [](const py::array_t<double, py::array::c_style>& coords, double horizon) {
            const auto flat = flat_from_array(coords, "coords");
            NeighborList family = build_family(flat, Real(horizon));
            const Index n = family.node_count();
            py::array_t<std::int32_t> entries(
                std::vector<py::ssize_t>{py::ssize_t(n), py::ssize_t(family.group_size)});
            std::copy(family.entries.begin(), family.entries.end(), entries.mutable_data());
            py::array_t<std::int32_t> counts(std::vector<py::ssize_t>{py::ssize_t(n)});
            std::copy(family.n_neigh.begin(), family.n_neigh.end(), counts.mutable_data());
            py::dict out;
            out["entries"] = entries;
            out["n_neigh"] = counts;
            out["group_size"] = family.group_size;
            out["horizon"] = double(family.horizon);
            return out;
        },
        py::arg("coords"), py::arg("horizon"),
        "Padded family list: dict with entries (n, N), n_neigh, group_size, horizon");

    m.def(
        "lump_volumes",
        [](const py::array_t<double, py::array::c_style>& vertices,
           const std::vector<std::array<Index, 4>>& tets) {
            InputMesh mesh;
            mesh.vertices = flat_from_array(vertices, "vertices");
            mesh.tets = tets;
            const auto vols = lump_volumes(mesh);
            py::array_t<double> out(std::vector<py::ssize_t>{py::ssize_t(vols.size())});
            for (std::size_t i = 0; i < vols.size(); ++i)
                out.mutable_data()[i] = double(vols[i]);
            return out;
        },
        py::arg("vertices"), py::arg("tets"));

    m.def(
        "surface_correction_factors",
        [](const py::array_t<double>& volumes, const py::dict& family, double v0) {
            NeighborList nl;
            const auto entries = family["entries"].cast<py::array_t<std::int32_t>>();
            nl.group_size = Index(entries.shape(1));
            nl.horizon = Real(family["horizon"].cast<double>());
            nl.entries.assign(entries.data(), entries.data() + entries.size());
            const auto counts = family["n_neigh"].cast<py::array_t<std::int32_t>>();
            nl.n_neigh.assign(counts.data(), counts.data() + counts.size());
            nl.initial_n_neigh = nl.n_neigh;
            std::vector<Real> vols(std::size_t(volumes.size()));
            for (py::ssize_t i = 0; i < volumes.size(); ++i)
                vols[std::size_t(i)] = Real(volumes.data()[i]);
            const auto lambda = surface_correction_factors(vols, nl, Real(v0));
            py::array_t<double> out(std::vector<py::ssize_t>{py::ssize_t(counts.size()),
                                                             py::ssize_t(nl.group_size)});
            for (std::size_t i = 0; i < lambda.size(); ++i)
                out.mutable_data()[i] = double(lambda[i]);
            return out;
        },
        py::arg("volumes"), py::arg("family"), py::arg("v0"));

    m.def("analytic_neighborhood_volume", &analytic_neighborhood_volume, py::arg("horizon"),
          py::arg("packing") = 1.0);

    m.def(
        "run_config",
        [](const std::string& config_path, const std::string& out_dir) {
            cli::Overrides overrides;
            overrides.out = out_dir;
            return cli::run_command("run", config_path, overrides);
        },
        py::arg("config_path"), py::arg("out_dir") = std::string(),
        "Run a simulation from a config file; returns the process-style exit code");

    m.attr("precision") = sizeof(Real) == 8 ? "f64" : "f32";
}
