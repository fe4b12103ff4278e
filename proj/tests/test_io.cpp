#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "peridyn/io.hpp"

using namespace peridyn;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("peridyn_io_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size()));
}

} // namespace

TEST_CASE("grid descriptor expands to the cube corners") {
    TempDir dir;
    const auto path = dir.path / "box.grid";
    std::ofstream(path) << "pdgrid 1\norigin 0 0 0\nspacing 1\ncounts 2 2 2\n";
    InputMesh mesh = io::read_mesh(path);
    CHECK(mesh.vertex_count() == 8);
    CHECK(mesh.grid.has_value());
    const auto vols = lump_volumes(mesh);
    for (Real v : vols)
        CHECK(v == 1);
    CHECK(load_vec3(mesh.vertices, 7).x == 1);
    CHECK(load_vec3(mesh.vertices, 7).y == 1);
    CHECK(load_vec3(mesh.vertices, 7).z == 1);
}

TEST_CASE("text mesh with an out-of-range cell index names the line") {
    TempDir dir;
    const auto path = dir.path / "bad.mesh";
    std::ofstream(path) << "pdmesh 1\nnodes 3\n0 0 0\n1 0 0\n0 1 0\ntets 1\n0 1 2 9\n";
    CHECK_THROWS_WITH_AS(io::read_mesh(path), doctest::Contains(":7"), io::IoError);
}

TEST_CASE("unknown extension is rejected") {
    TempDir dir;
    const auto path = dir.path / "mesh.xyz";
    std::ofstream(path) << "whatever\n";
    CHECK_THROWS_WITH_AS(io::read_mesh(path), doctest::Contains("extension"), io::IoError);
}

TEST_CASE("write_mesh then read_mesh is the identity on a random mesh") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    InputMesh mesh;
    for (int i = 0; i < 60; ++i)
        mesh.vertices.push_back(Real(unit(rng)));
    mesh.explicit_volumes.assign(20, 0);
    for (auto& v : mesh.explicit_volumes)
        v = Real(1 + unit(rng) / 2);
    mesh.tets.push_back({0, 1, 2, 3});
    mesh.tets.push_back({4, 5, 6, 7});

    TempDir dir;
    const auto path = dir.path / "round.mesh";
    io::write_mesh(path, mesh);
    InputMesh back = io::read_mesh(path);
    CHECK(back.vertices == mesh.vertices);
    CHECK(back.explicit_volumes == mesh.explicit_volumes);
    CHECK(back.tets == mesh.tets);
}

TEST_CASE("snapshot format: n=1 zero state is exactly 2 lines after the header") {
    io::Snapshot snap;
    snap.step = 42;
    snap.coords = {0, 0, 0};
    snap.u = {0, 0, 0};
    snap.v = {0, 0, 0};
    snap.damage = {0};
    TempDir dir;
    const auto path = dir.path / "one.pdsnap";
    io::write_snapshot(path, snap);
    std::ifstream in(path);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line))
        lines.push_back(line);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "pdsnap 1 42");
    CHECK(lines[1] == "1");
    CHECK(lines[2] == "0 0 0 0 0 0 0 0 0 0");
}

TEST_CASE("snapshot damage column is bounded and byte-stable") {
    oracles::RandomConfig cfg = oracles::make_random_config(404);
    cfg.state.step = 9;
    io::Snapshot snap = io::make_snapshot(cfg.state, cfg.particles);
    for (Real phi : snap.damage) {
        CHECK(phi >= 0);
        CHECK(phi <= 1);
    }
    TempDir dir;
    io::write_snapshot(dir.path / "a.pdsnap", snap);
    io::write_snapshot(dir.path / "b.pdsnap", snap);
    CHECK(slurp(dir.path / "a.pdsnap") == slurp(dir.path / "b.pdsnap"));

    io::Snapshot back = io::read_snapshot(dir.path / "a.pdsnap");
    CHECK(back.step == snap.step);
    CHECK(back.coords == snap.coords); // 17 digits round-trip doubles exactly
    CHECK(back.u == snap.u);
    CHECK(back.damage == snap.damage);
}

TEST_CASE("family cache round-trips exactly") {
    oracles::RandomConfig cfg = oracles::make_random_config(77);
    TempDir dir;
    const auto path = dir.path / "family.pdnl";
    io::save_cache(cfg.state.connectivity, cfg.corrections, path);
    io::FamilyCache cache = io::load_cache(path);
    CHECK(cache.family.entries == cfg.state.connectivity.entries);
    CHECK(cache.family.n_neigh == cfg.state.connectivity.n_neigh);
    CHECK(cache.family.initial_n_neigh == cfg.state.connectivity.initial_n_neigh);
    CHECK(cache.family.group_size == cfg.state.connectivity.group_size);
    CHECK(cache.family.horizon == cfg.state.connectivity.horizon);
    CHECK(cache.corrections.lambda == cfg.corrections.lambda);
    CHECK(cache.corrections.beta == cfg.corrections.beta);
}

TEST_CASE("cache rejects corruption without partial objects") {
    oracles::RandomConfig cfg = oracles::make_random_config(78);
    TempDir dir;
    const auto path = dir.path / "family.pdnl";
    io::save_cache(cfg.state.connectivity, cfg.corrections, path);
    auto bytes = slurp(path);

    SUBCASE("bad magic") {
        bytes[0] = 'X';
        spit(path, bytes);
        CHECK_THROWS_WITH_AS(io::load_cache(path), doctest::Contains("magic"), io::IoError);
    }
    SUBCASE("version mismatch") {
        bytes[4] = 9;
        spit(path, bytes);
        CHECK_THROWS_WITH_AS(io::load_cache(path), doctest::Contains("version"), io::IoError);
    }
    SUBCASE("truncated") {
        bytes.resize(bytes.size() - 7);
        spit(path, bytes);
        CHECK_THROWS_AS(io::load_cache(path), io::IoError);
    }
    SUBCASE("every single-byte corruption of the first length prefix is rejected") {
        // header: 4 magic + 4 version + 8 n + 8 N + 8 horizon, then the
        // first section id (4 bytes) and its 8-byte length prefix
        const std::size_t length_at = 4 + 4 + 8 + 8 + 8 + 4;
        for (std::size_t b = 0; b < 8; ++b) {
            auto mutated = bytes;
            mutated[length_at + b] = char(mutated[length_at + b] + 1);
            spit(path, mutated);
            CHECK_THROWS_AS(io::load_cache(path), io::IoError);
        }
    }
}

TEST_CASE("state container round-trips the full restart state") {
    oracles::RandomConfig cfg = oracles::make_random_config(79);
    cfg.state.step = 1234;
    std::mt19937 rng(80);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (auto& x : cfg.state.v)
        x = Real(unit(rng));
    for (auto& x : cfg.state.a)
        x = Real(unit(rng));

    TempDir dir;
    const auto path = dir.path / "state.pdst";
    io::save_state(cfg.state, path);
    SimulationState back = io::load_state(path);
    CHECK(back.step == cfg.state.step);
    CHECK(back.u == cfg.state.u);
    CHECK(back.v == cfg.state.v);
    CHECK(back.a == cfg.state.a);
    CHECK(back.bond_history == cfg.state.bond_history);
    CHECK(back.connectivity.entries == cfg.state.connectivity.entries);
    CHECK(back.connectivity.n_neigh == cfg.state.connectivity.n_neigh);

    // writers are deterministic byte for byte
    io::save_state(cfg.state, dir.path / "again.pdst");
    CHECK(slurp(path) == slurp(dir.path / "again.pdst"));

    auto bytes = slurp(path);
    bytes[0] = 'Q';
    spit(path, bytes);
    CHECK_THROWS_WITH_AS(io::load_state(path), doctest::Contains("magic"), io::IoError);
}

TEST_CASE("restart from a saved state file reproduces the uninterrupted run bitwise") {
    GridDesc grid;
    grid.spacing = 1;
    grid.counts = {4, 3, 3};
    ModelBundle bundle;
    bundle.particles.coords = grid_coordinates(grid);
    const Index n = grid.node_count();
    bundle.particles.volume.assign(std::size_t(n), 1);
    bundle.particles.density.assign(std::size_t(n), 1);
    bundle.particles.material_tag.assign(std::size_t(n), 0);
    bundle.model.laws.push_back(
        DamageLaw::trilinear(Real(0.05), Real(0.02), Real(0.05), Real(0.2)));
    bundle.bc = BoundaryConditions::none(n);
    bundle.bc.ramps.push_back(RampProfile{RampProfile::Kind::quintic_smooth, 150, 1});
    for (Index i = 0; i < n; ++i) {
        const Real x = bundle.particles.coords[std::size_t(3 * i)];
        if (x == 3) {
            bundle.bc.kind[std::size_t(3 * i)] = BCKind::displacement;
            bundle.bc.magnitude[std::size_t(3 * i)] = Real(0.3);
            bundle.bc.ramp_id[std::size_t(3 * i)] = 1;
        } else if (x == 0) {
            bundle.bc.kind[std::size_t(3 * i)] = BCKind::displacement;
        }
    }
    bundle.dt = Real(0.05);
    NeighborList family = build_family(bundle.particles.coords, Real(1.8));

    SimulationState whole = make_state_for(bundle, family);
    SimulateOptions opts;
    opts.steps = 150;
    simulate(bundle, whole, opts);

    SimulationState part = make_state_for(bundle, family);
    opts.steps = 60;
    simulate(bundle, part, opts);
    TempDir dir;
    io::save_state(part, dir.path / "mid.pdst");
    SimulationState resumed = io::load_state(dir.path / "mid.pdst");
    opts.steps = 90;
    opts.first_step = resumed.step;
    simulate(bundle, resumed, opts);

    CHECK(resumed.step == whole.step);
    CHECK(resumed.u == whole.u);
    CHECK(resumed.v == whole.v);
    CHECK(resumed.a == whole.a);
    CHECK(resumed.bond_history == whole.bond_history);
    CHECK(resumed.connectivity.entries == whole.connectivity.entries);
}
