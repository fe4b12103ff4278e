#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <set>

#include "oracles.hpp"
#include "peridyn/geometry.hpp"

using namespace peridyn;
using doctest::Approx;

TEST_CASE("unit tetrahedron lumps a quarter of 1/6 to each vertex") {
    InputMesh mesh;
    mesh.vertices = {0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1};
    mesh.tets.push_back({0, 1, 2, 3});
    const auto vols = lump_volumes(mesh);
    for (Real v : vols)
        CHECK(v == Approx(1.0 / 24.0).epsilon(1e-14));
}

TEST_CASE("volume lumping conserves the total mesh volume") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    InputMesh mesh;
    const Index n = 40;
    for (Index i = 0; i < 3 * n; ++i)
        mesh.vertices.push_back(Real(unit(rng)));
    double total = 0;
    int cells = 0;
    while (cells < 60) {
        std::array<Index, 4> t{};
        std::set<Index> seen;
        for (auto& v : t) {
            v = Index(unit(rng) * double(n)) % n;
            seen.insert(v);
        }
        if (seen.size() < 4)
            continue;
        const double v = double(tet_volume(
            load_vec3(mesh.vertices, t[0]), load_vec3(mesh.vertices, t[1]),
            load_vec3(mesh.vertices, t[2]), load_vec3(mesh.vertices, t[3])));
        if (v < 1e-6)
            continue;
        mesh.tets.push_back(t);
        total += v;
        ++cells;
    }
    const auto vols = lump_volumes(mesh);
    double sum = 0;
    for (Real v : vols)
        sum += double(v);
    CHECK(sum == Approx(total).epsilon(1e-12));
}

TEST_CASE("regular grid volumes are the spacing cubed") {
    GridDesc grid;
    grid.spacing = Real(0.1);
    grid.counts = {10, 10, 10};
    const auto vols = lump_volumes(mesh_from_grid(grid));
    CHECK(vols.size() == 1000);
    for (Real v : vols)
        CHECK(v == Approx(1e-3).epsilon(1e-14));
}

TEST_CASE("degenerate tetrahedron is rejected with its cell index") {
    InputMesh mesh;
    mesh.vertices = {0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0}; // coplanar
    mesh.tets.push_back({0, 1, 2, 3});
    CHECK_THROWS_WITH_AS(lump_volumes(mesh), doctest::Contains("cell 0"), std::invalid_argument);
}

TEST_CASE("mesh without any volume source is rejected") {
    InputMesh mesh;
    mesh.vertices = {0, 0, 0};
    CHECK_THROWS_AS(lump_volumes(mesh), std::invalid_argument);
}

TEST_CASE("two nodes within the horizon") {
    const std::vector<Real> coords = {0, 0, 0, Real(0.9), 0, 0};
    NeighborList family = build_family(coords, 1);
    CHECK(family.group_size == 1);
    CHECK(family.entries == std::vector<std::int32_t>{1, 0});
    CHECK(family.n_neigh == std::vector<std::int32_t>{1, 1});
}

TEST_CASE("regular grid with horizon pi dx has interior family 122 and group 128") {
    GridDesc grid;
    grid.spacing = 1;
    grid.counts = {10, 10, 10};
    const auto coords = grid_coordinates(grid);
    NeighborList family = build_family(coords, Real(std::numbers::pi), &grid);
    CHECK(oracles::lattice_ball_count(std::numbers::pi) == 122);
    CHECK(family.group_size == 128);
    // an interior node sees the full lattice ball
    Index interior = -1;
    for (Index i = 0; i < 1000; ++i) {
        const Vec3 x = load_vec3(coords, i);
        if (x.x == 4 && x.y == 4 && x.z == 4)
            interior = i;
    }
    REQUIRE(interior >= 0);
    CHECK(family.n_neigh[std::size_t(interior)] == 122);
}

TEST_CASE("spatial index equals brute force on 500 random points") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Real> coords(1500);
    for (auto& c : coords)
        c = Real(unit(rng) * 8.0);
    NeighborList fast = build_family(coords, Real(1.1));
    NeighborList brute = build_family_brute_force(coords, Real(1.1));
    CHECK(fast.group_size == brute.group_size);
    CHECK(fast.entries == brute.entries); // rows sorted, so element-for-element
    CHECK(fast.n_neigh == brute.n_neigh);
}

TEST_CASE("family is symmetric and padded to a power of two") {
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> unit(0.0, 4.0);
    std::vector<Real> coords(300);
    for (auto& c : coords)
        c = Real(unit(rng));
    NeighborList family = build_family(coords, Real(1.3));
    const Index n = family.node_count();
    CHECK((family.group_size & (family.group_size - 1)) == 0);
    Index max_count = 0;
    std::set<std::pair<Index, Index>> bonds;
    for (Index i = 0; i < n; ++i) {
        max_count = std::max(max_count, Index(family.n_neigh[std::size_t(i)]));
        for (Index k = 0; k < family.group_size; ++k) {
            const auto j = family.entries[std::size_t(i * family.group_size + k)];
            if (j >= 0)
                bonds.insert({i, j});
        }
    }
    CHECK(family.group_size >= max_count);
    for (const auto& [i, j] : bonds)
        CHECK(bonds.count({j, i}) == 1);
    family.validate();
}

TEST_CASE("family construction error cases") {
    const std::vector<Real> coords = {0, 0, 0, 1, 0, 0};
    CHECK_THROWS_AS(build_family(coords, 0), std::domain_error);
    const std::vector<Real> coincident = {0, 0, 0, 0, 0, 0};
    CHECK_THROWS_AS(build_family(coincident, 1), std::invalid_argument);
}

TEST_CASE("surface correction factors") {
    // three nodes in a line, spacing 1, horizon 1.5: middle sees both ends
    const std::vector<Real> coords = {0, 0, 0, 1, 0, 0, 2, 0, 0};
    NeighborList family = build_family(coords, Real(1.5));
    const std::vector<Real> volumes = {2, 2, 2};
    // neighborhood volumes: end nodes 4 (two neighbors... end nodes see only
    // the middle at distance 1 and the far node at distance 2 > 1.5, so 2;
    // middle sees both ends: 4
    const auto nbhd = neighborhood_volumes(volumes, family);
    CHECK(nbhd[0] == 2);
    CHECK(nbhd[1] == 4);

    // bulk case: V_i = V_j = V0 gives lambda = 1
    auto lambda = surface_correction_factors(volumes, family, nbhd[1]);
    const Index g = family.group_size;
    for (Index k = 0; k < g; ++k) {
        const auto j = family.entries[std::size_t(1 * g + k)];
        if (j >= 0) {
            // middle-to-end bond: 2 V0 / (4 + 2) = 4/3 with V0 = 4
            CHECK(lambda[std::size_t(1 * g + k)] == Approx(8.0 / 6.0).epsilon(1e-14));
        } else {
            CHECK(lambda[std::size_t(1 * g + k)] == 1); // padding carries 1
        }
    }
    // corner-like case: V_i = V_j = V0/2 gives lambda = 2
    const auto lambda2 = surface_correction_factors(volumes, family, 4);
    for (Index k = 0; k < g; ++k) {
        const auto j = family.entries[std::size_t(0 * g + k)];
        if (j == 1)
            CHECK(lambda2[std::size_t(0 * g + k)] == Approx(8.0 / 6.0).epsilon(1e-14));
    }
    // analytic full-horizon volume
    CHECK(analytic_neighborhood_volume(2) ==
          Approx(4.0 / 3.0 * std::numbers::pi * 8).epsilon(1e-14));
    CHECK_THROWS_AS(surface_correction_factors(volumes, family, 0), std::domain_error);
}

TEST_CASE("surface correction exact two-node cases") {
    const std::vector<Real> coords = {0, 0, 0, 1, 0, 0};
    NeighborList family = build_family(coords, Real(1.5));
    // V_i = V_j = V0 -> 1;  V_i = V_j = V0/2 -> 2;  V0 vs V0/2 -> 4/3
    const std::vector<Real> volumes = {1, 1};
    auto l1 = surface_correction_factors(volumes, family, 1);
    CHECK(l1[0] == Approx(1.0));
    auto l2 = surface_correction_factors(volumes, family, 2);
    CHECK(l2[0] == Approx(2.0));
    const std::vector<Real> mixed = {2, 1}; // nbhd volumes: node0 sees 1, node1 sees 2
    auto l3 = surface_correction_factors(mixed, family, 2);
    CHECK(l3[0] == Approx(4.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("break_initial_bonds") {
    GridDesc grid;
    grid.spacing = 1;
    grid.counts = {8, 6, 3};
    const auto coords = grid_coordinates(grid);
    NeighborList family = build_family(coords, Real(2.1), &grid);
    const auto before = family;

    SUBCASE("no-op predicate leaves the family alone") {
        break_initial_bonds(family, coords, [](const Vec3&, const Vec3&) { return false; });
        CHECK(family.entries == before.entries);
        CHECK(family.n_neigh == before.n_neigh);
    }

    SUBCASE("plane predicate removes exactly the crossing bonds") {
        const Real plane = Real(3.5);
        break_initial_bonds(family, coords, plane_crossing_predicate(0, plane));
        const Index n = family.node_count();
        const Index g = family.group_size;
        for (Index i = 0; i < n; ++i) {
            const Real xi = coords[std::size_t(3 * i)];
            std::int32_t live = 0;
            for (Index k = 0; k < g; ++k) {
                const auto j_now = family.entries[std::size_t(i * g + k)];
                const auto j_was = before.entries[std::size_t(i * g + k)];
                if (j_was < 0) {
                    CHECK(j_now == -1);
                    continue;
                }
                const Real xj = coords[std::size_t(3 * j_was)];
                const bool crosses = (xi - plane) * (xj - plane) < 0;
                CHECK(j_now == (crosses ? -1 : j_was));
                if (j_now >= 0)
                    ++live;
            }
            CHECK(live == family.n_neigh[std::size_t(i)]);
            // initial counts are kept, so the cut shows up as damage
            CHECK(family.initial_n_neigh[std::size_t(i)] ==
                  before.initial_n_neigh[std::size_t(i)]);
        }
    }

    SUBCASE("notch predicate only cuts within the notch depth") {
        // notch along x up to depth 2.5, in the plane y = 2.5
        break_initial_bonds(family, coords, notch_predicate(1, Real(2.5), 0, Real(2.5)));
        const Index n = family.node_count();
        bool any_cut = false;
        for (Index i = 0; i < n; ++i) {
            const Vec3 xi = load_vec3(coords, i);
            const auto lost = family.initial_n_neigh[std::size_t(i)] -
                              family.n_neigh[std::size_t(i)];
            if (lost > 0) {
                any_cut = true;
                // every damaged node lies near the notch ribbon
                CHECK(xi.x <= 2.5 + family.horizon);
                CHECK(std::abs(xi.y - 2.5) <= family.horizon);
            }
        }
        CHECK(any_cut);
    }
}
