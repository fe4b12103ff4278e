#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "peridyn/bench.hpp"
#include "peridyn/geometry.hpp"

using namespace peridyn;
using doctest::Approx;

TEST_CASE("memory estimate formulas") {
    // single material, linear law, no corrections, n=1, N=64:
    // 16*8 + 67*4 = 396 bytes
    CHECK(bench::memory_estimate(1, 64, false, false) == 396);
    // exactly linear in n at fixed N and features
    for (Index n : {2, 10, 1000})
        CHECK(bench::memory_estimate(n, 64, false, false) == std::uint64_t(n) * 396);
    // switching on stiffness corrections adds exactly N*n*8 bytes
    for (Index n : {1, 7, 500})
        for (Index N : {64, 128, 256})
            CHECK(bench::memory_estimate(n, N, false, true) -
                      bench::memory_estimate(n, N, false, false) ==
                  std::uint64_t(N) * std::uint64_t(n) * 8);
    CHECK_THROWS_AS(bench::memory_estimate(0, 64, false, false), std::domain_error);
}

TEST_CASE("maximum problem size for 11 GiB") {
    const std::uint64_t budget = 11ull << 30;
    // published limits in millions of nodes across the four feature rows
    const double expect[4][3] = {
        {29.8, 18.1, 10.1}, // single, linear, no corrections
        {13.0, 7.0, 3.7},   // single, linear, corrections
        {13.0, 7.0, 3.7},   // multi/n-linear, no corrections
        {8.3, 4.4, 2.2},    // multi/n-linear, corrections
    };
    const bool multi[4] = {false, false, true, true};
    const bool corr[4] = {false, true, false, true};
    const Index groups[3] = {64, 128, 256};
    for (int row = 0; row < 4; ++row)
        for (int col = 0; col < 3; ++col) {
            const double max_n =
                double(bench::max_nodes_for_memory(budget, groups[col], multi[row], corr[row])) /
                1e6;
            CHECK(std::abs(max_n - expect[row][col]) <= 0.1);
        }
}

TEST_CASE("family size spread") {
    const std::vector<Real> one = {0, 0, 0};
    const auto spread1 = bench::family_size_spread(build_family(one, 1));
    CHECK(spread1.min == 0);
    CHECK(spread1.max == 0);
    CHECK(spread1.mean == 0);

    GridDesc grid;
    grid.spacing = 1;
    grid.counts = {10, 10, 10};
    const auto coords = grid_coordinates(grid);
    const auto spread =
        bench::family_size_spread(build_family(coords, Real(std::numbers::pi), &grid));
    CHECK(spread.max == 122); // interior lattice count at horizon pi
    CHECK(spread.min > 0);
    CHECK(spread.mean > double(spread.min));
    CHECK(spread.mean < double(spread.max));
}

TEST_CASE("jitter widens the family-size spread and doubles the group size") {
    GridDesc grid;
    grid.spacing = 1;
    grid.counts = {14, 14, 14};
    auto coords = grid_coordinates(grid);
    NeighborList regular = build_family(coords, Real(std::numbers::pi), &grid);
    CHECK(regular.group_size == 128);

    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> jitter(-0.25, 0.25);
    for (auto& c : coords)
        c += Real(jitter(rng));
    NeighborList irregular = build_family(coords, Real(std::numbers::pi));
    const auto spread = bench::family_size_spread(irregular);
    CHECK(spread.max > 128);
    CHECK(irregular.group_size == 256);
    const auto regular_spread = bench::family_size_spread(regular);
    CHECK(spread.max - spread.min > regular_spread.max - regular_spread.min);
}

TEST_CASE("tabulated horizon ratios fill their group size on a regular grid") {
    CHECK(oracles::lattice_ball_count(double(bench::horizon_ratio_for_group(32))) == 32);
    CHECK(oracles::lattice_ball_count(double(bench::horizon_ratio_for_group(64))) == 56);
    CHECK(oracles::lattice_ball_count(double(bench::horizon_ratio_for_group(128))) == 122);
    CHECK(oracles::lattice_ball_count(double(bench::horizon_ratio_for_group(256))) == 250);
    CHECK_THROWS_AS(bench::horizon_ratio_for_group(77), std::domain_error);
}

TEST_CASE("scaling suite smoke run") {
    bench::ScalingOptions options;
    options.grid_dims = {{6, 6, 6}, {6, 6, 12}};
    options.group_sizes = {32};
    options.steps = 5;
    options.repeats = 1;
    bench::BenchReport report = bench::run_scaling_suite(options);
    REQUIRE(report.rows.size() == 4); // 2 sizes x 2 variants
    for (const auto& row : report.rows) {
        CHECK(row.wall_s > 0);
        CHECK(row.steps == 5);
        CHECK(row.group_size == 32);
    }
    REQUIRE(report.fits.size() == 2);
    for (const auto& fit : report.fits)
        CHECK(fit.nodes_per_second > 0);

    const auto dir = std::filesystem::temp_directory_path() /
                     ("peridyn_bench_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(dir);
    bench::write_report_csv(report, dir / "bench.csv");
    std::ifstream in(dir / "bench.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "n,N,variant,steps,wall_s");
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);)
        ++lines;
    CHECK(lines == report.rows.size());
    std::filesystem::remove_all(dir);

    CHECK(bench::summarize(report).find("dn/dt") != std::string::npos);
}

TEST_CASE("memory budget skips oversized configurations") {
    bench::ScalingOptions options;
    options.grid_dims = {{6, 6, 6}};
    options.group_sizes = {32};
    options.memory_budget = 10; // nothing fits
    bench::BenchReport report = bench::run_scaling_suite(options);
    CHECK(report.rows.empty());
    REQUIRE(report.notes.size() == 1);
    CHECK(report.notes[0].find("skipped") != std::string::npos);
}
