#pragma once

#include <filesystem>

#include "peridyn/engine.hpp"
#include "peridyn/types.hpp"

namespace peridyn::bench {

/// Approximate global memory footprint in bytes for n nodes and group size N:
///   single material, linear law, no corrections:   16n*8 + (N+3)n*4
///   single material, linear law, corrections:      (16+N)n*8 + (N+3)n*4
///   multi material / n-linear, no corrections:     16n*8 + (3N+3)n*4
///   multi material / n-linear, corrections:        (16+N)n*8 + (3N+3)n*4
std::uint64_t memory_estimate(Index n, Index group_size, bool multi_material,
                              bool stiffness_corrections);

/// Largest n fitting the given budget for a feature row, handy against
/// published limits.
Index max_nodes_for_memory(std::uint64_t budget_bytes, Index group_size, bool multi_material,
                           bool stiffness_corrections);

struct FamilySpread {
    Index min = 0;
    Index max = 0;
    double mean = 0;
};

/// Min / max / mean family size over the node index.  Irregular meshes have
/// a wider spread and therefore typically one power of two more padding.
FamilySpread family_size_spread(const NeighborList& family);

struct BenchRow {
    Index n = 0;
    Index group_size = 0;
    std::string variant;
    Index steps = 0;
    double wall_s = 0;
};

/// Fitted wall-time-vs-n line for one (N, variant) series: nodes of headroom
/// per added second, and the linearity of the fit.
struct SeriesFit {
    Index group_size = 0;
    std::string variant;
    double nodes_per_second = 0;
    double r_squared = 0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    std::vector<SeriesFit> fits;
    std::vector<std::string> notes; // skipped configurations etc.
};

/// Horizon-to-spacing ratio that fills the given group size on a regular
/// grid (family size lands in (N/2, N]).
Real horizon_ratio_for_group(Index group_size);

struct ScalingOptions {
    std::vector<std::array<Index, 3>> grid_dims; // one run per grid
    std::vector<Index> group_sizes;
    std::vector<KernelVariant> variants{KernelVariant::bond_parallel,
                                        KernelVariant::node_parallel};
    Index steps = 200;
    int repeats = 1;                                    // rows carry the median
    std::uint64_t memory_budget = 8ull << 30;           // skip configs beyond this
    bool cross_check_forces = true;                     // variants must agree physically
    unsigned threads = 1;                               // pinned for stable timings
};

/// Time the fused force + integrate loop over the requested grid sizes,
/// group sizes and kernel variants with identical physics.  Family
/// construction and I/O are excluded from the timings.
BenchReport run_scaling_suite(const ScalingOptions& options);

/// CSV with header n,N,variant,steps,wall_s.
void write_report_csv(const BenchReport& report, const std::filesystem::path& path);

/// Plain-text summary: per-series slopes and linearity.
std::string summarize(const BenchReport& report);

} // namespace peridyn::bench
