#include "peridyn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <tuple>

#include "peridyn/geometry.hpp"
#include "peridyn/parallel.hpp"

namespace peridyn::bench {

std::uint64_t memory_estimate(Index n, Index group_size, bool multi_material,
                              bool stiffness_corrections) {
    if (n < 1 || group_size < 1)
        throw std::domain_error("memory_estimate: n and N must be >= 1");
    const std::uint64_t un = std::uint64_t(n);
    const std::uint64_t N = std::uint64_t(group_size);
    const std::uint64_t doubles = stiffness_corrections ? (16 + N) * un : 16 * un;
    const std::uint64_t ints = multi_material ? (3 * N + 3) * un : (N + 3) * un;
    return doubles * 8 + ints * 4;
}

Index max_nodes_for_memory(std::uint64_t budget_bytes, Index group_size, bool multi_material,
                           bool stiffness_corrections) {
    const std::uint64_t per_node = memory_estimate(1, group_size, multi_material,
                                                   stiffness_corrections);
    return Index(budget_bytes / per_node);
}

FamilySpread family_size_spread(const NeighborList& family) {
    FamilySpread spread;
    const Index n = family.node_count();
    if (n == 0)
        return spread;
    Index lo = family.n_neigh[0], hi = family.n_neigh[0];
    double sum = 0;
    for (Index i = 0; i < n; ++i) {
        const Index c = family.n_neigh[std::size_t(i)];
        lo = std::min(lo, c);
        hi = std::max(hi, c);
        sum += double(c);
    }
    spread.min = lo;
    spread.max = hi;
    spread.mean = sum / double(n);
    return spread;
}

Real horizon_ratio_for_group(Index group_size) {
    // interior family sizes on a cubic lattice: 32, 56, 122, 250
    switch (group_size) {
    case 32:
        return Real(2.0);
    case 64:
        return Real(2.25);
    case 128:
        return std::numbers::pi_v<Real>;
    case 256:
        return Real(3.8);
    default:
        throw std::domain_error("horizon_ratio_for_group: no ratio tabulated for N = " +
                                std::to_string(group_size));
    }
}

namespace {

const char* variant_name(KernelVariant v) {
    return v == KernelVariant::bond_parallel ? "bpr" : "node";
}

ModelBundle benchmark_bundle(const std::array<Index, 3>& dims, Real horizon_ratio,
                             NeighborList& family_out) {
    GridDesc grid;
    grid.spacing = 1;
    grid.counts = dims;
    ModelBundle bundle;
    bundle.particles.coords = grid_coordinates(grid);
    const Index n = grid.node_count();
    bundle.particles.volume.assign(std::size_t(n), 1);
    bundle.particles.density.assign(std::size_t(n), 1);
    bundle.particles.material_tag.assign(std::size_t(n), 0);
    // stiff enough for real arithmetic, critical stretch far out of reach
    bundle.model.laws.push_back(DamageLaw::pmb(1, Real(1e6)));
    bundle.bc = BoundaryConditions::none(n);
    bundle.dt = Real(1e-3);
    family_out = build_family(bundle.particles.coords, horizon_ratio * grid.spacing, &grid);
    return bundle;
}

void seed_displacements(SimulationState& state, const ParticleSet& particles) {
    const Index n = particles.size();
    for (Index i = 0; i < n; ++i) {
        const Vec3 x = load_vec3(particles.coords, i);
        store_vec3(state.u, i,
                   {Real(1e-4) * std::sin(Real(0.1) * x.x + Real(0.2) * x.y),
                    Real(1e-4) * std::cos(Real(0.15) * x.y + Real(0.1) * x.z),
                    Real(1e-4) * std::sin(Real(0.12) * x.z + Real(0.17) * x.x)});
    }
}

double time_run(const ModelBundle& bundle, const NeighborList& family, KernelVariant variant,
                Index steps) {
    SimulationState state = make_state_for(bundle, family);
    seed_displacements(state, bundle.particles);
    SimulateOptions opts;
    opts.steps = steps;
    opts.variant = variant;
    const auto t0 = std::chrono::steady_clock::now();
    simulate(bundle, state, opts);
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

double max_abs(const std::vector<Real>& v) {
    Real m = 0;
    for (Real x : v)
        m = std::max(m, std::abs(x));
    return double(m);
}

void cross_check(const ModelBundle& bundle, const NeighborList& family, Index steps) {
    SimulateOptions opts;
    opts.steps = std::min<Index>(steps, 5);
    ForceField fa, fb;
    SimulationState sa = make_state_for(bundle, family);
    SimulationState sb = make_state_for(bundle, family);
    seed_displacements(sa, bundle.particles);
    seed_displacements(sb, bundle.particles);
    opts.variant = KernelVariant::bond_parallel;
    simulate(bundle, sa, opts);
    opts.variant = KernelVariant::node_parallel;
    simulate(bundle, sb, opts);
    compute_forces_bond_parallel(sa, bundle.particles, bundle.model, bundle.corrections, fa);
    compute_forces_node_parallel(sb, bundle.particles, bundle.model, bundle.corrections, fb);
    const double scale = std::max(max_abs(fa.body_force), 1e-300);
    for (std::size_t i = 0; i < fa.body_force.size(); ++i) {
        const double d = std::abs(double(fa.body_force[i]) - double(fb.body_force[i]));
        const double ref = std::max({std::abs(double(fa.body_force[i])),
                                     std::abs(double(fb.body_force[i])), scale});
        if (d > 1e-12 * ref)
            throw std::runtime_error("benchmark cross-check: kernel variants diverged");
    }
}

struct SeriesKey {
    Index group_size;
    std::string variant;
    bool operator<(const SeriesKey& o) const {
        return std::tie(group_size, variant) < std::tie(o.group_size, o.variant);
    }
};

} // namespace

BenchReport run_scaling_suite(const ScalingOptions& options) {
    BenchReport report;
    const unsigned previous_cap = get_worker_cap();
    if (options.threads)
        set_worker_cap(options.threads);

    for (Index group : options.group_sizes) {
        const Real m = horizon_ratio_for_group(group);
        for (const auto& dims : options.grid_dims) {
            const Index n = dims[0] * dims[1] * dims[2];
            const std::uint64_t need = memory_estimate(n, group, false, false);
            if (need > options.memory_budget) {
                report.notes.push_back("skipped n=" + std::to_string(n) + " N=" +
                                       std::to_string(group) + ": estimated " +
                                       std::to_string(need) + " bytes exceeds budget");
                continue;
            }
            NeighborList family;
            ModelBundle bundle = benchmark_bundle(dims, m, family);
            if (family.group_size != group) {
                report.notes.push_back("skipped n=" + std::to_string(n) + ": natural group size " +
                                       std::to_string(family.group_size) + " != requested " +
                                       std::to_string(group));
                continue;
            }
            if (options.cross_check_forces && options.variants.size() > 1)
                cross_check(bundle, family, options.steps);
            for (KernelVariant variant : options.variants) {
                std::vector<double> times;
                for (int r = 0; r < std::max(1, options.repeats); ++r)
                    times.push_back(time_run(bundle, family, variant, options.steps));
                std::sort(times.begin(), times.end());
                BenchRow row;
                row.n = n;
                row.group_size = group;
                row.variant = variant_name(variant);
                row.steps = options.steps;
                row.wall_s = times[times.size() / 2];
                report.rows.push_back(row);
            }
        }
    }
    set_worker_cap(previous_cap);

    // least-squares t = a + b n per (N, variant); nodes_per_second = 1/b
    std::map<SeriesKey, std::vector<std::pair<double, double>>> series;
    for (const auto& row : report.rows)
        series[{row.group_size, row.variant}].push_back({double(row.n), row.wall_s});
    for (const auto& [key, pts] : series) {
        if (pts.size() < 2)
            continue;
        double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
        for (auto [x, y] : pts) {
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            syy += y * y;
        }
        const double k = double(pts.size());
        const double denom = k * sxx - sx * sx;
        if (denom == 0)
            continue;
        const double b = (k * sxy - sx * sy) / denom;
        const double ss_tot = syy - sy * sy / k;
        double ss_res = 0;
        const double a = (sy - b * sx) / k;
        for (auto [x, y] : pts) {
            const double e = y - (a + b * x);
            ss_res += e * e;
        }
        SeriesFit fit;
        fit.group_size = key.group_size;
        fit.variant = key.variant;
        fit.nodes_per_second = b > 0 ? 1.0 / b : 0.0;
        fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
        report.fits.push_back(fit);
    }
    return report;
}

void write_report_csv(const BenchReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_report_csv: cannot open " + path.string());
    out << "n,N,variant,steps,wall_s\n";
    for (const auto& row : report.rows)
        out << row.n << ',' << row.group_size << ',' << row.variant << ',' << row.steps << ','
            << row.wall_s << '\n';
    if (!out)
        throw std::runtime_error("write_report_csv: write failed for " + path.string());
}

std::string summarize(const BenchReport& report) {
    std::ostringstream out;
    out << "scaling suite: " << report.rows.size() << " timed runs\n";
    for (const auto& fit : report.fits) {
        out << "  N=" << fit.group_size << " variant=" << fit.variant
            << ": dn/dt=" << std::llround(fit.nodes_per_second) << " nodes/s, R^2=" << fit.r_squared
            << '\n';
    }
    for (const auto& note : report.notes)
        out << "  note: " << note << '\n';
    return out.str();
}

} // namespace peridyn::bench
