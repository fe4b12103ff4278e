#include "peridyn/cli_commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include "peridyn/bench.hpp"
#include "peridyn/io.hpp"

namespace peridyn::cli {

namespace fs = std::filesystem;

void apply_overrides(config::RunConfig& cfg, const Overrides& overrides) {
    if (!overrides.out.empty())
        cfg.out_dir = overrides.out;
    if (!overrides.precision.empty())
        cfg.precision = overrides.precision;
    if (!overrides.variant.empty())
        cfg.variant = overrides.variant;
}

namespace {

fs::path ensure_out_dir(const config::RunConfig& cfg) {
    fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw std::runtime_error("cannot create output directory " + dir.string());
    return dir;
}

std::string snapshot_name(Index step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "snap_%08lld.pdsnap", static_cast<long long>(step));
    return buf;
}

void write_tip_csv(const fs::path& path, const std::vector<TipRecord>& records) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open " + path.string());
    out << "step,ux,uy,uz,vx,vy,vz,ax,ay,az,fbx,fby,fbz,fex,fey,fez\n";
    for (const auto& r : records) {
        out << r.step;
        const Vec3 fields[5] = {r.mean_u, r.mean_v, r.mean_a, r.body_force_sum,
                                r.external_force_sum};
        for (const auto& v : fields)
            out << ',' << io::format_real(double(v.x)) << ',' << io::format_real(double(v.y))
                << ',' << io::format_real(double(v.z));
        out << '\n';
    }
    if (!out)
        throw std::runtime_error("write failed for " + path.string());
}

} // namespace

void cmd_build(const config::RunConfig& cfg) {
    if (cfg.cache_family.empty())
        throw config::ConfigError("build: set cache.family to the cache path to write");
    config::AssembledModel assembled = config::assemble(cfg, /*use_cache=*/false);
    const fs::path cache_path(cfg.cache_family);
    if (cache_path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(cache_path.parent_path(), ec);
    }
    io::save_cache(assembled.family, assembled.corrections, cache_path);
    const auto spread = bench::family_size_spread(assembled.family);
    std::cout << "built family for " << assembled.particles.size() << " nodes: N="
              << assembled.family.group_size << ", |H| in [" << spread.min << ", " << spread.max
              << "], mean " << spread.mean << "\n";
    std::cout << "cache written to " << cache_path.string() << "\n";
}

void cmd_run(const config::RunConfig& cfg, const Overrides& overrides) {
    if (cfg.steps < 1)
        throw config::ConfigError("run: steps must be >= 1");
    config::AssembledModel assembled = config::assemble(cfg, /*use_cache=*/true);
    const fs::path out_dir = ensure_out_dir(cfg);

    SimulationState state;
    Index first_step = 0;
    if (!overrides.restart.empty()) {
        state = io::load_state(overrides.restart);
        if (state.size() != assembled.particles.size())
            throw config::ConfigError("restart state holds " + std::to_string(state.size()) +
                                      " nodes, mesh has " +
                                      std::to_string(assembled.particles.size()));
        first_step = overrides.first_step.value_or(state.step);
    } else {
        state = config::initial_state(assembled, cfg);
        first_step = overrides.first_step.value_or(0);
    }

    ModelBundle bundle = config::bundle_of(assembled);
    SimulateOptions opts;
    opts.steps = cfg.steps;
    opts.write_every = cfg.write_every;
    opts.first_step = first_step;
    opts.integrator = assembled.integrator;
    opts.variant = assembled.variant;

    if (first_step == 0)
        io::write_snapshot(out_dir / snapshot_name(0),
                           io::make_snapshot(state, assembled.particles));

    std::size_t snapshots = first_step == 0 ? 1 : 0;
    auto result = simulate(bundle, state, opts,
                           [&](const SimulationState& st, const ForceField&) {
                               io::write_snapshot(out_dir / snapshot_name(st.step),
                                                  io::make_snapshot(st, assembled.particles));
                               ++snapshots;
                           });

    const Index final_step = first_step + cfg.steps;
    if (cfg.write_every == 0 || final_step % cfg.write_every != 0) {
        io::write_snapshot(out_dir / snapshot_name(final_step),
                           io::make_snapshot(state, assembled.particles));
        ++snapshots;
    }
    io::save_state(state, out_dir / "state_final.pdst");
    for (const auto& [name, records] : result.tips)
        write_tip_csv(out_dir / ("tip_" + name + ".csv"), records);

    std::cout << "ran " << cfg.steps << " steps (" << first_step << " -> " << final_step << "), "
              << snapshots << " snapshots, " << result.tips.size() << " tip series in "
              << out_dir.string() << "\n";
}

void cmd_bench(const config::RunConfig& cfg) {
    if (cfg.bench.grids.empty() || cfg.bench.group_sizes.empty())
        throw config::ConfigError("bench: set bench.grids and bench.group_sizes");
    bench::ScalingOptions options;
    options.grid_dims = cfg.bench.grids;
    options.group_sizes = cfg.bench.group_sizes;
    options.variants.clear();
    for (const auto& v : cfg.bench.variants) {
        if (v == "bpr")
            options.variants.push_back(KernelVariant::bond_parallel);
        else if (v == "node")
            options.variants.push_back(KernelVariant::node_parallel);
        else
            throw config::ConfigError("bench.variants entries must be bpr or node");
    }
    options.steps = cfg.bench.steps;
    options.repeats = cfg.bench.repeats;
    options.memory_budget = std::uint64_t(cfg.bench.memory_budget_gib * double(1ull << 30));
    options.threads = cfg.bench.threads;

    const fs::path out_dir = ensure_out_dir(cfg);
    bench::BenchReport report = bench::run_scaling_suite(options);
    bench::write_report_csv(report, out_dir / "bench.csv");
    const std::string summary = bench::summarize(report);
    std::ofstream(out_dir / "bench_summary.txt") << summary;
    std::cout << summary;
}

void cmd_calibrate(const config::RunConfig& cfg) {
    if (cfg.calibrate.curve_path.empty())
        throw config::ConfigError("calibrate: set calibrate.curve to the experiment CSV");
    auto check_bracket = [](const calib::Bracket& b, const char* name) {
        if (!(b.lo < b.hi))
            throw config::ConfigError(std::string("calibrate: bracket ") + name +
                                      " must be 'lo hi' with lo < hi");
    };
    check_bracket(cfg.calibrate.c_bracket, "calibrate.c_bracket");
    check_bracket(cfg.calibrate.s0_bracket, "calibrate.s0_bracket");
    check_bracket(cfg.calibrate.s1_bracket, "calibrate.s1_bracket");
    check_bracket(cfg.calibrate.sc_bracket, "calibrate.sc_bracket");

    config::AssembledModel assembled = config::assemble(cfg, /*use_cache=*/true);
    calib::ExperimentCurve experiment = calib::read_curve_csv(cfg.calibrate.curve_path);
    calib::SimCurveFn rig = config::make_curve_rig(assembled, cfg);

    calib::CalibrateOptions options;
    options.c_bracket = cfg.calibrate.c_bracket;
    options.s0_bracket = cfg.calibrate.s0_bracket;
    options.s1_bracket = cfg.calibrate.s1_bracket;
    options.sc_bracket = cfg.calibrate.sc_bracket;
    options.order = cfg.calibrate.order;
    options.max_cycles = cfg.calibrate.max_cycles;
    options.elastic_control_limit = cfg.calibrate.elastic_limit;

    calib::CalibrateResult result = calib::calibrate_trilinear(rig, experiment, options);

    const fs::path out_dir = ensure_out_dir(cfg);
    calib::write_estimates(out_dir / "estimates.txt", result);
    std::cout << "calibrated in " << result.cycles << " cycle(s), "
              << (result.converged ? "converged" : "NOT converged") << ", mse "
              << io::format_real(double(result.mse)) << "\n";
    std::cout << "c  = " << io::format_real(double(result.estimate.c)) << "\n"
              << "s0 = " << io::format_real(double(result.estimate.s0)) << "\n"
              << "s1 = " << io::format_real(double(result.estimate.s1)) << "\n"
              << "sc = " << io::format_real(double(result.estimate.sc)) << "\n";
}

int run_command(const std::string& command, const std::string& config_path,
                const Overrides& overrides) {
    try {
        config::RunConfig cfg = config::parse_config(config_path);
        apply_overrides(cfg, overrides);
        if (command == "build")
            cmd_build(cfg);
        else if (command == "run")
            cmd_run(cfg, overrides);
        else if (command == "bench")
            cmd_bench(cfg);
        else if (command == "calibrate")
            cmd_calibrate(cfg);
        else {
            std::cerr << "unknown command '" << command << "'\n";
            return 1;
        }
        return 0;
    } catch (const config::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
}

} // namespace peridyn::cli
