#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "peridyn/calibrate.hpp"
#include "peridyn/engine.hpp"
#include "peridyn/geometry.hpp"

namespace peridyn::config {

/// Configuration or input validation problem; maps to exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Axis-aligned box, inclusive on all faces.
struct Box {
    Vec3 lo, hi;
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
               p.z <= hi.z;
    }
};

/// Node selection: an axis-aligned box or an explicit index list.
struct RegionSpec {
    std::string name;
    std::optional<Box> box;
    std::vector<Index> indices;
};

struct BcSpec {
    std::string name;
    BCKind kind = BCKind::displacement;
    RegionSpec region;
    std::array<bool, 3> axes{false, false, false};
    Real magnitude = 0;
    RampProfile ramp;
    bool no_failure = false;
};

struct TipSpec {
    std::string name;
    RegionSpec region;
};

struct IcSpec {
    std::string name;
    RegionSpec region;
    Vec3 velocity;
};

struct MaterialSpec {
    std::string model = "pmb"; // pmb | bilinear | trilinear | nlinear
    Real density = 0;
    Real damping = 0;
    std::optional<Real> c;
    std::optional<Real> bulk_modulus;
    std::optional<Real> critical_stretch;
    std::optional<Real> fracture_energy;
    std::optional<Real> youngs_modulus;
    std::string regime = "3d";
    std::optional<Real> s0, s1;
    Real kink_beta = Real(0.25);
    std::vector<Real> breakpoints, forces; // nlinear
};

struct BenchSpec {
    std::vector<std::array<Index, 3>> grids;
    std::vector<Index> group_sizes;
    std::vector<std::string> variants{"bpr", "node"};
    Index steps = 200;
    int repeats = 3;
    double memory_budget_gib = 8;
    unsigned threads = 1;
};

struct CalibrateSpec {
    std::string curve_path;
    std::vector<std::string> order{"s0", "s1", "sc"};
    calib::Bracket c_bracket, s0_bracket, s1_bracket, sc_bracket;
    std::vector<std::string> control; // "tipA tipB axis" or "tipA axis"
    std::string force_tip;
    int force_axis = 1;
    Real force_scale = 1;
    Real elastic_limit = 0;
    int max_cycles = 8;
    bool warm_restart = true;
};

struct RunConfig {
    std::string mesh_path;
    std::optional<GridDesc> grid;
    std::optional<Real> horizon;
    std::optional<Real> m_ratio;
    MaterialSpec material;
    bool surface_correction = false;
    std::string v0_mode = "analytic"; // analytic | max_observed | explicit
    Real v0_packing = 1;
    Real v0_value = 0;
    std::optional<Real> dt; // unset = auto hint
    Real dt_safety = Real(0.8);
    Index steps = 0;
    Index write_every = 0;
    std::string integrator = "verlet";
    std::string variant = "bpr";
    std::string precision = "f64";
    std::string out_dir = "out";
    std::string cache_family;
    unsigned threads = 0;
    std::vector<BcSpec> bcs;
    std::vector<TipSpec> tips;
    std::vector<TipSpec> no_failure_zones;
    std::vector<IcSpec> ics;
    BenchSpec bench;
    CalibrateSpec calibrate;
};

/// Parse the flat key=value format.  Unknown keys are rejected with the
/// nearest valid key named in the message.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config(std::istream& in, const std::string& source_name);

/// Everything assembled and validated, ready to simulate.
struct AssembledModel {
    ParticleSet particles;
    NeighborList family;
    Corrections corrections;
    BoundaryConditions bc;
    DamageModel model;
    Real dt = 0;
    IntegratorKind integrator = IntegratorKind::velocity_verlet;
    KernelVariant variant = KernelVariant::bond_parallel;
    bool family_from_cache = false;
};

/// Resolve a region to node indices; empty selections are an error naming
/// the region.
std::vector<Index> resolve_region(const RegionSpec& region, std::span<const Real> coords);

/// Build particles, family (from cache when allowed and present),
/// corrections, boundary conditions and the damage model from a config.
AssembledModel assemble(const RunConfig& cfg, bool use_cache);

ModelBundle bundle_of(const AssembledModel& assembled);

/// Fresh state with initial velocities applied.
SimulationState initial_state(const AssembledModel& assembled, const RunConfig& cfg);

/// Solver-in-the-loop curve evaluator for calibration.  When warm restarts
/// are enabled, evaluations that only change the softening parameters resume
/// from a saved elastic-segment state instead of re-running it.
calib::SimCurveFn make_curve_rig(const AssembledModel& assembled, const RunConfig& cfg);

} // namespace peridyn::config
