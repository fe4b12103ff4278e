#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace peridyn {

#ifdef PERIDYN_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

using Index = std::int64_t;

/// Cartesian 3-vector used throughout the solver.
struct Vec3 {
    Real x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(Real s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    Real norm() const { return std::sqrt(x * x + y * y + z * z); }
    Real operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 load_vec3(std::span<const Real> flat, Index i) {
    return {flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]};
}

inline void store_vec3(std::span<Real> flat, Index i, const Vec3& v) {
    flat[3 * i] = v.x;
    flat[3 * i + 1] = v.y;
    flat[3 * i + 2] = v.z;
}

/// Immutable reference configuration: node coordinates, lumped volumes,
/// densities and material tags.  All arrays have one entry per node
/// (coords is flat n x 3, row major).
struct ParticleSet {
    std::vector<Real> coords;
    std::vector<Real> volume;
    std::vector<Real> density;
    std::vector<std::uint16_t> material_tag;

    Index size() const { return static_cast<Index>(volume.size()); }
    void validate() const;
};

/// Padded flat connectivity.  Row i holds the indices of the nodes bonded to
/// node i, padded with -1 up to group_size; a broken bond is marked by
/// writing -1 in place, so slot k of row i stays aligned with any per-bond
/// array (history, corrections, types) for the lifetime of the model.
struct NeighborList {
    std::vector<std::int32_t> entries;         // n * group_size, -1 padded
    std::vector<std::int32_t> n_neigh;         // unbroken bonds per node
    std::vector<std::int32_t> initial_n_neigh; // counts at construction
    std::vector<std::uint8_t> bond_type;       // optional n * group_size; empty = single type
    Index group_size = 0;                      // N, a power of two
    Real horizon = 0;

    Index node_count() const { return static_cast<Index>(n_neigh.size()); }
    void validate() const;
};

/// Piecewise-linear force-stretch law for one bond type.  The envelope runs
/// through the origin with slope `stiffness`, then through
/// (breakpoints[k], forces[k]); the last breakpoint is the critical stretch
/// beyond which the bond is broken and the force is identically zero.
/// PMB is the single-segment case: breakpoints = {s_c}, forces = {c * s_c}.
struct DamageLaw {
    Real stiffness = 0;            // micromodulus c, N/m^6
    std::vector<Real> breakpoints; // strictly increasing, > 0
    std::vector<Real> forces;      // envelope value at each breakpoint

    Real critical_stretch() const { return breakpoints.back(); }
    void validate() const;

    static DamageLaw pmb(Real c, Real s_c);
    /// Linear to (s0, c*s0), then linear decay to (s_c, 0).
    static DamageLaw bilinear(Real c, Real s0, Real s_c);
    /// Linear to (s0, c*s0), kink at (s1, kink_beta * c * s0), decay to (s_c, 0).
    static DamageLaw trilinear(Real c, Real s0, Real s1, Real s_c, Real kink_beta = Real(0.25));
};

/// Damage laws indexed by bond type plus the dynamic-relaxation damping.
struct DamageModel {
    std::vector<DamageLaw> laws;
    Real damping = 0; // eta, kg/(m^3 s)
    bool use_surface_correction = false;
    bool use_partial_volume = false;

    const DamageLaw& law(int bond_type) const;
    /// True when any law has more than one segment; those need per-bond
    /// stretch history.
    bool needs_history() const;
    void validate() const;
};

/// Mutable fields of a running simulation.  Restart-complete: saving and
/// reloading u, v, a, step, connectivity and bond_history reproduces the
/// trajectory bit for bit.
struct SimulationState {
    std::vector<Real> u, v, a; // flat n x 3
    Index step = 0;
    NeighborList connectivity;
    std::vector<Real> bond_history; // n * N max attained stretch; empty unless needed

    Index size() const { return connectivity.node_count(); }
};

/// Fresh state at step 0 with the given connectivity snapshot.
SimulationState make_state(const NeighborList& family, bool with_history);

enum class BCKind : std::uint8_t { free = 0, displacement = 1, force = 2 };

/// Time profile scaling a boundary-condition magnitude over steps.
/// quintic_smooth has zero first and second derivatives at both ends.
struct RampProfile {
    enum class Kind : std::uint8_t { constant, linear, quintic_smooth };
    Kind kind = Kind::constant;
    Index rise_steps = 0;
    Real target_scale = 1;

    Real scale(Index step) const;
    /// d(scale)/d(step); divide by dt for a physical rate.
    Real rate(Index step) const;
    Real accel(Index step) const;
};

/// Per-node, per-axis boundary conditions plus the named node sets that are
/// observed during a run.
struct BoundaryConditions {
    std::vector<BCKind> kind;        // n * 3
    std::vector<Real> magnitude;     // n * 3 (m for displacement, N/m^3 for force)
    std::vector<std::uint8_t> ramp_id; // n * 3, index into ramps
    std::vector<RampProfile> ramps;  // ramps[0] exists, constant
    std::vector<std::uint8_t> no_failure; // n
    std::map<std::string, std::vector<Index>> tip_sets;

    static BoundaryConditions none(Index n);
    void validate(Index n) const;
};

/// Per-bond factors applied inside the force kernel, each aligned with the
/// neighbor list.  Empty arrays mean identity.  no_failure mirrors the
/// boundary-condition flags; a bond is exempt from breaking when either
/// endpoint carries the flag.
struct Corrections {
    std::vector<Real> lambda;            // surface correction, n * N
    std::vector<Real> beta;              // partial volume correction, n * N
    std::vector<std::uint8_t> no_failure; // n
};

/// Force densities (N/m^3) accumulated during one force pass.  body_force is
/// the bond contribution; external_force comes from force-type boundary
/// conditions.  The resultant driving the integrator is their sum.
struct ForceField {
    std::vector<Real> body_force;     // flat n x 3
    std::vector<Real> external_force; // flat n x 3

    void resize(Index n) {
        body_force.assign(3 * n, 0);
        external_force.assign(3 * n, 0);
    }
};

} // namespace peridyn
