#pragma once

#include <functional>
#include <span>

#include "peridyn/types.hpp"

namespace peridyn {

/// Deterministic pairwise tree sum with halving strides.  The contribution
/// buffer is consumed in place; its size must be a power of two.  Broken and
/// padded slots hold exact zeros, so no masking is needed.
Vec3 reduce_group(std::span<Vec3> contributions);

enum class KernelVariant { bond_parallel, node_parallel };

/// Fused bond-force / bond-break kernel laid out like the data-parallel
/// version: every slot of every group is visited, live bonds contribute
///   f = (eta+xi)/|eta+xi| * f_scalar(s) * lambda_ij * beta_ij * V_j,
/// bonds at or beyond the critical stretch are zapped to -1 in place, and
/// each group is summed by reduce_group.  Work is split over nodes; each
/// group writes only its own row and force slot, so the result does not
/// depend on the worker count.
void compute_forces_bond_parallel(SimulationState& state, const ParticleSet& particles,
                                  const DamageModel& model, const Corrections& corrections,
                                  ForceField& out);

/// Node-parallel reference kernel: same per-bond physics, serial
/// left-to-right summation per node.  Kept permanently as the correctness
/// oracle and benchmark baseline.
void compute_forces_node_parallel(SimulationState& state, const ParticleSet& particles,
                                  const DamageModel& model, const Corrections& corrections,
                                  ForceField& out);

void compute_forces(KernelVariant variant, SimulationState& state, const ParticleSet& particles,
                    const DamageModel& model, const Corrections& corrections, ForceField& out);

/// Forward Euler: a = F/rho, v += dt a, u += dt v_old.
void step_euler(SimulationState& state, const ForceField& forces, Real dt,
                std::span<const Real> density);

/// Euler-Cromer: a = F/rho, v += dt a, u += dt v_new.
void step_euler_cromer(SimulationState& state, const ForceField& forces, Real dt,
                       std::span<const Real> density);

/// Position half of a velocity-Verlet step: u += dt v + dt^2/2 a.
void verlet_drift(SimulationState& state, Real dt);

/// Velocity half, applied after the force pass at the advanced positions:
///   v_half = v + dt/2 a
///   a      = (F - eta v_half) / rho
///   v      = v_half + dt/2 a
void verlet_kick(SimulationState& state, const ForceField& forces, Real dt, Real damping,
                 std::span<const Real> density);

using ForceEval = std::function<void(SimulationState&, ForceField&)>;

/// One full velocity-Verlet step: drift, re-evaluate forces at the advanced
/// positions, kick.  With zero damping on a conservative bond network this
/// is the plain symplectic scheme.
void step_velocity_verlet(SimulationState& state, const ForceEval& forces, ForceField& scratch,
                          Real dt, Real damping, std::span<const Real> density);

/// Overwrite displacement-controlled node-axes with magnitude * ramp(step).
void apply_displacement_positions(SimulationState& state, const BoundaryConditions& bc, Index step);

/// Set velocity and acceleration on displacement-controlled axes to the
/// ramp's analytic derivatives, keeping measured reaction forces meaningful.
void apply_displacement_kinematics(SimulationState& state, const BoundaryConditions& bc, Index step,
                                   Real dt);

/// Add force-type boundary contributions (magnitude * ramp(step), N/m^3)
/// into out.external_force.  Does not clear previous contents.
void accumulate_external_force(const BoundaryConditions& bc, Index step, ForceField& out);

/// Convenience wrapper applying all boundary effects for one step.
void apply_boundary(SimulationState& state, const BoundaryConditions& bc, Index step, Real dt,
                    ForceField& out);

/// Stable time-step estimate
///   dt = safety * min_i sqrt(2 rho_i / sum_j c beta_ij V_j / |xi_ij|)
/// Advisory only; isolated nodes are excluded from the minimum.
Real stable_timestep_hint(const ParticleSet& particles, const DamageModel& model,
                          const NeighborList& family, Real safety = Real(0.8),
                          std::span<const Real> beta = {});

enum class IntegratorKind { velocity_verlet, euler, euler_cromer };

/// Everything that stays fixed over a run.
struct ModelBundle {
    ParticleSet particles;
    DamageModel model;
    Corrections corrections;
    BoundaryConditions bc;
    Real dt = 0;

    void validate() const;
};

struct SimulateOptions {
    Index steps = 0;
    Index write_every = 0; // 0 = no periodic writes
    Index first_step = 0;
    IntegratorKind integrator = IntegratorKind::velocity_verlet;
    KernelVariant variant = KernelVariant::bond_parallel;
};

/// Observed quantities for one tip set at one write: mean kinematics and the
/// force sums (force density times nodal volume, N) over the set.
struct TipRecord {
    Index step = 0;
    Vec3 mean_u, mean_v, mean_a;
    Vec3 body_force_sum, external_force_sum;
};

using TipSeries = std::map<std::string, std::vector<TipRecord>>;

using WriteHook = std::function<void(const SimulationState&, const ForceField&)>;

struct SimulateResult {
    TipSeries tips;
};

/// Advance the state by `steps` steps starting at `first_step`:
/// drift -> boundary -> fused force/break -> kick, with writes every
/// `write_every` steps (on the absolute step count, so a restarted run
/// writes at the same steps as an uninterrupted one).
SimulateResult simulate(const ModelBundle& bundle, SimulationState& state,
                        const SimulateOptions& options, const WriteHook& on_write = {});

/// Fresh state for a bundle: zero fields, connectivity snapshot, history
/// allocated when the damage model needs it.
SimulationState make_state_for(const ModelBundle& bundle, const NeighborList& family);

} // namespace peridyn
