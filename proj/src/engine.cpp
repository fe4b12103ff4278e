#include "peridyn/engine.hpp"

#include <bit>
#include <cmath>

#include "peridyn/formulas.hpp"
#include "peridyn/parallel.hpp"

namespace peridyn {

Vec3 reduce_group(std::span<Vec3> contributions) {
    const std::size_t n = contributions.size();
    if (n == 0 || !std::has_single_bit(n))
        throw std::invalid_argument("reduce_group: size must be a power of two");
    for (std::size_t stride = n / 2; stride > 0; stride /= 2)
        for (std::size_t k = 0; k < stride; ++k)
            contributions[k] += contributions[k + stride];
    return contributions[0];
}

namespace {

void check_state_finite(const SimulationState& state) {
    for (Real x : state.u)
        if (!std::isfinite(x))
            throw std::runtime_error("compute_forces: non-finite displacement at step " +
                                     std::to_string(state.step));
}

void check_force_inputs(const SimulationState& state, const ParticleSet& particles,
                        const DamageModel& model, const Corrections& corr) {
    const Index n = state.size();
    if (particles.size() != n)
        throw std::invalid_argument("compute_forces: particle set does not match state");
    const std::size_t slots = std::size_t(n * state.connectivity.group_size);
    if (!corr.lambda.empty() && corr.lambda.size() != slots)
        throw std::invalid_argument("compute_forces: lambda size mismatch");
    if (!corr.beta.empty() && corr.beta.size() != slots)
        throw std::invalid_argument("compute_forces: beta size mismatch");
    if (!corr.no_failure.empty() && corr.no_failure.size() != std::size_t(n))
        throw std::invalid_argument("compute_forces: no_failure size mismatch");
    if (model.needs_history() && state.bond_history.size() != slots)
        throw std::invalid_argument("compute_forces: model needs per-bond history");
    if (!state.connectivity.bond_type.empty() && model.laws.size() < 2 &&
        state.connectivity.bond_type.size() != slots)
        throw std::invalid_argument("compute_forces: bond_type size mismatch");
    model.validate();
    check_state_finite(state);
}

// Per-slot bond evaluation shared by both kernel variants.  Returns the
// contribution of slot k of node i and performs the fused break check.
inline Vec3 bond_contribution(SimulationState& state, const ParticleSet& particles,
                              const DamageModel& model, const Corrections& corr, Index i,
                              const Vec3& xi_coord, const Vec3& ui, bool i_no_fail, Index idx) {
    auto& slot = state.connectivity.entries[std::size_t(idx)];
    const auto j = slot;
    if (j < 0)
        return {};

    const Vec3 ref = load_vec3(particles.coords, j) - xi_coord;   // xi
    const Vec3 cur = ref + (load_vec3(state.u, j) - ui);          // xi + eta
    const Real ref_len = ref.norm();
    const Real cur_len = cur.norm();
    const Real s = (cur_len - ref_len) / ref_len;

    const DamageLaw& law =
        state.connectivity.bond_type.empty()
            ? model.laws[0]
            : model.laws[state.connectivity.bond_type[std::size_t(idx)]];

    Real f_scalar;
    const bool no_fail =
        i_no_fail || (!corr.no_failure.empty() && corr.no_failure[std::size_t(j)] != 0);
    if (no_fail) {
        // bonds of no-failure nodes never break and keep the bulk stiffness
        f_scalar = law.stiffness * s;
    } else if (law.breakpoints.size() == 1) {
        // PMB: linear up to the critical stretch, no history needed
        if (s >= law.breakpoints[0]) {
            slot = -1;
            --state.connectivity.n_neigh[std::size_t(i)];
            return {};
        }
        f_scalar = law.stiffness * s;
    } else {
        const Real s_c = law.breakpoints.back();
        Real& hist = state.bond_history[std::size_t(idx)];
        const Real h = hist;
        if (s > h)
            hist = s;
        if (h >= s_c || s >= s_c) {
            slot = -1;
            --state.connectivity.n_neigh[std::size_t(i)];
            return {};
        }
        f_scalar = (s >= h) ? envelope_force(law, s) : secant_stiffness(law, h) * s;
    }

    if (cur_len < Real(1e-30))
        return {}; // fully collapsed bond, direction undefined

    Real scale = f_scalar * particles.volume[std::size_t(j)];
    if (!corr.lambda.empty())
        scale *= corr.lambda[std::size_t(idx)];
    if (!corr.beta.empty())
        scale *= corr.beta[std::size_t(idx)];
    return cur * (scale / cur_len);
}

} // namespace

void compute_forces_bond_parallel(SimulationState& state, const ParticleSet& particles,
                                  const DamageModel& model, const Corrections& corr,
                                  ForceField& out) {
    check_force_inputs(state, particles, model, corr);
    const Index n = state.size();
    const Index group = state.connectivity.group_size;
    out.body_force.resize(std::size_t(3 * n));
    if (out.external_force.size() != std::size_t(3 * n))
        out.external_force.assign(std::size_t(3 * n), 0);

    parallel_chunks(n, [&](Index begin, Index end) {
        std::vector<Vec3> cache(static_cast<std::size_t>(group));
        for (Index i = begin; i < end; ++i) {
            const Vec3 xi_coord = load_vec3(particles.coords, i);
            const Vec3 ui = load_vec3(state.u, i);
            const bool i_no_fail =
                !corr.no_failure.empty() && corr.no_failure[std::size_t(i)] != 0;
            for (Index k = 0; k < group; ++k)
                cache[std::size_t(k)] = bond_contribution(state, particles, model, corr, i,
                                                          xi_coord, ui, i_no_fail, i * group + k);
            store_vec3(out.body_force, i, reduce_group(cache));
        }
    });
}

void compute_forces_node_parallel(SimulationState& state, const ParticleSet& particles,
                                  const DamageModel& model, const Corrections& corr,
                                  ForceField& out) {
    check_force_inputs(state, particles, model, corr);
    const Index n = state.size();
    const Index group = state.connectivity.group_size;
    out.body_force.resize(std::size_t(3 * n));
    if (out.external_force.size() != std::size_t(3 * n))
        out.external_force.assign(std::size_t(3 * n), 0);

    parallel_chunks(n, [&](Index begin, Index end) {
        for (Index i = begin; i < end; ++i) {
            const Vec3 xi_coord = load_vec3(particles.coords, i);
            const Vec3 ui = load_vec3(state.u, i);
            const bool i_no_fail =
                !corr.no_failure.empty() && corr.no_failure[std::size_t(i)] != 0;
            Vec3 sum{};
            for (Index k = 0; k < group; ++k)
                sum += bond_contribution(state, particles, model, corr, i, xi_coord, ui,
                                         i_no_fail, i * group + k);
            store_vec3(out.body_force, i, sum);
        }
    });
}

void compute_forces(KernelVariant variant, SimulationState& state, const ParticleSet& particles,
                    const DamageModel& model, const Corrections& corr, ForceField& out) {
    if (variant == KernelVariant::bond_parallel)
        compute_forces_bond_parallel(state, particles, model, corr, out);
    else
        compute_forces_node_parallel(state, particles, model, corr, out);
}

namespace {

inline Vec3 resultant(const ForceField& f, Index i) {
    return load_vec3(f.body_force, i) + load_vec3(f.external_force, i);
}

void check_density(std::span<const Real> density, Index n) {
    if (density.size() != std::size_t(n))
        throw std::invalid_argument("integrator: density array does not match node count");
    for (Real r : density)
        if (!(r > 0))
            throw std::domain_error("integrator: density must be positive");
}

} // namespace

void step_euler(SimulationState& state, const ForceField& forces, Real dt,
                std::span<const Real> density) {
    if (!(dt > 0))
        throw std::domain_error("step_euler: dt must be positive");
    const Index n = state.size();
    check_density(density, n);
    parallel_chunks(n, [&](Index begin, Index end) {
        for (Index i = begin; i < end; ++i) {
            const Vec3 acc = resultant(forces, i) * (Real(1) / density[std::size_t(i)]);
            const Vec3 v_old = load_vec3(state.v, i);
            store_vec3(state.a, i, acc);
            store_vec3(state.v, i, v_old + acc * dt);
            store_vec3(state.u, i, load_vec3(state.u, i) + v_old * dt);
        }
    });
}

void step_euler_cromer(SimulationState& state, const ForceField& forces, Real dt,
                       std::span<const Real> density) {
    if (!(dt > 0))
        throw std::domain_error("step_euler_cromer: dt must be positive");
    const Index n = state.size();
    check_density(density, n);
    parallel_chunks(n, [&](Index begin, Index end) {
        for (Index i = begin; i < end; ++i) {
            const Vec3 acc = resultant(forces, i) * (Real(1) / density[std::size_t(i)]);
            const Vec3 v_new = load_vec3(state.v, i) + acc * dt;
            store_vec3(state.a, i, acc);
            store_vec3(state.v, i, v_new);
            store_vec3(state.u, i, load_vec3(state.u, i) + v_new * dt);
        }
    });
}

void verlet_drift(SimulationState& state, Real dt) {
    if (!(dt > 0))
        throw std::domain_error("verlet_drift: dt must be positive");
    const Index n = state.size();
    parallel_chunks(n, [&](Index begin, Index end) {
        for (Index i = begin; i < end; ++i) {
            const Vec3 u = load_vec3(state.u, i);
            const Vec3 v = load_vec3(state.v, i);
            const Vec3 a = load_vec3(state.a, i);
            store_vec3(state.u, i, u + v * dt + a * (dt * dt / 2));
        }
    });
}

void verlet_kick(SimulationState& state, const ForceField& forces, Real dt, Real damping,
                 std::span<const Real> density) {
    if (!(dt > 0))
        throw std::domain_error("verlet_kick: dt must be positive");
    const Index n = state.size();
    check_density(density, n);
    parallel_chunks(n, [&](Index begin, Index end) {
        for (Index i = begin; i < end; ++i) {
            const Vec3 v = load_vec3(state.v, i);
            const Vec3 a = load_vec3(state.a, i);
            const Vec3 v_half = v + a * (dt / 2);
            const Vec3 a_new =
                (resultant(forces, i) - v_half * damping) * (Real(1) / density[std::size_t(i)]);
            store_vec3(state.a, i, a_new);
            store_vec3(state.v, i, v_half + a_new * (dt / 2));
        }
    });
}

void step_velocity_verlet(SimulationState& state, const ForceEval& forces, ForceField& scratch,
                          Real dt, Real damping, std::span<const Real> density) {
    verlet_drift(state, dt);
    forces(state, scratch);
    verlet_kick(state, scratch, dt, damping, density);
    state.step += 1;
}

void apply_displacement_positions(SimulationState& state, const BoundaryConditions& bc,
                                  Index step) {
    const Index n = state.size();
    for (Index i = 0; i < n; ++i)
        for (int ax = 0; ax < 3; ++ax) {
            const std::size_t slot = std::size_t(3 * i + ax);
            if (bc.kind[slot] != BCKind::displacement)
                continue;
            state.u[slot] = bc.magnitude[slot] * bc.ramps[bc.ramp_id[slot]].scale(step);
        }
}

void apply_displacement_kinematics(SimulationState& state, const BoundaryConditions& bc,
                                   Index step, Real dt) {
    const Index n = state.size();
    for (Index i = 0; i < n; ++i)
        for (int ax = 0; ax < 3; ++ax) {
            const std::size_t slot = std::size_t(3 * i + ax);
            if (bc.kind[slot] != BCKind::displacement)
                continue;
            const auto& ramp = bc.ramps[bc.ramp_id[slot]];
            state.v[slot] = bc.magnitude[slot] * ramp.rate(step) / dt;
            state.a[slot] = bc.magnitude[slot] * ramp.accel(step) / (dt * dt);
        }
}

void accumulate_external_force(const BoundaryConditions& bc, Index step, ForceField& out) {
    const Index n = static_cast<Index>(out.external_force.size()) / 3;
    for (Index i = 0; i < n; ++i)
        for (int ax = 0; ax < 3; ++ax) {
            const std::size_t slot = std::size_t(3 * i + ax);
            if (bc.kind[slot] != BCKind::force)
                continue;
            out.external_force[slot] += bc.magnitude[slot] * bc.ramps[bc.ramp_id[slot]].scale(step);
        }
}

void apply_boundary(SimulationState& state, const BoundaryConditions& bc, Index step, Real dt,
                    ForceField& out) {
    bc.validate(state.size());
    apply_displacement_positions(state, bc, step);
    apply_displacement_kinematics(state, bc, step, dt);
    accumulate_external_force(bc, step, out);
}

Real stable_timestep_hint(const ParticleSet& particles, const DamageModel& model,
                          const NeighborList& family, Real safety, std::span<const Real> beta) {
    const Index n = family.node_count();
    const Index group = family.group_size;
    Real best = std::numeric_limits<Real>::infinity();
    for (Index i = 0; i < n; ++i) {
        Real stiffness_sum = 0;
        for (Index k = 0; k < group; ++k) {
            const Index idx = i * group + k;
            const auto j = family.entries[std::size_t(idx)];
            if (j == -1)
                continue;
            const Vec3 ref = load_vec3(particles.coords, j) - load_vec3(particles.coords, i);
            const DamageLaw& law =
                family.bond_type.empty() ? model.laws[0] : model.laws[family.bond_type[std::size_t(idx)]];
            Real term = law.stiffness * particles.volume[std::size_t(j)] / ref.norm();
            if (!beta.empty())
                term *= beta[std::size_t(idx)];
            stiffness_sum += term;
        }
        if (stiffness_sum > 0)
            best = std::min(best, std::sqrt(2 * particles.density[std::size_t(i)] / stiffness_sum));
    }
    if (!std::isfinite(best))
        throw std::domain_error("stable_timestep_hint: family has no bonds");
    return safety * best;
}

void ModelBundle::validate() const {
    particles.validate();
    model.validate();
    bc.validate(particles.size());
    if (!(dt > 0))
        throw std::invalid_argument("ModelBundle: dt must be positive");
}

SimulationState make_state_for(const ModelBundle& bundle, const NeighborList& family) {
    return make_state(family, bundle.model.needs_history());
}

namespace {

void record_tips(const BoundaryConditions& bc, const ParticleSet& particles,
                 const SimulationState& state, const ForceField& forces, TipSeries& tips) {
    for (const auto& [name, set] : bc.tip_sets) {
        TipRecord rec;
        rec.step = state.step;
        for (Index i : set) {
            rec.mean_u += load_vec3(state.u, i);
            rec.mean_v += load_vec3(state.v, i);
            rec.mean_a += load_vec3(state.a, i);
            const Real vol = particles.volume[std::size_t(i)];
            rec.body_force_sum += load_vec3(forces.body_force, i) * vol;
            rec.external_force_sum += load_vec3(forces.external_force, i) * vol;
        }
        if (!set.empty()) {
            const Real inv = Real(1) / Real(set.size());
            rec.mean_u = rec.mean_u * inv;
            rec.mean_v = rec.mean_v * inv;
            rec.mean_a = rec.mean_a * inv;
        }
        tips[name].push_back(rec);
    }
}

} // namespace

SimulateResult simulate(const ModelBundle& bundle, SimulationState& state,
                        const SimulateOptions& options, const WriteHook& on_write) {
    if (options.steps < 1)
        throw std::invalid_argument("simulate: steps must be >= 1");
    bundle.validate();
    const Index n = bundle.particles.size();
    if (state.size() != n)
        throw std::invalid_argument("simulate: state does not match the bundle");
    if (bundle.model.needs_history() &&
        state.bond_history.size() != std::size_t(n * state.connectivity.group_size))
        state.bond_history.assign(std::size_t(n * state.connectivity.group_size), 0);

    Corrections corr = bundle.corrections;
    corr.no_failure = bundle.bc.no_failure;

    const Real dt = bundle.dt;
    ForceField forces;
    forces.resize(n);
    SimulateResult result;
    state.step = options.first_step;

    const Index last = options.first_step + options.steps;
    for (Index s = options.first_step; s < last; ++s) {
        if (options.integrator == IntegratorKind::velocity_verlet) {
            verlet_drift(state, dt);
            apply_displacement_positions(state, bundle.bc, s + 1);
            forces.external_force.assign(std::size_t(3 * n), 0);
            accumulate_external_force(bundle.bc, s + 1, forces);
            compute_forces(options.variant, state, bundle.particles, bundle.model, corr, forces);
            verlet_kick(state, forces, dt, bundle.model.damping, bundle.particles.density);
            apply_displacement_kinematics(state, bundle.bc, s + 1, dt);
        } else {
            forces.external_force.assign(std::size_t(3 * n), 0);
            accumulate_external_force(bundle.bc, s, forces);
            compute_forces(options.variant, state, bundle.particles, bundle.model, corr, forces);
            if (options.integrator == IntegratorKind::euler)
                step_euler(state, forces, dt, bundle.particles.density);
            else
                step_euler_cromer(state, forces, dt, bundle.particles.density);
            apply_displacement_positions(state, bundle.bc, s + 1);
            apply_displacement_kinematics(state, bundle.bc, s + 1, dt);
        }
        state.step = s + 1;

        if (options.write_every > 0 && (s + 1) % options.write_every == 0) {
            record_tips(bundle.bc, bundle.particles, state, forces, result.tips);
            if (on_write)
                on_write(state, forces);
        }
    }
    return result;
}

} // namespace peridyn
