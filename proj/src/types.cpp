#include "peridyn/types.hpp"

#include <bit>
#include <cmath>

namespace peridyn {

void ParticleSet::validate() const {
    const auto n = size();
    if (n < 1)
        throw std::invalid_argument("ParticleSet: empty");
    if (coords.size() != std::size_t(3 * n) || density.size() != std::size_t(n) ||
        material_tag.size() != std::size_t(n))
        throw std::invalid_argument("ParticleSet: field lengths differ");
    for (Index i = 0; i < n; ++i) {
        if (!(volume[i] > 0))
            throw std::invalid_argument("ParticleSet: non-positive volume at node " + std::to_string(i));
        if (!(density[i] > 0))
            throw std::invalid_argument("ParticleSet: non-positive density at node " + std::to_string(i));
    }
}

void NeighborList::validate() const {
    const Index n = node_count();
    if (group_size < 1 || !std::has_single_bit(static_cast<std::uint64_t>(group_size)))
        throw std::invalid_argument("NeighborList: group size must be a power of two");
    if (entries.size() != std::size_t(n * group_size))
        throw std::invalid_argument("NeighborList: entries size mismatch");
    if (initial_n_neigh.size() != std::size_t(n))
        throw std::invalid_argument("NeighborList: initial counts missing");
    if (!bond_type.empty() && bond_type.size() != entries.size())
        throw std::invalid_argument("NeighborList: bond_type size mismatch");
    for (Index i = 0; i < n; ++i) {
        std::int32_t live = 0;
        for (Index k = 0; k < group_size; ++k) {
            const auto j = entries[i * group_size + k];
            if (j == -1)
                continue;
            if (j < 0 || j >= n)
                throw std::invalid_argument("NeighborList: entry out of range in row " + std::to_string(i));
            if (j == i)
                throw std::invalid_argument("NeighborList: node " + std::to_string(i) + " bonded to itself");
            ++live;
        }
        if (live != n_neigh[i])
            throw std::invalid_argument("NeighborList: count mismatch in row " + std::to_string(i));
    }
}

void DamageLaw::validate() const {
    if (!(stiffness > 0))
        throw std::invalid_argument("DamageLaw: stiffness must be positive");
    if (breakpoints.empty() || breakpoints.size() != forces.size())
        throw std::invalid_argument("DamageLaw: breakpoints and forces must match and be non-empty");
    Real prev = 0;
    for (std::size_t k = 0; k < breakpoints.size(); ++k) {
        if (!(breakpoints[k] > prev))
            throw std::invalid_argument("DamageLaw: breakpoints must be strictly increasing and positive");
        prev = breakpoints[k];
    }
    // the first segment slope defines the undamaged stiffness
    const Real f0 = stiffness * breakpoints[0];
    if (std::abs(forces[0] - f0) > Real(1e-9) * std::max(std::abs(f0), Real(1)))
        throw std::invalid_argument("DamageLaw: envelope must leave the origin with slope c");
}

DamageLaw DamageLaw::pmb(Real c, Real s_c) {
    DamageLaw law{c, {s_c}, {c * s_c}};
    law.validate();
    return law;
}

DamageLaw DamageLaw::bilinear(Real c, Real s0, Real s_c) {
    DamageLaw law{c, {s0, s_c}, {c * s0, 0}};
    law.validate();
    return law;
}

DamageLaw DamageLaw::trilinear(Real c, Real s0, Real s1, Real s_c, Real kink_beta) {
    DamageLaw law{c, {s0, s1, s_c}, {c * s0, kink_beta * c * s0, 0}};
    law.validate();
    return law;
}

const DamageLaw& DamageModel::law(int bond_type) const {
    if (bond_type < 0 || std::size_t(bond_type) >= laws.size())
        throw std::domain_error("DamageModel: unknown bond type " + std::to_string(bond_type));
    return laws[std::size_t(bond_type)];
}

bool DamageModel::needs_history() const {
    for (const auto& l : laws)
        if (l.breakpoints.size() > 1)
            return true;
    return false;
}

void DamageModel::validate() const {
    if (laws.empty())
        throw std::invalid_argument("DamageModel: no laws defined");
    for (const auto& l : laws)
        l.validate();
    if (damping < 0)
        throw std::invalid_argument("DamageModel: negative damping");
}

SimulationState make_state(const NeighborList& family, bool with_history) {
    SimulationState st;
    st.connectivity = family;
    const Index n = family.node_count();
    st.u.assign(3 * n, 0);
    st.v.assign(3 * n, 0);
    st.a.assign(3 * n, 0);
    if (with_history)
        st.bond_history.assign(std::size_t(n * family.group_size), 0);
    return st;
}

Real RampProfile::scale(Index step) const {
    switch (kind) {
    case Kind::constant:
        return target_scale;
    case Kind::linear: {
        if (rise_steps <= 0 || step >= rise_steps)
            return target_scale; // clamps at the target beyond the rise
        return target_scale * Real(step) / Real(rise_steps);
    }
    case Kind::quintic_smooth: {
        if (rise_steps <= 0 || step >= rise_steps)
            return target_scale;
        const Real t = Real(step) / Real(rise_steps);
        return target_scale * t * t * t * (10 + t * (-15 + 6 * t));
    }
    }
    return target_scale;
}

Real RampProfile::rate(Index step) const {
    switch (kind) {
    case Kind::constant:
        return 0;
    case Kind::linear:
        if (rise_steps <= 0 || step >= rise_steps)
            return 0;
        return target_scale / Real(rise_steps);
    case Kind::quintic_smooth: {
        if (rise_steps <= 0 || step >= rise_steps)
            return 0;
        const Real t = Real(step) / Real(rise_steps);
        return target_scale * 30 * t * t * (t - 1) * (t - 1) / Real(rise_steps);
    }
    }
    return 0;
}

Real RampProfile::accel(Index step) const {
    switch (kind) {
    case Kind::constant:
    case Kind::linear:
        return 0;
    case Kind::quintic_smooth: {
        if (rise_steps <= 0 || step >= rise_steps)
            return 0;
        const Real t = Real(step) / Real(rise_steps);
        return target_scale * 60 * t * (2 * t - 1) * (t - 1) / (Real(rise_steps) * Real(rise_steps));
    }
    }
    return 0;
}

BoundaryConditions BoundaryConditions::none(Index n) {
    BoundaryConditions bc;
    bc.kind.assign(3 * n, BCKind::free);
    bc.magnitude.assign(3 * n, 0);
    bc.ramp_id.assign(3 * n, 0);
    bc.ramps.push_back(RampProfile{});
    bc.no_failure.assign(n, 0);
    return bc;
}

void BoundaryConditions::validate(Index n) const {
    if (kind.size() != std::size_t(3 * n) || magnitude.size() != std::size_t(3 * n) ||
        ramp_id.size() != std::size_t(3 * n) || no_failure.size() != std::size_t(n))
        throw std::invalid_argument("BoundaryConditions: field lengths do not match node count");
    if (ramps.empty())
        throw std::invalid_argument("BoundaryConditions: no ramp profiles");
    for (auto id : ramp_id)
        if (id >= ramps.size())
            throw std::invalid_argument("BoundaryConditions: ramp id out of range");
    for (const auto& [name, set] : tip_sets)
        for (auto i : set)
            if (i < 0 || i >= n)
                throw std::invalid_argument("BoundaryConditions: tip set '" + name +
                                            "' has an invalid node index");
}

} // namespace peridyn
