#pragma once

#include <numbers>

#include "peridyn/types.hpp"

namespace peridyn {

/// PMB micromodulus c = 18 K / (pi delta^4).
inline Real pmb_micromodulus(Real bulk_modulus, Real horizon) {
    if (!(bulk_modulus > 0) || !(horizon > 0))
        throw std::domain_error("pmb_micromodulus: bulk modulus and horizon must be positive");
    const Real d2 = horizon * horizon;
    return Real(18) * bulk_modulus / (std::numbers::pi_v<Real> * d2 * d2);
}

enum class Regime { three_d, plane_stress, plane_strain };

/// Critical stretch from the energy release rate:
///   sqrt(5 G_F / 6 E d)        (3D)
///   sqrt(4 pi G_F / 9 E d)     (plane stress)
///   sqrt(5 pi G_F / 12 E d)    (plane strain)
inline Real critical_stretch(Real fracture_energy, Real youngs_modulus, Real horizon,
                             Regime regime = Regime::three_d) {
    if (!(fracture_energy > 0) || !(youngs_modulus > 0) || !(horizon > 0))
        throw std::domain_error("critical_stretch: all inputs must be positive");
    const Real pi = std::numbers::pi_v<Real>;
    const Real ed = youngs_modulus * horizon;
    switch (regime) {
    case Regime::three_d:
        return std::sqrt(Real(5) * fracture_energy / (Real(6) * ed));
    case Regime::plane_stress:
        return std::sqrt(Real(4) * pi * fracture_energy / (Real(9) * ed));
    case Regime::plane_strain:
        return std::sqrt(Real(5) * pi * fracture_energy / (Real(12) * ed));
    }
    throw std::domain_error("critical_stretch: unknown regime");
}

/// Bond stretch s = (|eta + xi| - |xi|) / |xi|.
inline Real bond_stretch(const Vec3& xi, const Vec3& eta) {
    const Real ref = xi.norm();
    if (!(ref > 0))
        throw std::domain_error("bond_stretch: zero-length reference bond");
    return ((eta + xi).norm() - ref) / ref;
}

/// Local damage phi = 1 - current / initial.
inline Real local_damage(Index n_neigh_current, Index n_neigh_initial) {
    if (n_neigh_initial < 1)
        throw std::domain_error("local_damage: node has no initial bonds");
    if (n_neigh_current < 0 || n_neigh_current > n_neigh_initial)
        throw std::domain_error("local_damage: current count out of range");
    return Real(1) - Real(n_neigh_current) / Real(n_neigh_initial);
}

/// Rayleigh wave speed c_R = c_s (0.87 + 1.12 nu) / (1 + nu),
/// with shear wave speed c_s = sqrt(mu / rho).
inline Real rayleigh_speed(Real youngs_modulus, Real poisson, Real density) {
    if (!(youngs_modulus > 0) || !(density > 0))
        throw std::domain_error("rayleigh_speed: modulus and density must be positive");
    if (!(poisson > -1) || !(poisson < Real(0.5)))
        throw std::domain_error("rayleigh_speed: poisson ratio out of (-1, 0.5)");
    const Real shear = youngs_modulus / (2 * (1 + poisson));
    const Real c_s = std::sqrt(shear / density);
    return c_s * (Real(0.87) + Real(1.12) * poisson) / (1 + poisson);
}

/// Crack propagation speed from two tip positions a time step apart.
inline Real crack_speed(const Vec3& tip_t, const Vec3& tip_t_plus, Real dt) {
    if (!(dt > 0))
        throw std::domain_error("crack_speed: dt must be positive");
    return (tip_t_plus - tip_t).norm() / dt;
}

/// Loading envelope of a piecewise-linear law, valid for 0 <= s < s_c.
inline Real envelope_force(const DamageLaw& law, Real s) {
    Real s_prev = 0, f_prev = 0;
    for (std::size_t k = 0; k < law.breakpoints.size(); ++k) {
        const Real s_k = law.breakpoints[k];
        if (s < s_k || k + 1 == law.breakpoints.size()) {
            const Real t = (s - s_prev) / (s_k - s_prev);
            return f_prev + t * (law.forces[k] - f_prev);
        }
        s_prev = s_k;
        f_prev = law.forces[k];
    }
    return law.stiffness * s; // unreachable for a validated law
}

/// Secant stiffness through the origin at historic maximum stretch h.
inline Real secant_stiffness(const DamageLaw& law, Real h) {
    if (h <= 0)
        return law.stiffness;
    return envelope_force(law, h) / h;
}

struct BondForceResult {
    Real force = 0;       // scalar bond force density per unit stretch direction
    Real new_history = 0; // updated maximum attained stretch
    bool broken = false;  // bond has exceeded the critical stretch (now or before)
};

/// Scalar bond force with irreversible damage.  Loading beyond the historic
/// maximum follows the envelope; unloading follows the secant through the
/// origin at the historic maximum.  A stretch at or above the critical value
/// breaks the bond for good.
inline BondForceResult damage_force_scalar(const DamageModel& model, int bond_type, Real s,
                                           Real history_max_s) {
    const DamageLaw& law = model.law(bond_type);
    const Real s_c = law.critical_stretch();
    if (history_max_s >= s_c)
        return {0, history_max_s, true};
    const Real h = std::max(history_max_s, s);
    if (s >= s_c)
        return {0, h, true};
    if (s >= history_max_s)
        return {envelope_force(law, s), h, false};
    return {secant_stiffness(law, history_max_s) * s, h, false};
}

} // namespace peridyn
