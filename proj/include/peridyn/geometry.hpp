#pragma once

#include <functional>
#include <optional>
#include <span>

#include "peridyn/types.hpp"

namespace peridyn {

/// Regular cuboid tensor grid: counts[d] nodes along axis d at `spacing`,
/// starting at `origin`.
struct GridDesc {
    Vec3 origin{};
    Real spacing = 0;
    std::array<Index, 3> counts{};

    Index node_count() const { return counts[0] * counts[1] * counts[2]; }
};

/// Mesh input: vertices are the peridynamic nodes.  Volumes come from
/// explicit values, from tetrahedral cells, or from a regular grid.
struct InputMesh {
    std::vector<Real> vertices; // flat n x 3
    std::vector<std::array<Index, 4>> tets;
    std::vector<Real> explicit_volumes; // empty unless supplied
    std::optional<GridDesc> grid;

    Index vertex_count() const { return static_cast<Index>(vertices.size()) / 3; }
    void validate() const;
};

/// Expand a grid descriptor into vertex coordinates (x fastest).
std::vector<Real> grid_coordinates(const GridDesc& grid);

InputMesh mesh_from_grid(const GridDesc& grid);

/// Lumped nodal volumes: explicit values verbatim; else each node receives a
/// quarter of every incident tetrahedron's volume; else spacing^3 on a grid.
std::vector<Real> lump_volumes(const InputMesh& mesh);

/// Signed-free volume of one tetrahedron via the scalar triple product.
Real tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

using BondClassifier = std::function<std::uint8_t(const Vec3&, const Vec3&)>;

/// Build the padded family list: row i holds every j != i with
/// |x_j - x_i| <= delta, sorted ascending and padded with -1 to the smallest
/// power of two >= max family size.  Uses a uniform cell index of side delta;
/// `grid_hint` only pre-sizes the index.  `classify`, when given, assigns a
/// bond type per slot from the endpoint coordinates and must be symmetric.
NeighborList build_family(std::span<const Real> coords, Real horizon,
                          const GridDesc* grid_hint = nullptr,
                          const BondClassifier& classify = {});

/// Brute-force O(n^2) reference used as the construction oracle.
NeighborList build_family_brute_force(std::span<const Real> coords, Real horizon);

/// Analytic full-horizon neighborhood volume (4/3) pi delta^3 scaled by a
/// packing factor.
Real analytic_neighborhood_volume(Real horizon, Real packing = 1);

/// Per-node neighborhood volume: sum of family-member nodal volumes.
std::vector<Real> neighborhood_volumes(std::span<const Real> volumes, const NeighborList& family);

/// Largest observed neighborhood volume, an alternative reference for V0.
Real max_neighborhood_volume(std::span<const Real> volumes, const NeighborList& family);

/// Surface-correction factors lambda_ij = 2 V0 / (V_i + V_j) where V_i is the
/// neighborhood volume of node i.  Aligned with the family list; padding
/// slots carry 1.
std::vector<Real> surface_correction_factors(std::span<const Real> volumes,
                                             const NeighborList& family, Real v0);

using BondPredicate = std::function<bool(const Vec3&, const Vec3&)>;

/// Remove every bond whose segment matches the predicate (notches and
/// pre-cracks).  Entries are zapped in place; initial counts are kept so the
/// removed bonds show up as damage.
void break_initial_bonds(NeighborList& family, std::span<const Real> coords,
                         const BondPredicate& predicate);

/// Predicate for bonds crossing the plane axis = position (strict sign change).
BondPredicate plane_crossing_predicate(int axis, Real position);

/// Predicate for bonds crossing a notch ribbon: the plane axis = position,
/// limited to crossing points with sweep-axis coordinate <= depth.
BondPredicate notch_predicate(int axis, Real position, int sweep_axis, Real depth);

} // namespace peridyn
