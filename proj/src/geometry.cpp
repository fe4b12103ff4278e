#include "peridyn/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "peridyn/parallel.hpp"

namespace peridyn {

void InputMesh::validate() const {
    const Index n = vertex_count();
    if (n < 1)
        throw std::invalid_argument("InputMesh: no vertices");
    if (!explicit_volumes.empty() && explicit_volumes.size() != std::size_t(n))
        throw std::invalid_argument("InputMesh: explicit volumes do not match vertex count");
    for (const auto& t : tets)
        for (auto v : t)
            if (v < 0 || v >= n)
                throw std::invalid_argument("InputMesh: cell vertex index out of range");
}

std::vector<Real> grid_coordinates(const GridDesc& grid) {
    if (!(grid.spacing > 0) || grid.counts[0] < 1 || grid.counts[1] < 1 || grid.counts[2] < 1)
        throw std::invalid_argument("grid: spacing and counts must be positive");
    std::vector<Real> coords;
    coords.reserve(std::size_t(3 * grid.node_count()));
    for (Index kz = 0; kz < grid.counts[2]; ++kz)
        for (Index ky = 0; ky < grid.counts[1]; ++ky)
            for (Index kx = 0; kx < grid.counts[0]; ++kx) {
                coords.push_back(grid.origin.x + Real(kx) * grid.spacing);
                coords.push_back(grid.origin.y + Real(ky) * grid.spacing);
                coords.push_back(grid.origin.z + Real(kz) * grid.spacing);
            }
    return coords;
}

InputMesh mesh_from_grid(const GridDesc& grid) {
    InputMesh mesh;
    mesh.vertices = grid_coordinates(grid);
    mesh.grid = grid;
    return mesh;
}

Real tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    const Vec3 ab = b - a, ac = c - a, ad = d - a;
    const Real det = ab.x * (ac.y * ad.z - ac.z * ad.y) - ab.y * (ac.x * ad.z - ac.z * ad.x) +
                     ab.z * (ac.x * ad.y - ac.y * ad.x);
    return std::abs(det) / Real(6);
}

std::vector<Real> lump_volumes(const InputMesh& mesh) {
    mesh.validate();
    const Index n = mesh.vertex_count();
    if (!mesh.explicit_volumes.empty())
        return mesh.explicit_volumes;
    if (!mesh.tets.empty()) {
        std::vector<Real> vol(std::size_t(n), 0);
        for (std::size_t c = 0; c < mesh.tets.size(); ++c) {
            const auto& t = mesh.tets[c];
            const Real v = tet_volume(load_vec3(mesh.vertices, t[0]), load_vec3(mesh.vertices, t[1]),
                                      load_vec3(mesh.vertices, t[2]), load_vec3(mesh.vertices, t[3]));
            if (!(v > 0))
                throw std::invalid_argument("lump_volumes: degenerate tetrahedron in cell " +
                                            std::to_string(c));
            for (auto vi : t)
                vol[std::size_t(vi)] += v / Real(4);
        }
        return vol;
    }
    if (mesh.grid) {
        const Real dv = mesh.grid->spacing * mesh.grid->spacing * mesh.grid->spacing;
        return std::vector<Real>(std::size_t(n), dv);
    }
    throw std::invalid_argument("lump_volumes: mesh has no volume source (cells, explicit volumes or grid)");
}

namespace {

struct CellIndex {
    Vec3 origin;
    Real cell = 0;
    Index nx = 0, ny = 0, nz = 0;
    // cell id -> node indices, insertion-ordered per cell
    std::unordered_map<Index, std::vector<std::int32_t>> cells;

    Index id(Index cx, Index cy, Index cz) const { return (cz * ny + cy) * nx + cx; }

    Index clamp_coord(Real x, Real o, Index count) const {
        auto c = Index(std::floor((x - o) / cell));
        return std::min(std::max(c, Index(0)), count - 1);
    }
};

CellIndex make_cell_index(std::span<const Real> coords, Real horizon, const GridDesc* hint) {
    const Index n = static_cast<Index>(coords.size()) / 3;
    CellIndex ix;
    ix.cell = horizon;
    Vec3 lo, hi;
    if (hint && hint->spacing > 0) {
        lo = hint->origin;
        hi = {hint->origin.x + Real(hint->counts[0] - 1) * hint->spacing,
              hint->origin.y + Real(hint->counts[1] - 1) * hint->spacing,
              hint->origin.z + Real(hint->counts[2] - 1) * hint->spacing};
    } else {
        lo = hi = {coords[0], coords[1], coords[2]};
        for (Index i = 1; i < n; ++i) {
            lo.x = std::min(lo.x, coords[3 * i]);
            lo.y = std::min(lo.y, coords[3 * i + 1]);
            lo.z = std::min(lo.z, coords[3 * i + 2]);
            hi.x = std::max(hi.x, coords[3 * i]);
            hi.y = std::max(hi.y, coords[3 * i + 1]);
            hi.z = std::max(hi.z, coords[3 * i + 2]);
        }
    }
    ix.origin = lo;
    ix.nx = std::max(Index(1), Index(std::floor((hi.x - lo.x) / ix.cell)) + 1);
    ix.ny = std::max(Index(1), Index(std::floor((hi.y - lo.y) / ix.cell)) + 1);
    ix.nz = std::max(Index(1), Index(std::floor((hi.z - lo.z) / ix.cell)) + 1);
    for (Index i = 0; i < n; ++i) {
        const Index cx = ix.clamp_coord(coords[3 * i], lo.x, ix.nx);
        const Index cy = ix.clamp_coord(coords[3 * i + 1], lo.y, ix.ny);
        const Index cz = ix.clamp_coord(coords[3 * i + 2], lo.z, ix.nz);
        ix.cells[ix.id(cx, cy, cz)].push_back(std::int32_t(i));
    }
    return ix;
}

NeighborList pack_rows(std::vector<std::vector<std::int32_t>>& rows, Real horizon,
                       std::span<const Real> coords, const BondClassifier& classify) {
    const Index n = static_cast<Index>(rows.size());
    Index max_count = 0;
    for (auto& row : rows) {
        std::sort(row.begin(), row.end());
        max_count = std::max(max_count, Index(row.size()));
    }
    const Index group = Index(std::bit_ceil(std::uint64_t(std::max(max_count, Index(1)))));

    NeighborList out;
    out.group_size = group;
    out.horizon = horizon;
    out.entries.assign(std::size_t(n * group), -1);
    out.n_neigh.resize(std::size_t(n));
    out.initial_n_neigh.resize(std::size_t(n));
    if (classify)
        out.bond_type.assign(std::size_t(n * group), 0);
    for (Index i = 0; i < n; ++i) {
        const auto& row = rows[std::size_t(i)];
        out.n_neigh[std::size_t(i)] = std::int32_t(row.size());
        out.initial_n_neigh[std::size_t(i)] = std::int32_t(row.size());
        for (std::size_t k = 0; k < row.size(); ++k) {
            out.entries[std::size_t(i * group) + k] = row[k];
            if (classify)
                out.bond_type[std::size_t(i * group) + k] =
                    classify(load_vec3(coords, i), load_vec3(coords, row[k]));
        }
    }
    return out;
}

} // namespace

NeighborList build_family(std::span<const Real> coords, Real horizon, const GridDesc* grid_hint,
                          const BondClassifier& classify) {
    if (!(horizon > 0))
        throw std::domain_error("build_family: horizon must be positive");
    const Index n = static_cast<Index>(coords.size()) / 3;
    if (n < 1 || coords.size() != std::size_t(3 * n))
        throw std::invalid_argument("build_family: bad coordinate array");

    const CellIndex ix = make_cell_index(coords, horizon, grid_hint);
    const Real h2 = horizon * horizon;
    std::vector<std::vector<std::int32_t>> rows(static_cast<std::size_t>(n));

    parallel_chunks(n, [&](Index begin, Index end) {
        for (Index i = begin; i < end; ++i) {
            const Vec3 xi = load_vec3(coords, i);
            const Index cx = ix.clamp_coord(xi.x, ix.origin.x, ix.nx);
            const Index cy = ix.clamp_coord(xi.y, ix.origin.y, ix.ny);
            const Index cz = ix.clamp_coord(xi.z, ix.origin.z, ix.nz);
            auto& row = rows[std::size_t(i)];
            for (Index dz = -1; dz <= 1; ++dz)
                for (Index dy = -1; dy <= 1; ++dy)
                    for (Index dx = -1; dx <= 1; ++dx) {
                        const Index ccx = cx + dx, ccy = cy + dy, ccz = cz + dz;
                        if (ccx < 0 || ccy < 0 || ccz < 0 || ccx >= ix.nx || ccy >= ix.ny ||
                            ccz >= ix.nz)
                            continue;
                        auto it = ix.cells.find(ix.id(ccx, ccy, ccz));
                        if (it == ix.cells.end())
                            continue;
                        for (auto j : it->second) {
                            if (Index(j) == i)
                                continue;
                            const Vec3 d = load_vec3(coords, j) - xi;
                            const Real r2 = d.x * d.x + d.y * d.y + d.z * d.z;
                            if (r2 <= h2) {
                                if (r2 < Real(1e-24))
                                    throw std::invalid_argument(
                                        "build_family: coincident nodes " + std::to_string(i) +
                                        " and " + std::to_string(j));
                                row.push_back(j);
                            }
                        }
                    }
        }
    });
    return pack_rows(rows, horizon, coords, classify);
}

NeighborList build_family_brute_force(std::span<const Real> coords, Real horizon) {
    if (!(horizon > 0))
        throw std::domain_error("build_family: horizon must be positive");
    const Index n = static_cast<Index>(coords.size()) / 3;
    const Real h2 = horizon * horizon;
    std::vector<std::vector<std::int32_t>> rows(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            if (i == j)
                continue;
            const Vec3 d = load_vec3(coords, j) - load_vec3(coords, i);
            const Real r2 = d.x * d.x + d.y * d.y + d.z * d.z;
            if (r2 <= h2) {
                if (r2 < Real(1e-24))
                    throw std::invalid_argument("build_family: coincident nodes " +
                                                std::to_string(i) + " and " + std::to_string(j));
                rows[std::size_t(i)].push_back(std::int32_t(j));
            }
        }
    return pack_rows(rows, horizon, coords, {});
}

Real analytic_neighborhood_volume(Real horizon, Real packing) {
    if (!(horizon > 0) || !(packing > 0))
        throw std::domain_error("analytic_neighborhood_volume: inputs must be positive");
    return packing * Real(4) / Real(3) * std::numbers::pi_v<Real> * horizon * horizon * horizon;
}

std::vector<Real> neighborhood_volumes(std::span<const Real> volumes, const NeighborList& family) {
    const Index n = family.node_count();
    std::vector<Real> out(std::size_t(n), 0);
    for (Index i = 0; i < n; ++i) {
        Real sum = 0;
        for (Index k = 0; k < family.group_size; ++k) {
            const auto j = family.entries[std::size_t(i * family.group_size + k)];
            if (j != -1)
                sum += volumes[std::size_t(j)];
        }
        out[std::size_t(i)] = sum;
    }
    return out;
}

Real max_neighborhood_volume(std::span<const Real> volumes, const NeighborList& family) {
    Real best = 0;
    for (Real v : neighborhood_volumes(volumes, family))
        best = std::max(best, v);
    return best;
}

std::vector<Real> surface_correction_factors(std::span<const Real> volumes,
                                             const NeighborList& family, Real v0) {
    if (!(v0 > 0))
        throw std::domain_error("surface_correction_factors: V0 must be positive");
    const Index n = family.node_count();
    const Index group = family.group_size;
    const auto nbhd = neighborhood_volumes(volumes, family);
    std::vector<Real> lambda(std::size_t(n * group), 1);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < group; ++k) {
            const auto j = family.entries[std::size_t(i * group + k)];
            if (j == -1)
                continue;
            const Real denom = nbhd[std::size_t(i)] + nbhd[std::size_t(j)];
            if (!(denom > 0))
                throw std::domain_error("surface_correction_factors: zero neighborhood volume for bond " +
                                        std::to_string(i) + "-" + std::to_string(j));
            lambda[std::size_t(i * group + k)] = 2 * v0 / denom;
        }
    return lambda;
}

void break_initial_bonds(NeighborList& family, std::span<const Real> coords,
                         const BondPredicate& predicate) {
    if (!predicate)
        return;
    const Index n = family.node_count();
    for (Index i = 0; i < n; ++i) {
        const Vec3 xi = load_vec3(coords, i);
        for (Index k = 0; k < family.group_size; ++k) {
            auto& slot = family.entries[std::size_t(i * family.group_size + k)];
            if (slot == -1)
                continue;
            if (predicate(xi, load_vec3(coords, slot))) {
                slot = -1;
                --family.n_neigh[std::size_t(i)];
            }
        }
    }
}

BondPredicate plane_crossing_predicate(int axis, Real position) {
    return [axis, position](const Vec3& a, const Vec3& b) {
        return (a[axis] - position) * (b[axis] - position) < 0;
    };
}

BondPredicate notch_predicate(int axis, Real position, int sweep_axis, Real depth) {
    return [axis, position, sweep_axis, depth](const Vec3& a, const Vec3& b) {
        const Real da = a[axis] - position, db = b[axis] - position;
        if (da * db >= 0)
            return false;
        const Real t = da / (da - db); // crossing parameter along the segment
        const Real cross = a[sweep_axis] + t * (b[sweep_axis] - a[sweep_axis]);
        return cross <= depth;
    };
}

} // namespace peridyn
