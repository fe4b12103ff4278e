#pragma once

#include <filesystem>
#include <iosfwd>

#include "peridyn/geometry.hpp"
#include "peridyn/types.hpp"

namespace peridyn::io {

/// I/O failures carry the offending path (and line, for text formats).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Plain-text mesh, extension .mesh:
///   pdmesh 1
///   nodes <n>      followed by n lines "x y z"
///   volumes <n>    optional, n lines "v"
///   tets <m>       optional, m lines "a b c d"
/// Regular-grid descriptor, extension .grid:
///   pdgrid 1
///   origin <x y z>
///   spacing <dx>
///   counts <nx ny nz>
/// Malformed input is rejected with the offending line number.
InputMesh read_mesh(const std::filesystem::path& path);

void write_mesh(const std::filesystem::path& path, const InputMesh& mesh);

/// Per-node field snapshot of one write step.
struct Snapshot {
    Index step = 0;
    std::vector<Real> coords; // n x 3
    std::vector<Real> u;      // n x 3
    std::vector<Real> v;      // n x 3
    std::vector<Real> damage; // n, in [0, 1]

    Index size() const { return static_cast<Index>(damage.size()); }
};

Snapshot make_snapshot(const SimulationState& state, const ParticleSet& particles);

/// ASCII unstructured-points file:
///   pdsnap 1 <step>
///   <n>
///   x y z ux uy uz vx vy vz phi     (one node per line, 17 significant digits)
/// Byte-reproducible for identical in-memory state.
void write_snapshot(const std::filesystem::path& path, const Snapshot& snapshot);

Snapshot read_snapshot(const std::filesystem::path& path);

/// Family cache contents: connectivity plus the optional correction arrays.
struct FamilyCache {
    NeighborList family;
    Corrections corrections;
};

/// Binary container, magic "PDNL", little-endian, length-prefixed sections.
/// load_cache(save_cache(x)) is exact; version or size mismatches and
/// truncations are rejected without reading past the declared sections.
void save_cache(const NeighborList& family, const Corrections& corrections,
                const std::filesystem::path& path);

FamilyCache load_cache(const std::filesystem::path& path);

/// Binary container, magic "PDST": full restartable state including the step
/// counter and bond history.  Exact round-trip.
void save_state(const SimulationState& state, const std::filesystem::path& path);

SimulationState load_state(const std::filesystem::path& path);

/// 17-significant-digit formatting used by all text writers.
std::string format_real(double value);

} // namespace peridyn::io
