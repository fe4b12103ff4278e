#include "peridyn/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "peridyn/formulas.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary containers are written little-endian");

namespace peridyn::io {

std::string format_real(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
    throw IoError(path.string() + ": " + what);
}

[[noreturn]] void fail_line(const std::filesystem::path& path, std::size_t line,
                            const std::string& what) {
    throw IoError(path.string() + ":" + std::to_string(line) + ": " + what);
}

struct LineReader {
    std::ifstream in;
    std::filesystem::path path;
    std::size_t line_no = 0;

    explicit LineReader(const std::filesystem::path& p) : in(p), path(p) {
        if (!in)
            fail(p, "cannot open file");
    }

    bool next(std::string& out) {
        while (std::getline(in, out)) {
            ++line_no;
            if (!out.empty() && out.back() == '\r')
                out.pop_back();
            // skip blank lines and comments
            const auto pos = out.find_first_not_of(" \t");
            if (pos == std::string::npos || out[pos] == '#')
                continue;
            return true;
        }
        return false;
    }

    std::string expect(const std::string& what) {
        std::string s;
        if (!next(s))
            fail_line(path, line_no, "unexpected end of file, expected " + what);
        return s;
    }
};

std::vector<std::string> tokens(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    std::string t;
    while (ss >> t)
        out.push_back(t);
    return out;
}

double parse_number(LineReader& r, const std::string& tok) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        fail_line(r.path, r.line_no, "not a number: '" + tok + "'");
    }
    if (used != tok.size() || !std::isfinite(v))
        fail_line(r.path, r.line_no, "not a finite number: '" + tok + "'");
    return v;
}

Index parse_count(LineReader& r, const std::string& tok) {
    const double v = parse_number(r, tok);
    const auto n = Index(v);
    if (n < 0 || double(n) != v)
        fail_line(r.path, r.line_no, "not a non-negative integer: '" + tok + "'");
    return n;
}

InputMesh read_text_mesh(const std::filesystem::path& path) {
    LineReader r(path);
    auto header = tokens(r.expect("header"));
    if (header.size() != 2 || header[0] != "pdmesh")
        fail_line(path, r.line_no, "expected 'pdmesh <version>' header");
    if (header[1] != "1")
        fail_line(path, r.line_no, "unsupported mesh version " + header[1]);

    InputMesh mesh;
    std::string line;
    while (r.next(line)) {
        auto tk = tokens(line);
        if (tk.size() == 2 && tk[0] == "nodes") {
            const Index n = parse_count(r, tk[1]);
            if (n < 1)
                fail_line(path, r.line_no, "node count must be >= 1");
            mesh.vertices.reserve(std::size_t(3 * n));
            for (Index i = 0; i < n; ++i) {
                auto vt = tokens(r.expect("a node line"));
                if (vt.size() != 3)
                    fail_line(path, r.line_no, "expected 'x y z'");
                for (const auto& t : vt)
                    mesh.vertices.push_back(Real(parse_number(r, t)));
            }
        } else if (tk.size() == 2 && tk[0] == "volumes") {
            const Index n = parse_count(r, tk[1]);
            for (Index i = 0; i < n; ++i) {
                auto vt = tokens(r.expect("a volume line"));
                if (vt.size() != 1)
                    fail_line(path, r.line_no, "expected one volume per line");
                mesh.explicit_volumes.push_back(Real(parse_number(r, vt[0])));
            }
        } else if (tk.size() == 2 && tk[0] == "tets") {
            const Index m = parse_count(r, tk[1]);
            const Index n = mesh.vertex_count();
            for (Index i = 0; i < m; ++i) {
                auto vt = tokens(r.expect("a tet line"));
                if (vt.size() != 4)
                    fail_line(path, r.line_no, "expected 'a b c d'");
                std::array<Index, 4> cell{};
                for (int c = 0; c < 4; ++c) {
                    cell[std::size_t(c)] = parse_count(r, vt[std::size_t(c)]);
                    if (cell[std::size_t(c)] >= n)
                        fail_line(path, r.line_no,
                                  "vertex index " + vt[std::size_t(c)] + " out of range (n = " +
                                      std::to_string(n) + ")");
                }
                mesh.tets.push_back(cell);
            }
        } else {
            fail_line(path, r.line_no, "unknown section '" + line + "'");
        }
    }
    if (mesh.vertices.empty())
        fail(path, "mesh has no nodes section");
    mesh.validate();
    return mesh;
}

InputMesh read_grid_mesh(const std::filesystem::path& path) {
    LineReader r(path);
    auto header = tokens(r.expect("header"));
    if (header.size() != 2 || header[0] != "pdgrid")
        fail_line(path, r.line_no, "expected 'pdgrid <version>' header");
    if (header[1] != "1")
        fail_line(path, r.line_no, "unsupported grid version " + header[1]);

    GridDesc grid;
    bool have_spacing = false, have_counts = false;
    std::string line;
    while (r.next(line)) {
        auto tk = tokens(line);
        if (tk.size() == 4 && tk[0] == "origin") {
            grid.origin = {Real(parse_number(r, tk[1])), Real(parse_number(r, tk[2])),
                           Real(parse_number(r, tk[3]))};
        } else if (tk.size() == 2 && tk[0] == "spacing") {
            grid.spacing = Real(parse_number(r, tk[1]));
            have_spacing = true;
        } else if (tk.size() == 4 && tk[0] == "counts") {
            for (int d = 0; d < 3; ++d)
                grid.counts[std::size_t(d)] = parse_count(r, tk[std::size_t(d + 1)]);
            have_counts = true;
        } else {
            fail_line(path, r.line_no, "unknown grid key '" + line + "'");
        }
    }
    if (!have_spacing || !have_counts)
        fail(path, "grid descriptor needs 'spacing' and 'counts'");
    if (!(grid.spacing > 0) || grid.counts[0] < 1 || grid.counts[1] < 1 || grid.counts[2] < 1)
        fail(path, "grid spacing and counts must be positive");
    return mesh_from_grid(grid);
}

} // namespace

InputMesh read_mesh(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        fail(path, "no such file");
    const auto ext = path.extension().string();
    if (ext == ".mesh")
        return read_text_mesh(path);
    if (ext == ".grid")
        return read_grid_mesh(path);
    fail(path, "unknown mesh extension '" + ext + "' (expected .mesh or .grid)");
}

void write_mesh(const std::filesystem::path& path, const InputMesh& mesh) {
    mesh.validate();
    std::ofstream out(path);
    if (!out)
        fail(path, "cannot open for writing");
    if (mesh.grid && mesh.tets.empty() && mesh.explicit_volumes.empty()) {
        const auto& g = *mesh.grid;
        out << "pdgrid 1\n";
        out << "origin " << format_real(g.origin.x) << ' ' << format_real(g.origin.y) << ' '
            << format_real(g.origin.z) << '\n';
        out << "spacing " << format_real(g.spacing) << '\n';
        out << "counts " << g.counts[0] << ' ' << g.counts[1] << ' ' << g.counts[2] << '\n';
    } else {
        const Index n = mesh.vertex_count();
        out << "pdmesh 1\n";
        out << "nodes " << n << '\n';
        for (Index i = 0; i < n; ++i)
            out << format_real(mesh.vertices[3 * i]) << ' ' << format_real(mesh.vertices[3 * i + 1])
                << ' ' << format_real(mesh.vertices[3 * i + 2]) << '\n';
        if (!mesh.explicit_volumes.empty()) {
            out << "volumes " << mesh.explicit_volumes.size() << '\n';
            for (Real v : mesh.explicit_volumes)
                out << format_real(v) << '\n';
        }
        if (!mesh.tets.empty()) {
            out << "tets " << mesh.tets.size() << '\n';
            for (const auto& t : mesh.tets)
                out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
        }
    }
    if (!out)
        fail(path, "write failed");
}

Snapshot make_snapshot(const SimulationState& state, const ParticleSet& particles) {
    Snapshot snap;
    snap.step = state.step;
    snap.coords = particles.coords;
    snap.u = state.u;
    snap.v = state.v;
    const Index n = state.size();
    snap.damage.resize(std::size_t(n));
    for (Index i = 0; i < n; ++i) {
        const auto init = state.connectivity.initial_n_neigh[std::size_t(i)];
        snap.damage[std::size_t(i)] =
            init > 0 ? local_damage(state.connectivity.n_neigh[std::size_t(i)], init) : Real(0);
    }
    return snap;
}

void write_snapshot(const std::filesystem::path& path, const Snapshot& snapshot) {
    std::ofstream out(path);
    if (!out)
        fail(path, "cannot open for writing (step " + std::to_string(snapshot.step) + ")");
    const Index n = snapshot.size();
    out << "pdsnap 1 " << snapshot.step << '\n';
    out << n << '\n';
    for (Index i = 0; i < n; ++i) {
        out << format_real(snapshot.coords[3 * i]) << ' ' << format_real(snapshot.coords[3 * i + 1])
            << ' ' << format_real(snapshot.coords[3 * i + 2]);
        out << ' ' << format_real(snapshot.u[3 * i]) << ' ' << format_real(snapshot.u[3 * i + 1])
            << ' ' << format_real(snapshot.u[3 * i + 2]);
        out << ' ' << format_real(snapshot.v[3 * i]) << ' ' << format_real(snapshot.v[3 * i + 1])
            << ' ' << format_real(snapshot.v[3 * i + 2]);
        out << ' ' << format_real(snapshot.damage[std::size_t(i)]) << '\n';
    }
    if (!out)
        fail(path, "write failed (step " + std::to_string(snapshot.step) + ")");
}

Snapshot read_snapshot(const std::filesystem::path& path) {
    LineReader r(path);
    auto header = tokens(r.expect("header"));
    if (header.size() != 3 || header[0] != "pdsnap")
        fail_line(path, r.line_no, "expected 'pdsnap <version> <step>' header");
    if (header[1] != "1")
        fail_line(path, r.line_no, "unsupported snapshot version " + header[1]);
    Snapshot snap;
    snap.step = parse_count(r, header[2]);
    const Index n = parse_count(r, tokens(r.expect("point count"))[0]);
    snap.coords.reserve(std::size_t(3 * n));
    for (Index i = 0; i < n; ++i) {
        auto tk = tokens(r.expect("a point record"));
        if (tk.size() != 10)
            fail_line(path, r.line_no, "expected 10 fields per point");
        for (int c = 0; c < 3; ++c)
            snap.coords.push_back(Real(parse_number(r, tk[std::size_t(c)])));
        for (int c = 3; c < 6; ++c)
            snap.u.push_back(Real(parse_number(r, tk[std::size_t(c)])));
        for (int c = 6; c < 9; ++c)
            snap.v.push_back(Real(parse_number(r, tk[std::size_t(c)])));
        snap.damage.push_back(Real(parse_number(r, tk[9])));
    }
    return snap;
}

// --- binary containers ----------------------------------------------------

namespace {

// section ids shared by the cache and state containers
enum : std::uint32_t {
    sec_entries = 1,
    sec_n_neigh = 2,
    sec_lambda = 3,
    sec_beta = 4,
    sec_bond_type = 5,
    sec_initial_n_neigh = 6,
    sec_u = 7,
    sec_v = 8,
    sec_a = 9,
    sec_history = 10,
};

constexpr std::uint32_t container_version = 1;

struct BinWriter {
    std::ofstream out;
    std::filesystem::path path;

    BinWriter(const std::filesystem::path& p) : out(p, std::ios::binary), path(p) {
        if (!out)
            fail(p, "cannot open for writing");
    }

    void bytes(const void* data, std::size_t len) {
        out.write(static_cast<const char*>(data), std::streamsize(len));
    }
    template <typename T> void pod(T value) { bytes(&value, sizeof(T)); }

    template <typename T> void section(std::uint32_t id, const std::vector<T>& data) {
        pod(id);
        pod(std::uint64_t(data.size() * sizeof(T)));
        bytes(data.data(), data.size() * sizeof(T));
    }

    // Real arrays are stored widened to f64 so files do not depend on the
    // precision the library was built with.
    void real_section(std::uint32_t id, const std::vector<Real>& data) {
        pod(id);
        pod(std::uint64_t(data.size() * sizeof(double)));
        for (Real v : data)
            pod(double(v));
    }

    void close() {
        out.flush();
        if (!out)
            fail(path, "write failed");
    }
};

struct BinReader {
    std::ifstream in;
    std::filesystem::path path;
    std::uint64_t remaining;

    BinReader(const std::filesystem::path& p) : in(p, std::ios::binary), path(p) {
        if (!in)
            fail(p, "cannot open file");
        remaining = std::filesystem::file_size(p);
    }

    void bytes(void* data, std::size_t len) {
        if (len > remaining)
            fail(path, "truncated file");
        in.read(static_cast<char*>(data), std::streamsize(len));
        if (std::size_t(in.gcount()) != len)
            fail(path, "truncated file");
        remaining -= len;
    }
    template <typename T> T pod() {
        T v;
        bytes(&v, sizeof(T));
        return v;
    }

    bool at_end() const { return remaining == 0; }
};

void check_magic(BinReader& r, const char expect[4]) {
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, expect, 4) != 0)
        fail(r.path, "bad magic, not a " + std::string(expect, 4) + " file");
    const auto version = r.pod<std::uint32_t>();
    if (version != container_version)
        fail(r.path, "unsupported version " + std::to_string(version));
}

// Reads a section header and validates the declared length against the
// expected element count before any allocation.
template <typename T>
std::vector<T> read_section_payload(BinReader& r, std::uint64_t expected_elems) {
    const auto len = r.pod<std::uint64_t>();
    if (len != expected_elems * sizeof(T))
        fail(r.path, "section length " + std::to_string(len) + " does not match expected " +
                         std::to_string(expected_elems * sizeof(T)) + " bytes");
    std::vector<T> data(expected_elems);
    r.bytes(data.data(), std::size_t(len));
    return data;
}

std::vector<Real> read_real_payload(BinReader& r, std::uint64_t expected_elems) {
    auto wide = read_section_payload<double>(r, expected_elems);
    if constexpr (std::is_same_v<Real, double>)
        return wide;
    std::vector<Real> out(wide.size());
    for (std::size_t i = 0; i < wide.size(); ++i)
        out[i] = Real(wide[i]);
    return out;
}

} // namespace

void save_cache(const NeighborList& family, const Corrections& corrections,
                const std::filesystem::path& path) {
    family.validate();
    BinWriter w(path);
    w.bytes("PDNL", 4);
    w.pod(container_version);
    w.pod(std::uint64_t(family.node_count()));
    w.pod(std::uint64_t(family.group_size));
    w.pod(double(family.horizon));
    w.section(sec_entries, family.entries);
    w.section(sec_n_neigh, family.n_neigh);
    w.section(sec_initial_n_neigh, family.initial_n_neigh);
    if (!family.bond_type.empty())
        w.section(sec_bond_type, family.bond_type);
    if (!corrections.lambda.empty())
        w.real_section(sec_lambda, corrections.lambda);
    if (!corrections.beta.empty())
        w.real_section(sec_beta, corrections.beta);
    w.close();
}

FamilyCache load_cache(const std::filesystem::path& path) {
    BinReader r(path);
    check_magic(r, "PDNL");
    const auto n = r.pod<std::uint64_t>();
    const auto group = r.pod<std::uint64_t>();
    const auto horizon = r.pod<double>();
    if (n == 0 || group == 0 || !std::has_single_bit(group))
        fail(path, "corrupt header");

    FamilyCache cache;
    cache.family.group_size = Index(group);
    cache.family.horizon = Real(horizon);
    const std::uint64_t slots = n * group;
    bool have_entries = false, have_counts = false, have_initial = false;
    while (!r.at_end()) {
        const auto id = r.pod<std::uint32_t>();
        switch (id) {
        case sec_entries:
            cache.family.entries = read_section_payload<std::int32_t>(r, slots);
            have_entries = true;
            break;
        case sec_n_neigh:
            cache.family.n_neigh = read_section_payload<std::int32_t>(r, n);
            have_counts = true;
            break;
        case sec_initial_n_neigh:
            cache.family.initial_n_neigh = read_section_payload<std::int32_t>(r, n);
            have_initial = true;
            break;
        case sec_bond_type:
            cache.family.bond_type = read_section_payload<std::uint8_t>(r, slots);
            break;
        case sec_lambda:
            cache.corrections.lambda = read_real_payload(r, slots);
            break;
        case sec_beta:
            cache.corrections.beta = read_real_payload(r, slots);
            break;
        default:
            fail(path, "unknown section id " + std::to_string(id));
        }
    }
    if (!have_entries || !have_counts || !have_initial)
        fail(path, "missing required sections");
    cache.family.validate();
    return cache;
}

void save_state(const SimulationState& state, const std::filesystem::path& path) {
    state.connectivity.validate();
    BinWriter w(path);
    w.bytes("PDST", 4);
    w.pod(container_version);
    w.pod(std::uint64_t(state.size()));
    w.pod(std::uint64_t(state.connectivity.group_size));
    w.pod(std::uint64_t(state.step));
    w.pod(double(state.connectivity.horizon));
    w.real_section(sec_u, state.u);
    w.real_section(sec_v, state.v);
    w.real_section(sec_a, state.a);
    w.section(sec_entries, state.connectivity.entries);
    w.section(sec_n_neigh, state.connectivity.n_neigh);
    w.section(sec_initial_n_neigh, state.connectivity.initial_n_neigh);
    if (!state.connectivity.bond_type.empty())
        w.section(sec_bond_type, state.connectivity.bond_type);
    if (!state.bond_history.empty())
        w.real_section(sec_history, state.bond_history);
    w.close();
}

SimulationState load_state(const std::filesystem::path& path) {
    BinReader r(path);
    check_magic(r, "PDST");
    const auto n = r.pod<std::uint64_t>();
    const auto group = r.pod<std::uint64_t>();
    const auto step = r.pod<std::uint64_t>();
    const auto horizon = r.pod<double>();
    if (n == 0 || group == 0 || !std::has_single_bit(group))
        fail(path, "corrupt header");

    SimulationState state;
    state.step = Index(step);
    state.connectivity.group_size = Index(group);
    state.connectivity.horizon = Real(horizon);
    const std::uint64_t slots = n * group;
    int required = 0;
    while (!r.at_end()) {
        const auto id = r.pod<std::uint32_t>();
        switch (id) {
        case sec_u:
            state.u = read_real_payload(r, 3 * n);
            ++required;
            break;
        case sec_v:
            state.v = read_real_payload(r, 3 * n);
            ++required;
            break;
        case sec_a:
            state.a = read_real_payload(r, 3 * n);
            ++required;
            break;
        case sec_entries:
            state.connectivity.entries = read_section_payload<std::int32_t>(r, slots);
            ++required;
            break;
        case sec_n_neigh:
            state.connectivity.n_neigh = read_section_payload<std::int32_t>(r, n);
            ++required;
            break;
        case sec_initial_n_neigh:
            state.connectivity.initial_n_neigh = read_section_payload<std::int32_t>(r, n);
            ++required;
            break;
        case sec_bond_type:
            state.connectivity.bond_type = read_section_payload<std::uint8_t>(r, slots);
            break;
        case sec_history:
            state.bond_history = read_real_payload(r, slots);
            break;
        default:
            fail(path, "unknown section id " + std::to_string(id));
        }
    }
    if (required != 6)
        fail(path, "missing required sections");
    state.connectivity.validate();
    return state;
}

} // namespace peridyn::io
