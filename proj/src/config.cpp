#include "peridyn/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "peridyn/formulas.hpp"
#include "peridyn/io.hpp"
#include "peridyn/parallel.hpp"

namespace peridyn::config {

namespace {

struct Entry {
    std::string value;
    std::size_t line = 0;
    bool used = false;
};

struct RawConfig {
    std::string source;
    std::vector<std::pair<std::string, Entry>> items; // file order
    std::map<std::string, std::size_t> index;

    const Entry* find(const std::string& key) const {
        auto it = index.find(key);
        return it == index.end() ? nullptr : &items[it->second].second;
    }
    Entry* find(const std::string& key) {
        auto it = index.find(key);
        return it == index.end() ? nullptr : &items[it->second].second;
    }
};

[[noreturn]] void bad(const RawConfig& raw, const Entry& e, const std::string& what) {
    throw ConfigError(raw.source + ":" + std::to_string(e.line) + ": " + what);
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos)
        return "";
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream ss(s);
    std::vector<std::string> out;
    std::string t;
    while (ss >> t)
        out.push_back(t);
    return out;
}

// ---- key dictionary --------------------------------------------------------

const std::vector<std::string> scalar_keys = {
    "mesh", "horizon", "m_ratio", "surface_correction", "v0", "v0_packing", "dt", "dt_safety",
    "steps", "write_every", "integrator", "variant", "precision", "out", "threads",
    "grid.counts", "grid.spacing", "grid.origin",
    "material.model", "material.density", "material.damping", "material.c",
    "material.bulk_modulus", "material.critical_stretch", "material.fracture_energy",
    "material.youngs_modulus", "material.regime", "material.s0", "material.s1",
    "material.kink_beta", "material.breakpoints", "material.forces",
    "cache.family",
    "bench.grids", "bench.group_sizes", "bench.variants", "bench.steps", "bench.repeats",
    "bench.memory_budget_gib", "bench.threads",
    "calibrate.curve", "calibrate.order", "calibrate.c_bracket", "calibrate.s0_bracket",
    "calibrate.s1_bracket", "calibrate.sc_bracket", "calibrate.control", "calibrate.force",
    "calibrate.force_scale", "calibrate.elastic_limit", "calibrate.max_cycles",
    "calibrate.warm_restart",
};

const std::vector<std::string> bc_fields = {"type",      "region",     "indices", "axes",
                                            "magnitude", "ramp",       "rise_steps",
                                            "no_failure"};
const std::vector<std::string> tip_fields = {"region", "indices"};
const std::vector<std::string> ic_fields = {"region", "indices", "velocity"};

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j)
        prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// Split "bc.left.type" into group, name, field.
bool split_group_key(const std::string& key, std::string& group, std::string& name,
                     std::string& field) {
    const auto p1 = key.find('.');
    if (p1 == std::string::npos)
        return false;
    const auto p2 = key.find('.', p1 + 1);
    if (p2 == std::string::npos)
        return false;
    group = key.substr(0, p1);
    name = key.substr(p1 + 1, p2 - p1 - 1);
    field = key.substr(p2 + 1);
    return group == "bc" || group == "tip" || group == "nofail" || group == "ic";
}

const std::vector<std::string>* group_fields(const std::string& group) {
    if (group == "bc")
        return &bc_fields;
    if (group == "tip" || group == "nofail")
        return &tip_fields;
    if (group == "ic")
        return &ic_fields;
    return nullptr;
}

void check_key_known(const RawConfig& raw, const std::string& key, const Entry& e) {
    std::string group, name, field;
    if (split_group_key(key, group, name, field)) {
        const auto* fields = group_fields(group);
        if (fields && std::find(fields->begin(), fields->end(), field) != fields->end())
            return;
        std::string best;
        std::size_t best_d = std::string::npos;
        for (const auto& f : *fields) {
            const auto d = edit_distance(field, f);
            if (d < best_d) {
                best_d = d;
                best = group + "." + name + "." + f;
            }
        }
        bad(raw, e, "unknown key '" + key + "' (nearest valid key: '" + best + "')");
    }
    if (std::find(scalar_keys.begin(), scalar_keys.end(), key) != scalar_keys.end())
        return;
    std::string best;
    std::size_t best_d = std::string::npos;
    for (const auto& k : scalar_keys) {
        const auto d = edit_distance(key, k);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    bad(raw, e, "unknown key '" + key + "' (nearest valid key: '" + best + "')");
}

// ---- typed readers ---------------------------------------------------------

double read_number(const RawConfig& raw, const Entry& e, const std::string& tok) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        bad(raw, e, "expected a number, got '" + tok + "'");
    }
    if (used != tok.size() || !std::isfinite(v))
        bad(raw, e, "expected a finite number, got '" + tok + "'");
    return v;
}

Real real_value(const RawConfig& raw, const Entry& e) { return Real(read_number(raw, e, trim(e.value))); }

Index index_value(const RawConfig& raw, const Entry& e) {
    const double v = read_number(raw, e, trim(e.value));
    if (v < 0 || double(Index(v)) != v)
        bad(raw, e, "expected a non-negative integer");
    return Index(v);
}

bool bool_value(const RawConfig& raw, const Entry& e) {
    const auto v = trim(e.value);
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    bad(raw, e, "expected true/false, got '" + v + "'");
}

std::vector<Real> real_list(const RawConfig& raw, const Entry& e) {
    std::string v = e.value;
    std::replace(v.begin(), v.end(), ',', ' ');
    std::vector<Real> out;
    for (const auto& t : split_ws(v))
        out.push_back(Real(read_number(raw, e, t)));
    return out;
}

std::vector<Index> index_list(const RawConfig& raw, const Entry& e) {
    std::string v = e.value;
    std::replace(v.begin(), v.end(), ',', ' ');
    std::vector<Index> out;
    for (const auto& t : split_ws(v)) {
        const double x = read_number(raw, e, t);
        if (x < 0 || double(Index(x)) != x)
            bad(raw, e, "expected non-negative integers");
        out.push_back(Index(x));
    }
    return out;
}

int axis_of(const RawConfig& raw, const Entry& e, const std::string& s) {
    if (s == "x")
        return 0;
    if (s == "y")
        return 1;
    if (s == "z")
        return 2;
    bad(raw, e, "expected axis x, y or z, got '" + s + "'");
}

// ---- group assembly --------------------------------------------------------

RegionSpec region_from(const RawConfig& raw, const std::string& prefix, const std::string& name) {
    RegionSpec region;
    region.name = name;
    if (const Entry* e = raw.find(prefix + ".region")) {
        const auto nums = real_list(raw, *e);
        if (nums.size() != 6)
            bad(raw, *e, "region needs 6 numbers: xmin ymin zmin xmax ymax zmax");
        region.box = Box{{nums[0], nums[1], nums[2]}, {nums[3], nums[4], nums[5]}};
    }
    if (const Entry* e = raw.find(prefix + ".indices"))
        region.indices = index_list(raw, *e);
    return region;
}

RampProfile ramp_from(const RawConfig& raw, const std::string& prefix) {
    RampProfile ramp;
    if (const Entry* e = raw.find(prefix + ".ramp")) {
        const auto v = trim(e->value);
        if (v == "constant")
            ramp.kind = RampProfile::Kind::constant;
        else if (v == "linear")
            ramp.kind = RampProfile::Kind::linear;
        else if (v == "quintic")
            ramp.kind = RampProfile::Kind::quintic_smooth;
        else
            bad(raw, *e, "ramp must be constant, linear or quintic");
    }
    if (const Entry* e = raw.find(prefix + ".rise_steps"))
        ramp.rise_steps = index_value(raw, *e);
    return ramp;
}

RawConfig read_raw(std::istream& in, const std::string& source) {
    RawConfig raw;
    raw.source = source;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        const auto t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
        const auto key = trim(t.substr(0, eq));
        const auto value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
        if (raw.index.count(key))
            throw ConfigError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key +
                              "'");
        raw.index[key] = raw.items.size();
        raw.items.push_back({key, Entry{value, line_no, false}});
    }
    return raw;
}

} // namespace

RunConfig parse_config(std::istream& in, const std::string& source_name) {
    RawConfig raw = read_raw(in, source_name);
    for (const auto& [key, entry] : raw.items)
        check_key_known(raw, key, entry);

    RunConfig cfg;
    auto str = [&](const std::string& key, std::string& out) {
        if (const Entry* e = raw.find(key))
            out = trim(e->value);
    };
    auto real_opt = [&](const std::string& key, std::optional<Real>& out) {
        if (const Entry* e = raw.find(key))
            out = real_value(raw, *e);
    };
    auto real_into = [&](const std::string& key, Real& out) {
        if (const Entry* e = raw.find(key))
            out = real_value(raw, *e);
    };
    auto index_into = [&](const std::string& key, Index& out) {
        if (const Entry* e = raw.find(key))
            out = index_value(raw, *e);
    };

    str("mesh", cfg.mesh_path);
    if (const Entry* e = raw.find("grid.counts")) {
        const auto nums = index_list(raw, *e);
        if (nums.size() != 3)
            bad(raw, *e, "grid.counts needs 3 integers");
        GridDesc grid;
        grid.counts = {nums[0], nums[1], nums[2]};
        if (const Entry* s = raw.find("grid.spacing"))
            grid.spacing = real_value(raw, *s);
        else
            bad(raw, *e, "grid.counts requires grid.spacing");
        if (const Entry* o = raw.find("grid.origin")) {
            const auto org = real_list(raw, *o);
            if (org.size() != 3)
                bad(raw, *o, "grid.origin needs 3 numbers");
            grid.origin = {org[0], org[1], org[2]};
        }
        cfg.grid = grid;
    } else if (raw.find("grid.spacing") || raw.find("grid.origin")) {
        throw ConfigError(source_name + ": grid.spacing/grid.origin require grid.counts");
    }

    real_opt("horizon", cfg.horizon);
    real_opt("m_ratio", cfg.m_ratio);

    str("material.model", cfg.material.model);
    real_into("material.density", cfg.material.density);
    real_into("material.damping", cfg.material.damping);
    real_opt("material.c", cfg.material.c);
    real_opt("material.bulk_modulus", cfg.material.bulk_modulus);
    real_opt("material.critical_stretch", cfg.material.critical_stretch);
    real_opt("material.fracture_energy", cfg.material.fracture_energy);
    real_opt("material.youngs_modulus", cfg.material.youngs_modulus);
    str("material.regime", cfg.material.regime);
    real_opt("material.s0", cfg.material.s0);
    real_opt("material.s1", cfg.material.s1);
    real_into("material.kink_beta", cfg.material.kink_beta);
    if (const Entry* e = raw.find("material.breakpoints"))
        cfg.material.breakpoints = real_list(raw, *e);
    if (const Entry* e = raw.find("material.forces"))
        cfg.material.forces = real_list(raw, *e);

    if (const Entry* e = raw.find("surface_correction"))
        cfg.surface_correction = bool_value(raw, *e);
    if (const Entry* e = raw.find("v0")) {
        const auto v = trim(e->value);
        if (v == "analytic" || v == "max_observed")
            cfg.v0_mode = v;
        else {
            cfg.v0_mode = "explicit";
            cfg.v0_value = real_value(raw, *e);
        }
    }
    real_into("v0_packing", cfg.v0_packing);

    if (const Entry* e = raw.find("dt")) {
        if (trim(e->value) != "auto")
            cfg.dt = real_value(raw, *e);
    }
    real_into("dt_safety", cfg.dt_safety);
    index_into("steps", cfg.steps);
    index_into("write_every", cfg.write_every);
    str("integrator", cfg.integrator);
    str("variant", cfg.variant);
    str("precision", cfg.precision);
    str("out", cfg.out_dir);
    str("cache.family", cfg.cache_family);
    if (const Entry* e = raw.find("threads"))
        cfg.threads = unsigned(index_value(raw, *e));

    // bc.<name>.* / tip.<name>.* / nofail.<name>.* / ic.<name>.* groups,
    // collected in first-appearance order
    std::vector<std::pair<std::string, std::string>> group_names; // (group, name)
    for (const auto& [key, entry] : raw.items) {
        std::string group, name, field;
        if (!split_group_key(key, group, name, field))
            continue;
        if (std::find(group_names.begin(), group_names.end(), std::make_pair(group, name)) ==
            group_names.end())
            group_names.push_back({group, name});
    }
    for (const auto& [group, name] : group_names) {
        const std::string prefix = group + "." + name;
        if (group == "bc") {
            BcSpec bc;
            bc.name = name;
            bc.region = region_from(raw, prefix, name);
            if (const Entry* e = raw.find(prefix + ".type")) {
                const auto v = trim(e->value);
                if (v == "displacement")
                    bc.kind = BCKind::displacement;
                else if (v == "force")
                    bc.kind = BCKind::force;
                else
                    bad(raw, *e, "bc type must be displacement or force");
            } else {
                throw ConfigError(source_name + ": bc." + name + " needs a type");
            }
            if (const Entry* e = raw.find(prefix + ".axes")) {
                for (char ch : trim(e->value)) {
                    if (ch == 'x')
                        bc.axes[0] = true;
                    else if (ch == 'y')
                        bc.axes[1] = true;
                    else if (ch == 'z')
                        bc.axes[2] = true;
                    else if (ch != ' ')
                        bad(raw, *e, "axes must be a subset of xyz");
                }
            } else {
                throw ConfigError(source_name + ": bc." + name + " needs axes");
            }
            if (const Entry* e = raw.find(prefix + ".magnitude"))
                bc.magnitude = real_value(raw, *e);
            bc.ramp = ramp_from(raw, prefix);
            if (const Entry* e = raw.find(prefix + ".no_failure"))
                bc.no_failure = bool_value(raw, *e);
            cfg.bcs.push_back(bc);
        } else if (group == "tip") {
            cfg.tips.push_back(TipSpec{name, region_from(raw, prefix, name)});
        } else if (group == "nofail") {
            cfg.no_failure_zones.push_back(TipSpec{name, region_from(raw, prefix, name)});
        } else if (group == "ic") {
            IcSpec ic;
            ic.name = name;
            ic.region = region_from(raw, prefix, name);
            if (const Entry* e = raw.find(prefix + ".velocity")) {
                const auto v = real_list(raw, *e);
                if (v.size() != 3)
                    bad(raw, *e, "ic velocity needs 3 numbers");
                ic.velocity = {v[0], v[1], v[2]};
            } else {
                throw ConfigError(source_name + ": ic." + name + " needs a velocity");
            }
            cfg.ics.push_back(ic);
        }
    }

    // bench group
    if (const Entry* e = raw.find("bench.grids")) {
        for (const auto& spec : split_ws(e->value)) {
            std::string s = spec;
            std::replace(s.begin(), s.end(), 'x', ' ');
            const auto nums = split_ws(s);
            if (nums.size() != 3)
                bad(raw, *e, "bench.grids entries look like 27x27x27");
            std::array<Index, 3> dims{};
            for (int d = 0; d < 3; ++d) {
                const double v = read_number(raw, *e, nums[std::size_t(d)]);
                dims[std::size_t(d)] = Index(v);
            }
            cfg.bench.grids.push_back(dims);
        }
    }
    if (const Entry* e = raw.find("bench.group_sizes")) {
        for (Real v : real_list(raw, *e))
            cfg.bench.group_sizes.push_back(Index(v));
    }
    if (const Entry* e = raw.find("bench.variants"))
        cfg.bench.variants = split_ws(e->value);
    index_into("bench.steps", cfg.bench.steps);
    if (const Entry* e = raw.find("bench.repeats"))
        cfg.bench.repeats = int(index_value(raw, *e));
    if (const Entry* e = raw.find("bench.memory_budget_gib"))
        cfg.bench.memory_budget_gib = read_number(raw, *e, trim(e->value));
    if (const Entry* e = raw.find("bench.threads"))
        cfg.bench.threads = unsigned(index_value(raw, *e));

    // calibrate group
    str("calibrate.curve", cfg.calibrate.curve_path);
    if (const Entry* e = raw.find("calibrate.order"))
        cfg.calibrate.order = split_ws(e->value);
    auto bracket_into = [&](const std::string& key, calib::Bracket& out) {
        if (const Entry* e = raw.find(key)) {
            const auto nums = real_list(raw, *e);
            if (nums.size() != 2 || !(nums[0] < nums[1]))
                bad(raw, *e, "bracket needs two numbers lo < hi");
            out = {nums[0], nums[1]};
        }
    };
    bracket_into("calibrate.c_bracket", cfg.calibrate.c_bracket);
    bracket_into("calibrate.s0_bracket", cfg.calibrate.s0_bracket);
    bracket_into("calibrate.s1_bracket", cfg.calibrate.s1_bracket);
    bracket_into("calibrate.sc_bracket", cfg.calibrate.sc_bracket);
    if (const Entry* e = raw.find("calibrate.control"))
        cfg.calibrate.control = split_ws(e->value);
    if (const Entry* e = raw.find("calibrate.force")) {
        const auto tk = split_ws(e->value);
        if (tk.size() != 2)
            bad(raw, *e, "calibrate.force needs 'tipname axis'");
        cfg.calibrate.force_tip = tk[0];
        cfg.calibrate.force_axis = axis_of(raw, *e, tk[1]);
    }
    real_into("calibrate.force_scale", cfg.calibrate.force_scale);
    real_into("calibrate.elastic_limit", cfg.calibrate.elastic_limit);
    if (const Entry* e = raw.find("calibrate.max_cycles"))
        cfg.calibrate.max_cycles = int(index_value(raw, *e));
    if (const Entry* e = raw.find("calibrate.warm_restart"))
        cfg.calibrate.warm_restart = bool_value(raw, *e);

    return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    return parse_config(in, path.string());
}

// ---- assembly --------------------------------------------------------------

std::vector<Index> resolve_region(const RegionSpec& region, std::span<const Real> coords) {
    const Index n = static_cast<Index>(coords.size()) / 3;
    std::vector<Index> out = region.indices;
    for (Index i : out)
        if (i < 0 || i >= n)
            throw ConfigError("region '" + region.name + "': node index " + std::to_string(i) +
                              " out of range");
    if (region.box) {
        for (Index i = 0; i < n; ++i)
            if (region.box->contains(load_vec3(coords, i)))
                out.push_back(i);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (out.empty())
        throw ConfigError("region '" + region.name + "' selects no nodes");
    return out;
}

namespace {

DamageModel model_from(const RunConfig& cfg, Real horizon) {
    const MaterialSpec& mat = cfg.material;
    DamageModel model;
    model.damping = mat.damping;
    model.use_surface_correction = cfg.surface_correction;

    Real c = 0;
    if (mat.c)
        c = *mat.c;
    else if (mat.bulk_modulus)
        c = pmb_micromodulus(*mat.bulk_modulus, horizon);
    else if (cfg.material.model != "nlinear")
        throw ConfigError("material: needs material.c or material.bulk_modulus");

    Real sc = 0;
    if (cfg.material.model != "nlinear") {
        if (mat.critical_stretch)
            sc = *mat.critical_stretch;
        else if (mat.fracture_energy && mat.youngs_modulus) {
            Regime regime = Regime::three_d;
            if (mat.regime == "plane_stress")
                regime = Regime::plane_stress;
            else if (mat.regime == "plane_strain")
                regime = Regime::plane_strain;
            else if (mat.regime != "3d")
                throw ConfigError("material.regime must be 3d, plane_stress or plane_strain");
            sc = critical_stretch(*mat.fracture_energy, *mat.youngs_modulus, horizon, regime);
        } else {
            throw ConfigError("material: needs material.critical_stretch or "
                              "material.fracture_energy + material.youngs_modulus");
        }
    }

    if (mat.model == "pmb") {
        model.laws.push_back(DamageLaw::pmb(c, sc));
    } else if (mat.model == "bilinear") {
        if (!mat.s0)
            throw ConfigError("material: bilinear model needs material.s0");
        model.laws.push_back(DamageLaw::bilinear(c, *mat.s0, sc));
    } else if (mat.model == "trilinear") {
        if (!mat.s0 || !mat.s1)
            throw ConfigError("material: trilinear model needs material.s0 and material.s1");
        model.laws.push_back(DamageLaw::trilinear(c, *mat.s0, *mat.s1, sc, mat.kink_beta));
    } else if (mat.model == "nlinear") {
        if (mat.breakpoints.empty() || mat.breakpoints.size() != mat.forces.size())
            throw ConfigError("material: nlinear model needs matching material.breakpoints and "
                              "material.forces");
        if (!mat.c)
            throw ConfigError("material: nlinear model needs material.c");
        DamageLaw law{*mat.c, mat.breakpoints, mat.forces};
        law.validate();
        model.laws.push_back(law);
    } else {
        throw ConfigError("material.model must be pmb, bilinear, trilinear or nlinear");
    }
    try {
        model.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("material: ") + e.what());
    }
    return model;
}

} // namespace

AssembledModel assemble(const RunConfig& cfg, bool use_cache) {
    const std::string built_precision = sizeof(Real) == 8 ? "f64" : "f32";
    if (cfg.precision != built_precision)
        throw ConfigError("precision '" + cfg.precision + "' requested but this build is " +
                          built_precision + " (rebuild with PERIDYN_SINGLE_PRECISION toggled)");
    if (cfg.threads)
        set_worker_cap(cfg.threads);

    InputMesh mesh;
    if (!cfg.mesh_path.empty()) {
        try {
            mesh = io::read_mesh(cfg.mesh_path);
        } catch (const io::IoError& e) {
            throw ConfigError(e.what());
        }
    } else if (cfg.grid) {
        mesh = mesh_from_grid(*cfg.grid);
    } else {
        throw ConfigError("no mesh source: set 'mesh' or grid.counts/grid.spacing");
    }

    AssembledModel out;
    out.particles.coords = mesh.vertices;
    out.particles.volume = lump_volumes(mesh);
    const Index n = out.particles.size();
    if (!(cfg.material.density > 0))
        throw ConfigError("material.density must be set and positive");
    out.particles.density.assign(std::size_t(n), cfg.material.density);
    out.particles.material_tag.assign(std::size_t(n), 0);

    Real horizon = 0;
    if (cfg.horizon)
        horizon = *cfg.horizon;
    else if (cfg.m_ratio) {
        if (!mesh.grid)
            throw ConfigError("m_ratio needs a grid mesh source (no spacing available)");
        horizon = *cfg.m_ratio * mesh.grid->spacing;
    } else {
        throw ConfigError("set 'horizon' or 'm_ratio'");
    }

    const GridDesc* hint = mesh.grid ? &*mesh.grid : nullptr;
    bool cached = false;
    if (use_cache && !cfg.cache_family.empty() && std::filesystem::exists(cfg.cache_family)) {
        io::FamilyCache cache = io::load_cache(cfg.cache_family);
        if (cache.family.node_count() != n)
            throw ConfigError("cache '" + cfg.cache_family + "' holds " +
                              std::to_string(cache.family.node_count()) + " nodes, mesh has " +
                              std::to_string(n));
        if (std::abs(double(cache.family.horizon) - double(horizon)) >
            1e-12 * std::max(1.0, std::abs(double(horizon))))
            throw ConfigError("cache '" + cfg.cache_family + "' was built for horizon " +
                              io::format_real(double(cache.family.horizon)));
        out.family = std::move(cache.family);
        out.corrections = std::move(cache.corrections);
        cached = true;
    } else {
        out.family = build_family(out.particles.coords, horizon, hint);
    }
    out.family_from_cache = cached;

    out.model = model_from(cfg, horizon);

    if (cfg.surface_correction && out.corrections.lambda.empty()) {
        Real v0 = 0;
        if (cfg.v0_mode == "analytic")
            v0 = analytic_neighborhood_volume(horizon, cfg.v0_packing);
        else if (cfg.v0_mode == "max_observed")
            v0 = max_neighborhood_volume(out.particles.volume, out.family);
        else
            v0 = cfg.v0_value;
        if (!(v0 > 0))
            throw ConfigError("surface correction: V0 must be positive");
        out.corrections.lambda = surface_correction_factors(out.particles.volume, out.family, v0);
    }

    out.bc = BoundaryConditions::none(n);
    for (const auto& spec : cfg.bcs) {
        const auto nodes = resolve_region(spec.region, out.particles.coords);
        out.bc.ramps.push_back(spec.ramp);
        const auto ramp_id = std::uint8_t(out.bc.ramps.size() - 1);
        for (Index i : nodes) {
            for (int ax = 0; ax < 3; ++ax) {
                if (!spec.axes[std::size_t(ax)])
                    continue;
                const std::size_t slot = std::size_t(3 * i + ax);
                if (out.bc.kind[slot] != BCKind::free)
                    throw ConfigError("bc '" + spec.name + "': node " + std::to_string(i) +
                                      " axis " + std::string(1, "xyz"[ax]) +
                                      " already constrained");
                out.bc.kind[slot] = spec.kind;
                out.bc.magnitude[slot] = spec.magnitude;
                out.bc.ramp_id[slot] = ramp_id;
            }
            if (spec.no_failure)
                out.bc.no_failure[std::size_t(i)] = 1;
        }
    }
    for (const auto& zone : cfg.no_failure_zones)
        for (Index i : resolve_region(zone.region, out.particles.coords))
            out.bc.no_failure[std::size_t(i)] = 1;
    for (const auto& tip : cfg.tips)
        out.bc.tip_sets[tip.name] = resolve_region(tip.region, out.particles.coords);

    out.dt = cfg.dt ? *cfg.dt
                    : stable_timestep_hint(out.particles, out.model, out.family, cfg.dt_safety,
                                           out.corrections.beta);
    if (!(out.dt > 0))
        throw ConfigError("dt must be positive");

    if (cfg.integrator == "verlet")
        out.integrator = IntegratorKind::velocity_verlet;
    else if (cfg.integrator == "euler")
        out.integrator = IntegratorKind::euler;
    else if (cfg.integrator == "euler_cromer")
        out.integrator = IntegratorKind::euler_cromer;
    else
        throw ConfigError("integrator must be verlet, euler or euler_cromer");

    if (cfg.variant == "bpr")
        out.variant = KernelVariant::bond_parallel;
    else if (cfg.variant == "node")
        out.variant = KernelVariant::node_parallel;
    else
        throw ConfigError("variant must be bpr or node");

    try {
        out.particles.validate();
        out.family.validate();
        out.bc.validate(n);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return out;
}

ModelBundle bundle_of(const AssembledModel& assembled) {
    ModelBundle bundle;
    bundle.particles = assembled.particles;
    bundle.model = assembled.model;
    bundle.corrections = assembled.corrections;
    bundle.bc = assembled.bc;
    bundle.dt = assembled.dt;
    return bundle;
}

SimulationState initial_state(const AssembledModel& assembled, const RunConfig& cfg) {
    SimulationState state = make_state(assembled.family, assembled.model.needs_history());
    for (const auto& ic : cfg.ics)
        for (Index i : resolve_region(ic.region, assembled.particles.coords))
            store_vec3(state.v, i, ic.velocity);
    return state;
}

// ---- calibration rig -------------------------------------------------------

namespace {

struct ControlSpec {
    std::string tip_a, tip_b; // tip_b empty = single-set control
    int axis = 0;
};

ControlSpec control_spec_of(const RunConfig& cfg) {
    const auto& c = cfg.calibrate.control;
    ControlSpec spec;
    if (c.size() == 3) {
        spec.tip_a = c[0];
        spec.tip_b = c[1];
        spec.axis = c[2] == "x" ? 0 : (c[2] == "y" ? 1 : 2);
    } else if (c.size() == 2) {
        spec.tip_a = c[0];
        spec.axis = c[1] == "x" ? 0 : (c[1] == "y" ? 1 : 2);
    } else {
        throw ConfigError("calibrate.control needs 'tipA tipB axis' or 'tip axis'");
    }
    return spec;
}

calib::ExperimentCurve extract_curve(const TipSeries& tips, const ControlSpec& control,
                                     const std::string& force_tip, int force_axis,
                                     Real force_scale) {
    auto series_of = [&](const std::string& name) -> const std::vector<TipRecord>& {
        auto it = tips.find(name);
        if (it == tips.end())
            throw std::runtime_error("calibration: tip set '" + name + "' was not recorded");
        return it->second;
    };
    const auto& a = series_of(control.tip_a);
    const auto& f = series_of(force_tip);
    const std::vector<TipRecord>* b = control.tip_b.empty() ? nullptr : &series_of(control.tip_b);

    calib::ExperimentCurve curve;
    curve.label = "simulated";
    Real last = -std::numeric_limits<Real>::infinity();
    for (std::size_t k = 0; k < a.size(); ++k) {
        Real ctl = a[k].mean_u[control.axis];
        if (b)
            ctl -= (*b)[k].mean_u[control.axis];
        if (!(ctl > last))
            continue; // keep the control strictly increasing
        last = ctl;
        curve.control.push_back(ctl);
        curve.force.push_back(force_scale * f[k].body_force_sum[force_axis]);
    }
    if (curve.control.size() < 2)
        throw std::runtime_error("calibration: extracted fewer than 2 curve samples; "
                                 "increase steps or lower write_every");
    return curve;
}

void merge_series(TipSeries& into, const TipSeries& suffix) {
    for (const auto& [name, records] : suffix) {
        auto& dst = into[name];
        dst.insert(dst.end(), records.begin(), records.end());
    }
}

Real max_history(const SimulationState& state) {
    Real best = 0;
    for (Real h : state.bond_history)
        best = std::max(best, h);
    return best;
}

struct WarmCache {
    bool valid = false;
    Real c = 0;
    Real elastic_limit = 0; // the s0 the checkpoint run used
    Real attained = 0;      // max bond stretch over the prefix
    Index step = 0;
    SimulationState state;
    TipSeries prefix;
};

} // namespace

calib::SimCurveFn make_curve_rig(const AssembledModel& assembled, const RunConfig& cfg) {
    if (cfg.steps < 1)
        throw ConfigError("calibration needs steps >= 1");
    if (cfg.write_every < 1)
        throw ConfigError("calibration needs write_every >= 1");
    if (cfg.calibrate.force_tip.empty())
        throw ConfigError("calibrate.force must name a tip set and axis");
    const ControlSpec control = control_spec_of(cfg);
    auto cache = std::make_shared<WarmCache>();
    const bool warm = cfg.calibrate.warm_restart;
    // state copies are cheap at calibration scale; the rig trades memory for
    // skipping the elastic leg of every softening-parameter evaluation
    const Index checkpoint_step =
        (cfg.steps / 4) / std::max<Index>(cfg.write_every, 1) * cfg.write_every;

    return [assembled, cfg, control, cache, warm,
            checkpoint_step](const calib::TrilinearParams& p) -> calib::ExperimentCurve {
        ModelBundle bundle = bundle_of(assembled);
        bundle.model.laws.assign(1, DamageLaw::trilinear(p.c, p.s0, p.s1, p.sc,
                                                         cfg.material.kink_beta));

        SimulateOptions opts;
        opts.write_every = cfg.write_every;
        opts.integrator = assembled.integrator;
        opts.variant = assembled.variant;

        TipSeries series;
        SimulationState state;
        const bool reuse = warm && cache->valid && cache->c == p.c &&
                           cache->attained < Real(0.9) * std::min(p.s0, cache->elastic_limit);
        if (reuse) {
            state = cache->state;
            series = cache->prefix;
            opts.first_step = cache->step;
            opts.steps = cfg.steps - cache->step;
            merge_series(series, simulate(bundle, state, opts).tips);
        } else {
            state = initial_state(assembled, cfg);
            if (warm && checkpoint_step > 0 && checkpoint_step < cfg.steps) {
                opts.first_step = 0;
                opts.steps = checkpoint_step;
                series = simulate(bundle, state, opts).tips;
                cache->valid = true;
                cache->c = p.c;
                cache->elastic_limit = p.s0;
                cache->attained = max_history(state);
                cache->step = checkpoint_step;
                cache->state = state;
                cache->prefix = series;
                opts.first_step = checkpoint_step;
                opts.steps = cfg.steps - checkpoint_step;
                merge_series(series, simulate(bundle, state, opts).tips);
            } else {
                opts.first_step = 0;
                opts.steps = cfg.steps;
                series = simulate(bundle, state, opts).tips;
            }
        }
        return extract_curve(series, control, cfg.calibrate.force_tip, cfg.calibrate.force_axis,
                             cfg.calibrate.force_scale);
    };
}

} // namespace peridyn::config
