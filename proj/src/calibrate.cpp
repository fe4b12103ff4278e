#include "peridyn/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "peridyn/io.hpp"

namespace peridyn::calib {

void ExperimentCurve::validate() const {
    if (control.size() != force.size())
        throw std::invalid_argument("ExperimentCurve: control and force lengths differ");
    if (control.size() < 2)
        throw std::invalid_argument("ExperimentCurve: needs at least 2 samples");
    for (std::size_t i = 1; i < control.size(); ++i)
        if (!(control[i] > control[i - 1]))
            throw std::invalid_argument("ExperimentCurve: control values must be strictly increasing");
}

ExperimentCurve read_curve_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("read_curve_csv: cannot open " + path.string());
    ExperimentCurve curve;
    curve.label = path.stem().string();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double a = 0, b = 0;
        if (!(ss >> a >> b)) {
            if (line_no == 1)
                continue; // header
            throw std::runtime_error("read_curve_csv: " + path.string() + ":" +
                                     std::to_string(line_no) + ": expected two numeric columns");
        }
        curve.control.push_back(Real(a));
        curve.force.push_back(Real(b));
    }
    curve.validate();
    return curve;
}

namespace {

Real interpolate_clamped(const ExperimentCurve& curve, Real x) {
    const auto& c = curve.control;
    if (x <= c.front())
        return curve.force.front();
    if (x >= c.back())
        return curve.force.back();
    const auto it = std::upper_bound(c.begin(), c.end(), x);
    const std::size_t hi = std::size_t(it - c.begin());
    const std::size_t lo = hi - 1;
    const Real t = (x - c[lo]) / (c[hi] - c[lo]);
    return curve.force[lo] + t * (curve.force[hi] - curve.force[lo]);
}

} // namespace

Real mse_loss(const ExperimentCurve& simulated, const ExperimentCurve& experiment) {
    simulated.validate();
    experiment.validate();
    if (simulated.control.back() < experiment.control.front() ||
        experiment.control.back() < simulated.control.front())
        throw std::domain_error("mse_loss: control ranges do not overlap");
    Real sum = 0;
    for (std::size_t i = 0; i < experiment.control.size(); ++i) {
        const Real d = interpolate_clamped(simulated, experiment.control[i]) - experiment.force[i];
        sum += d * d;
    }
    return sum / Real(experiment.control.size());
}

Real elastic_slope(const ExperimentCurve& curve, Real control_limit) {
    curve.validate();
    Real sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < curve.control.size(); ++i) {
        if (curve.control[i] > control_limit && k >= 2)
            break;
        sx += curve.control[i];
        sy += curve.force[i];
        sxx += curve.control[i] * curve.control[i];
        sxy += curve.control[i] * curve.force[i];
        ++k;
    }
    const Real denom = Real(k) * sxx - sx * sx;
    if (!(denom != 0))
        throw std::domain_error("elastic_slope: degenerate elastic window");
    return (Real(k) * sxy - sx * sy) / denom;
}

Real sig_fig_unit(Real value, int figs) {
    const Real mag = std::abs(value);
    if (!(mag > 0))
        return Real(0);
    return std::pow(Real(10), std::floor(std::log10(mag)) - Real(figs - 1));
}

Real round_to_sig_figs(Real value, int figs) {
    const Real unit = sig_fig_unit(value, figs);
    if (unit == 0)
        return 0;
    return std::round(value / unit) * unit;
}

Real binary_search_parameter(const std::function<Real(Real)>& objective, Real lo, Real hi,
                             const BisectOptions& options) {
    if (!(lo < hi))
        throw std::invalid_argument("binary_search_parameter: requires lo < hi");
    auto eval = [&](Real x) {
        const Real f = objective(x);
        if (!std::isfinite(f))
            throw std::runtime_error("binary_search_parameter: objective not finite at " +
                                     io::format_real(double(x)));
        return f;
    };
    Real mid = (lo + hi) / 2;
    for (int it = 0; it < options.max_iterations; ++it) {
        const Real width = hi - lo;
        mid = (lo + hi) / 2;
        const Real unit = sig_fig_unit(mid, options.sig_figs);
        if (unit > 0 && width < unit)
            return mid;
        // probe either side of the midpoint and keep the lower half
        if (eval(mid - width / 8) < eval(mid + width / 8))
            hi = mid;
        else
            lo = mid;
    }
    return (lo + hi) / 2;
}

CalibrateResult calibrate_trilinear(const SimCurveFn& simulate_curve,
                                    const ExperimentCurve& experiment,
                                    const CalibrateOptions& options) {
    experiment.validate();
    CalibrateResult result;
    TrilinearParams p;
    p.c = (options.c_bracket.lo + options.c_bracket.hi) / 2;
    p.s0 = (options.s0_bracket.lo + options.s0_bracket.hi) / 2;
    p.s1 = (options.s1_bracket.lo + options.s1_bracket.hi) / 2;
    p.sc = (options.sc_bracket.lo + options.sc_bracket.hi) / 2;

    const Real limit = options.elastic_control_limit > 0
                           ? options.elastic_control_limit
                           : experiment.control.front() +
                                 (experiment.control.back() - experiment.control.front()) / 5;
    const Real target_slope = elastic_slope(experiment, limit);

    // search one figure tighter than the convergence comparison so the
    // cycling fixed point does not depend on the parameter order
    BisectOptions bisect;
    bisect.sig_figs = options.sig_figs + 1;

    // stiffness first: match the elastic slope
    p.c = binary_search_parameter(
        [&](Real c) {
            TrilinearParams q = p;
            q.c = c;
            const Real d = elastic_slope(simulate_curve(q), limit) - target_slope;
            return d * d;
        },
        options.c_bracket.lo, options.c_bracket.hi, bisect);

    auto bracket_of = [&](const std::string& name) -> const Bracket& {
        if (name == "s0")
            return options.s0_bracket;
        if (name == "s1")
            return options.s1_bracket;
        if (name == "sc")
            return options.sc_bracket;
        throw std::invalid_argument("calibrate_trilinear: unknown parameter '" + name + "'");
    };
    auto slot_of = [&](TrilinearParams& q, const std::string& name) -> Real& {
        if (name == "s0")
            return q.s0;
        if (name == "s1")
            return q.s1;
        return q.sc;
    };

    for (int cycle = 1; cycle <= options.max_cycles; ++cycle) {
        bool changed = false;
        for (const auto& name : options.order) {
            const Bracket& br = bracket_of(name);
            const Real before = slot_of(p, name);
            const Real after = binary_search_parameter(
                [&](Real x) {
                    TrilinearParams q = p;
                    slot_of(q, name) = x;
                    return mse_loss(simulate_curve(q), experiment);
                },
                br.lo, br.hi, bisect);
            slot_of(p, name) = after;
            if (round_to_sig_figs(before, options.sig_figs) !=
                round_to_sig_figs(after, options.sig_figs))
                changed = true;
        }
        result.cycles = cycle;
        if (!changed) {
            result.converged = true;
            break;
        }
    }
    result.estimate = p;
    result.mse = mse_loss(simulate_curve(p), experiment);
    return result;
}

void write_estimates(const std::filesystem::path& path, const CalibrateResult& result) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_estimates: cannot open " + path.string());
    out << "c = " << io::format_real(double(result.estimate.c)) << '\n';
    out << "s0 = " << io::format_real(double(result.estimate.s0)) << '\n';
    out << "s1 = " << io::format_real(double(result.estimate.s1)) << '\n';
    out << "sc = " << io::format_real(double(result.estimate.sc)) << '\n';
    out << "converged = " << (result.converged ? "true" : "false") << '\n';
    out << "cycles = " << result.cycles << '\n';
    out << "mse = " << io::format_real(double(result.mse)) << '\n';
    if (!out)
        throw std::runtime_error("write_estimates: write failed for " + path.string());
}

} // namespace peridyn::calib
