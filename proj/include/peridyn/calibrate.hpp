#pragma once

#include <filesystem>
#include <functional>

#include "peridyn/types.hpp"

namespace peridyn::calib {

/// Force-deflection samples with strictly increasing control values.
struct ExperimentCurve {
    std::vector<Real> control; // m
    std::vector<Real> force;   // N
    std::string label;

    void validate() const;
};

/// Two-column CSV (control, force), header line optional.
ExperimentCurve read_curve_csv(const std::filesystem::path& path);

/// Mean squared force difference after resampling the simulated curve onto
/// the experimental control values (linear interpolation, clamped at the
/// ends).  Errors out when the control ranges do not overlap at all.
Real mse_loss(const ExperimentCurve& simulated, const ExperimentCurve& experiment);

/// Least-squares slope of the samples with control <= control_limit
/// (the elastic window).
Real elastic_slope(const ExperimentCurve& curve, Real control_limit);

Real round_to_sig_figs(Real value, int figs);

/// Width of one unit in the figs-th significant figure of value.
Real sig_fig_unit(Real value, int figs);

struct BisectOptions {
    int sig_figs = 2;
    int max_iterations = 200;
};

/// Pure bisection under a local unimodality assumption: the objective is
/// probed at midpoint +/- width/8 and the bracket recurses into the lower
/// half, so the width strictly halves per iteration.  Stops once the width
/// drops below one unit in the sig_figs-th significant figure of the current
/// midpoint and returns that midpoint.
Real binary_search_parameter(const std::function<Real(Real)>& objective, Real lo, Real hi,
                             const BisectOptions& options = {});

struct TrilinearParams {
    Real c = 0, s0 = 0, s1 = 0, sc = 0;
};

struct Bracket {
    Real lo = 0, hi = 0;
};

struct CalibrateOptions {
    Bracket c_bracket, s0_bracket, s1_bracket, sc_bracket;
    std::vector<std::string> order{"s0", "s1", "sc"};
    int max_cycles = 8;
    int sig_figs = 2;
    Real elastic_control_limit = 0; // 0 = first fifth of the experimental range
};

struct CalibrateResult {
    TrilinearParams estimate;
    bool converged = false;
    int cycles = 0;
    Real mse = 0;
};

using SimCurveFn = std::function<ExperimentCurve(const TrilinearParams&)>;

/// Point-estimate the trilinear parameters against an experimental curve:
/// the stiffness c is fitted first by matching the elastic slope, then s0,
/// s1 and sc are refined by per-parameter binary searches on the MSE,
/// cycling until a full cycle changes nothing at the requested significant
/// figures (or the cycle cap is hit, in which case the best estimate so far
/// is returned with converged = false).
CalibrateResult calibrate_trilinear(const SimCurveFn& simulate_curve,
                                    const ExperimentCurve& experiment,
                                    const CalibrateOptions& options);

/// key=value estimates file.
void write_estimates(const std::filesystem::path& path, const CalibrateResult& result);

} // namespace peridyn::calib
