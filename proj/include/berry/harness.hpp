#pragma once

#include <optional>
#include <string>
#include <vector>

#include "berry/config.hpp"
#include "berry/estimators.hpp"
#include "berry/fit.hpp"
#include "berry/measure.hpp"
#include "berry/randomize.hpp"

namespace berry {

enum class EstimatorStack { Single, FwdRev, Richardson, Randomized };

const char* to_string(EstimatorStack s);
EstimatorStack stack_from_string(const std::string& s);

struct SweepOptions {
    EstimatorStack stack = EstimatorStack::FwdRev;
    double t_start = 50.0;
    double t_ratio = 1.2599210498948732; // 2^(1/3)
    int t_count = 13;
    double alpha = 2.0;
    int order = 1;
    DistKind dist = DistKind::Uniform;
    double lambda = 0.2;
    double sharpness = 1.0;
    long n_samples = 2000;
    std::uint64_t seed = 1;
    PropagateOptions prop;
    BranchResolveConfig branch;
    bool period_average = true; // deterministic oscillatory stacks only
    int period_points = 9;
};

struct ScalingFit {
    double exponent = 0.0;
    double coefficient = 0.0;  // 10^intercept of the log-log fit
    double residual_rms = 0.0; // log10 units
    bool reliable = false;     // residual_rms < 0.2
    std::string window;        // "raw" or "period-averaged"
    std::size_t points = 0;
};

ScalingFit scaling_fit(const std::vector<double>& t, const std::vector<double>& err,
                       const std::string& window);

struct SweepPoint {
    double runtime = 0.0;
    double estimate = 0.0;
    double abs_err = 0.0;
    double cost_t = 0.0; // total evolved time spent on this point
    double std_err = 0.0;       // randomized stack only
    double predicted_bias = 0.0; // randomized stack only
};

struct SweepResult {
    std::string stack_tag;
    std::string model_key;
    std::uint64_t seed = 0;
    double theta_oracle = 0.0;
    double omega1 = 0.0; // oscillation frequency used for period averaging
    // Leading-coefficient prediction for this stack from the expansion data
    // (phi1 for single, |phi2| for fwd-rev, the oscillatory amplitude for the
    // extrapolated stacks); compared against the fitted coefficient in the
    // report.
    double predicted_coefficient = 0.0;
    std::vector<SweepPoint> points;
    ScalingFit fit;                     // raw |err| vs T
    std::optional<ScalingFit> fit_avg;  // period-averaged variant
};

// Run the selected estimator stack at every T of the geometric grid, compare
// against the Wilson-loop oracle, and fit the scaling exponent.
SweepResult sweep(const LoopHamiltonian& model, const SpectralFrame& frame,
                  const SweepOptions& opts);

// Persistence: series CSV plus fit/meta JSON in a directory.
void save_sweep(const SweepResult& res, const std::string& outdir);
SweepResult load_sweep(const std::string& dir);

// Table-style comparison of several sweeps on one model: fitted exponents,
// coefficients vs predictions, and cost-at-accuracy with crossovers.
struct CompareReport {
    std::string text;                       // human-readable table
    std::vector<std::string> csv_lines;     // same content, one row per stack
};
CompareReport compare_report(const std::vector<SweepResult>& sweeps,
                             const std::vector<double>& eps_grid = {1e-2, 3e-3, 1e-3, 3e-4, 1e-4});

// Smallest grid runtime whose tail (all larger grid points) stays within eps;
// infinity when even the largest point misses it.
double required_runtime(const std::vector<double>& t, const std::vector<double>& err, double eps);

enum class PlotKind { ErrorVsT, BiasVsT, ResidualSpectrum };
PlotKind plot_kind_from_string(const std::string& s);

// Tidy CSVs for external plotting. residual-spectrum detrends by T^2,
// applies a Hann window and emits |DFT| per angular frequency.
void emit_plotdata(const SweepResult& res, PlotKind kind, const std::string& path);

struct SpectrumPoint {
    double omega = 0.0; // rad per unit T
    double magnitude = 0.0;
};
std::vector<SpectrumPoint> residual_spectrum(const std::vector<double>& t,
                                             const std::vector<double>& residual,
                                             int detrend_power = 2, bool hann = true);

// Config-file front end used by the CLI: [model], [sweep], [richardson],
// [randomized], [propagate] sections; flags override keys.
SweepOptions sweep_options_from_config(const Config& cfg);

} // namespace berry
