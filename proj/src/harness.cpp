#include "berry/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "berry/apt.hpp"
#include "berry/csvio.hpp"
#include "berry/errors.hpp"

namespace berry {

const char* to_string(EstimatorStack s) {
    switch (s) {
        case EstimatorStack::Single: return "single";
        case EstimatorStack::FwdRev: return "fwd-rev";
        case EstimatorStack::Richardson: return "richardson";
        case EstimatorStack::Randomized: return "randomized";
    }
    return "?";
}

EstimatorStack stack_from_string(const std::string& s) {
    if (s == "single") return EstimatorStack::Single;
    if (s == "fwd-rev") return EstimatorStack::FwdRev;
    if (s == "richardson") return EstimatorStack::Richardson;
    if (s == "randomized") return EstimatorStack::Randomized;
    throw ConfigError("unknown estimator stack '" + s + "'");
}

ScalingFit scaling_fit(const std::vector<double>& t, const std::vector<double>& err,
                       const std::string& window) {
    const LineFit lf = fit_loglog(t, err);
    ScalingFit f;
    f.exponent = lf.slope;
    f.coefficient = std::pow(10.0, lf.intercept);
    f.residual_rms = lf.residual_rms;
    f.reliable = lf.residual_rms < 0.2 && lf.n >= 4;
    f.window = window;
    f.points = lf.n;
    return f;
}

namespace {

std::string stack_tag(const SweepOptions& o) {
    std::ostringstream os;
    os << to_string(o.stack);
    if (o.stack == EstimatorStack::Richardson || o.stack == EstimatorStack::Randomized)
        os << "(m=" << o.order << ",a=" << fmt_double(o.alpha) << ")";
    if (o.stack == EstimatorStack::Randomized)
        os << "[" << to_string(o.dist) << ",l=" << fmt_double(o.lambda) << ",N=" << o.n_samples
           << "]";
    return os.str();
}

} // namespace

SweepResult sweep(const LoopHamiltonian& model, const SpectralFrame& frame,
                  const SweepOptions& opts) {
    if (opts.t_count < 4) throw ConfigError("sweep: fits need at least 4 grid points");
    if (!(opts.t_ratio > 1.0)) throw ConfigError("sweep: t_ratio must exceed 1");

    SweepResult res;
    res.stack_tag = stack_tag(opts);
    res.model_key = model.cache_key();
    res.seed = opts.seed;
    res.theta_oracle = berry_phase_oracle(frame, 0);
    res.omega1 = frame.omega(frame.grid_size, 1);

    CostLedger ledger;
    const EigenphaseFn fn = exact_eigenphase_fn(model, &ledger, opts.prop);

    // Shared machinery for the deterministic stacks.
    std::optional<BranchResult> branch;
    std::optional<RichardsonScheme> scheme;
    if (opts.stack == EstimatorStack::FwdRev || opts.stack == EstimatorStack::Richardson) {
        branch = branch_resolve(model, frame, fn, opts.branch);
        if (opts.stack == EstimatorStack::Richardson)
            scheme = RichardsonScheme::make(opts.alpha, opts.order);
    }
    const AptBreakdown bd = phase_coefficients(frame);
    switch (opts.stack) {
        case EstimatorStack::Single:
            res.predicted_coefficient = bd.phi1;
            break;
        case EstimatorStack::FwdRev:
            res.predicted_coefficient = std::abs(bd.phi2);
            break;
        case EstimatorStack::Richardson:
        case EstimatorStack::Randomized: {
            double sum_b = 0.0;
            for (double b : bd.b_n) sum_b += std::abs(b);
            res.predicted_coefficient = 2.0 * sum_b / (opts.alpha * opts.alpha - 1.0);
            break;
        }
    }

    RuntimeDistribution dist;
    if (opts.stack == EstimatorStack::Randomized) {
        switch (opts.dist) {
            case DistKind::Uniform: dist = RuntimeDistribution::uniform(opts.lambda); break;
            case DistKind::Triangular: dist = RuntimeDistribution::triangular(opts.lambda); break;
            case DistKind::SmoothBump:
                dist = RuntimeDistribution::smooth_bump(opts.lambda, opts.sharpness);
                break;
        }
    }

    auto estimate_at = [&](double t) -> double {
        switch (opts.stack) {
            case EstimatorStack::Single:
                return single_evolution_estimate(model, fn, t);
            case EstimatorStack::FwdRev: {
                const PhasePair pair =
                    measure_phase_pair(fn, t, PhaseSource::ExactPropagator);
                return lift(forward_reverse_estimate(pair), branch->coarse);
            }
            case EstimatorStack::Richardson: {
                std::vector<LiftedEstimate> lifted;
                for (int k = 0; k <= opts.order; ++k) {
                    const PhasePair pair = measure_phase_pair(fn, std::pow(opts.alpha, k) * t,
                                                              PhaseSource::ExactPropagator);
                    LiftedEstimate e;
                    e.coarse = branch->coarse;
                    e.value = lift(forward_reverse_estimate(pair), branch->coarse);
                    lifted.push_back(e);
                }
                return richardson(*scheme, lifted);
            }
            case EstimatorStack::Randomized:
                break; // handled separately (carries its own statistics)
        }
        throw ConfigError("unreachable stack");
    };

    std::vector<double> ts, errs;
    for (int i = 0; i < opts.t_count; ++i) {
        const double t = opts.t_start * std::pow(opts.t_ratio, i);
        SweepPoint p;
        p.runtime = t;
        const double cost_before = ledger.total_evolved_time;
        if (opts.stack == EstimatorStack::Randomized) {
            RandomizedConfig rc;
            rc.seed = opts.seed;
            rc.prop = opts.prop;
            rc.branch = opts.branch;
            const RandomizedEstimate est = randomized_richardson(
                model, frame, dist, t, opts.alpha, opts.order, opts.n_samples,
                opts.seed + static_cast<std::uint64_t>(i), rc);
            p.estimate = est.mean;
            p.std_err = est.std_err;
            p.cost_t = est.cost_total_t;
            p.predicted_bias = bias_prediction(bd, dist, t, opts.alpha);
        } else {
            p.estimate = estimate_at(t);
            p.cost_t = ledger.total_evolved_time - cost_before;
        }
        p.abs_err = circ_dist(p.estimate, res.theta_oracle);
        res.points.push_back(p);
        ts.push_back(t);
        errs.push_back(p.abs_err);
    }
    res.fit = scaling_fit(ts, errs, "raw");

    const bool oscillatory =
        opts.stack == EstimatorStack::FwdRev || opts.stack == EstimatorStack::Richardson;
    if (opts.period_average && oscillatory && res.omega1 > 0.0) {
        const double half = kPi / res.omega1;
        std::vector<double> avg(errs.size(), 0.0);
        for (std::size_t i = 0; i < ts.size(); ++i) {
            double acc = 0.0;
            for (int q = 0; q < opts.period_points; ++q) {
                const double t = ts[i] - half +
                                 2.0 * half * (q + 0.5) / static_cast<double>(opts.period_points);
                acc += circ_dist(estimate_at(t), res.theta_oracle);
            }
            avg[i] = acc / opts.period_points;
        }
        res.fit_avg = scaling_fit(ts, avg, "period-averaged");
    }
    return res;
}

void save_sweep(const SweepResult& res, const std::string& outdir) {
    std::filesystem::create_directories(outdir);
    {
        CsvWriter w(outdir + "/series.csv", "sweep series: " + res.stack_tag,
                    {"t", "estimate", "abs_err", "cost_t", "std_err", "predicted_bias"});
        for (const auto& p : res.points)
            w.row({fmt_double(p.runtime), fmt_double(p.estimate), fmt_double(p.abs_err),
                   fmt_double(p.cost_t), fmt_double(p.std_err), fmt_double(p.predicted_bias)});
    }
    nlohmann::ordered_json j;
    j["stack"] = res.stack_tag;
    j["model_key"] = res.model_key;
    j["seed"] = res.seed;
    j["theta_oracle"] = res.theta_oracle;
    j["omega1"] = res.omega1;
    j["predicted_coefficient"] = res.predicted_coefficient;
    auto fit_json = [](const ScalingFit& f) {
        return nlohmann::ordered_json{{"exponent", f.exponent},
                                      {"coefficient", f.coefficient},
                                      {"residual_rms", f.residual_rms},
                                      {"reliable", f.reliable},
                                      {"window", f.window},
                                      {"points", f.points}};
    };
    j["fit"] = fit_json(res.fit);
    if (res.fit_avg) j["fit_averaged"] = fit_json(*res.fit_avg);
    std::ofstream meta(outdir + "/meta.json");
    if (!meta) throw ConfigError("cannot write " + outdir + "/meta.json");
    meta << j.dump(2) << "\n";
}

SweepResult load_sweep(const std::string& dir) {
    SweepResult res;
    const CsvTable t = read_csv(dir + "/series.csv");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        SweepPoint p;
        p.runtime = t.num(r, "t");
        p.estimate = t.num(r, "estimate");
        p.abs_err = t.num(r, "abs_err");
        p.cost_t = t.num(r, "cost_t");
        p.std_err = t.num(r, "std_err");
        p.predicted_bias = t.num(r, "predicted_bias");
        res.points.push_back(p);
    }
    std::ifstream meta(dir + "/meta.json");
    if (!meta) throw ConfigError("cannot open " + dir + "/meta.json");
    nlohmann::json j;
    meta >> j;
    res.stack_tag = j.at("stack").get<std::string>();
    res.model_key = j.at("model_key").get<std::string>();
    res.seed = j.at("seed").get<std::uint64_t>();
    res.theta_oracle = j.at("theta_oracle").get<double>();
    res.omega1 = j.at("omega1").get<double>();
    res.predicted_coefficient = j.value("predicted_coefficient", 0.0);
    auto fit_from = [](const nlohmann::json& f) {
        ScalingFit s;
        s.exponent = f.at("exponent").get<double>();
        s.coefficient = f.at("coefficient").get<double>();
        s.residual_rms = f.at("residual_rms").get<double>();
        s.reliable = f.at("reliable").get<bool>();
        s.window = f.at("window").get<std::string>();
        s.points = f.at("points").get<std::size_t>();
        return s;
    };
    res.fit = fit_from(j.at("fit"));
    if (j.contains("fit_averaged")) res.fit_avg = fit_from(j.at("fit_averaged"));
    return res;
}

double required_runtime(const std::vector<double>& t, const std::vector<double>& err, double eps) {
    // Monotone envelope: the smallest grid point whose whole tail fits eps.
    double best = std::numeric_limits<double>::infinity();
    double tail_max = 0.0;
    for (std::size_t i = t.size(); i-- > 0;) {
        tail_max = std::max(tail_max, err[i]);
        if (tail_max <= eps) best = t[i];
    }
    return best;
}

CompareReport compare_report(const std::vector<SweepResult>& sweeps,
                             const std::vector<double>& eps_grid) {
    if (sweeps.size() < 2) throw ConfigError("compare_report needs at least two sweeps");
    for (const auto& s : sweeps)
        if (s.model_key != sweeps.front().model_key)
            throw ConfigError("compare_report: sweeps ran on different models (" + s.model_key +
                              " vs " + sweeps.front().model_key + ")");
        else if (s.points.empty())
            throw ConfigError("compare_report: empty sweep for " + s.stack_tag);

    CompareReport rep;
    std::ostringstream os;
    os << "model: " << sweeps.front().model_key << "\n";
    os << "stack                                exponent   avg-exponent  coeff     predicted   rms     ok\n";
    std::ostringstream csv;
    csv << "stack,exponent,avg_exponent,coefficient,predicted_coefficient,residual_rms,reliable";
    for (double e : eps_grid) csv << ",cost@" << fmt_double(e);
    rep.csv_lines.push_back(csv.str());

    for (const auto& s : sweeps) {
        char line[256];
        std::snprintf(line, sizeof(line), "%-36s %+9.3f  %+9.3f     %-9.3g %-9.3g  %5.3f   %s",
                      s.stack_tag.c_str(), s.fit.exponent,
                      s.fit_avg ? s.fit_avg->exponent : s.fit.exponent, s.fit.coefficient,
                      s.predicted_coefficient, s.fit.residual_rms, s.fit.reliable ? "yes" : "NO");
        os << line << "\n";
        std::ostringstream row;
        row << s.stack_tag << "," << fmt_double(s.fit.exponent) << ","
            << fmt_double(s.fit_avg ? s.fit_avg->exponent : s.fit.exponent) << ","
            << fmt_double(s.fit.coefficient) << "," << fmt_double(s.predicted_coefficient) << ","
            << fmt_double(s.fit.residual_rms) << "," << (s.fit.reliable ? "yes" : "no");
        std::vector<double> ts, errs, costs;
        for (const auto& p : s.points) {
            ts.push_back(p.runtime);
            errs.push_back(p.abs_err);
            costs.push_back(p.cost_t);
        }
        for (double e : eps_grid) {
            const double treq = required_runtime(ts, errs, e);
            if (std::isinf(treq)) {
                row << ",-";
            } else {
                const std::size_t idx = static_cast<std::size_t>(
                    std::lower_bound(ts.begin(), ts.end(), treq) - ts.begin());
                row << "," << fmt_double(costs[idx]);
            }
        }
        rep.csv_lines.push_back(row.str());
    }

    // Cost-at-accuracy and the single vs fwd-rev crossover.
    os << "\ncost at accuracy (total evolved time; '-' unreachable on this grid):\n";
    os << "eps";
    for (const auto& s : sweeps) os << "\t" << s.stack_tag;
    os << "\n";
    std::vector<std::vector<double>> cost_tab(sweeps.size());
    for (double e : eps_grid) {
        os << fmt_double(e);
        for (std::size_t k = 0; k < sweeps.size(); ++k) {
            std::vector<double> ts, errs, costs;
            for (const auto& p : sweeps[k].points) {
                ts.push_back(p.runtime);
                errs.push_back(p.abs_err);
                costs.push_back(p.cost_t);
            }
            const double treq = required_runtime(ts, errs, e);
            if (std::isinf(treq)) {
                os << "\t-";
                cost_tab[k].push_back(std::numeric_limits<double>::infinity());
            } else {
                const std::size_t idx = static_cast<std::size_t>(
                    std::lower_bound(ts.begin(), ts.end(), treq) - ts.begin());
                os << "\t" << fmt_double(costs[idx]);
                cost_tab[k].push_back(costs[idx]);
            }
        }
        os << "\n";
    }
    int single_idx = -1, fwdrev_idx = -1;
    for (std::size_t k = 0; k < sweeps.size(); ++k) {
        if (sweeps[k].stack_tag == "single") single_idx = static_cast<int>(k);
        if (sweeps[k].stack_tag == "fwd-rev") fwdrev_idx = static_cast<int>(k);
    }
    if (single_idx >= 0 && fwdrev_idx >= 0) {
        double crossover = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t e = 0; e < eps_grid.size(); ++e) {
            const double cs = cost_tab[static_cast<std::size_t>(single_idx)][e];
            const double cf = cost_tab[static_cast<std::size_t>(fwdrev_idx)][e];
            if (std::isfinite(cs) && std::isfinite(cf) && cf < cs) {
                crossover = eps_grid[e];
                break;
            }
        }
        if (std::isnan(crossover))
            os << "\nno crossover: fwd-rev never beats single on this accuracy grid\n";
        else
            os << "\ncrossover: fwd-rev beats single for eps <= " << fmt_double(crossover) << "\n";
    }
    rep.text = os.str();
    return rep;
}

PlotKind plot_kind_from_string(const std::string& s) {
    if (s == "error-vs-T") return PlotKind::ErrorVsT;
    if (s == "bias-vs-T") return PlotKind::BiasVsT;
    if (s == "residual-spectrum") return PlotKind::ResidualSpectrum;
    throw ConfigError("unknown plot kind '" + s + "'");
}

std::vector<SpectrumPoint> residual_spectrum(const std::vector<double>& t,
                                             const std::vector<double>& residual,
                                             int detrend_power, bool hann) {
    const std::size_t n = t.size();
    if (n < 8 || residual.size() != n)
        throw ConfigError("residual_spectrum needs >= 8 matched samples");
    const double dt = t[1] - t[0];
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs((t[i] - t[i - 1]) - dt) > 1e-9 * std::max(1.0, dt))
            throw ConfigError("residual_spectrum requires a uniform runtime grid");

    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = residual[i] * std::pow(t[i], detrend_power);
    // Remove the smooth non-oscillatory tail (constant, 1/T, 1/T^2) so it
    // does not masquerade as near-DC spectral mass; frequencies below one
    // cycle per window are unresolvable anyway.
    {
        Eigen::MatrixXd basis(static_cast<long>(n), 3);
        Eigen::VectorXd rhs(static_cast<long>(n));
        for (std::size_t i = 0; i < n; ++i) {
            basis(static_cast<long>(i), 0) = 1.0;
            basis(static_cast<long>(i), 1) = 1.0 / t[i];
            basis(static_cast<long>(i), 2) = 1.0 / (t[i] * t[i]);
            rhs(static_cast<long>(i)) = y[i];
        }
        const Eigen::VectorXd coef =
            (basis.transpose() * basis).ldlt().solve(basis.transpose() * rhs);
        for (std::size_t i = 0; i < n; ++i)
            y[i] -= coef(0) + coef(1) / t[i] + coef(2) / (t[i] * t[i]);
    }
    if (hann)
        for (std::size_t i = 0; i < n; ++i)
            y[i] *= 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(i) /
                                          static_cast<double>(n - 1)));
    std::vector<SpectrumPoint> out;
    for (std::size_t k = 0; k <= n / 2; ++k) {
        Complex acc(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            acc += y[i] * std::polar(1.0, -kTwoPi * static_cast<double>(k * i) /
                                              static_cast<double>(n));
        SpectrumPoint p;
        p.omega = kTwoPi * static_cast<double>(k) / (static_cast<double>(n) * dt);
        p.magnitude = std::abs(acc) * 2.0 / static_cast<double>(n);
        out.push_back(p);
    }
    return out;
}

void emit_plotdata(const SweepResult& res, PlotKind kind, const std::string& path) {
    if (res.points.empty()) throw ConfigError("emit_plotdata: empty series");
    switch (kind) {
        case PlotKind::ErrorVsT: {
            CsvWriter w(path, "absolute estimate error vs runtime, stack " + res.stack_tag,
                        {"t", "abs_err", "estimate", "cost_t"});
            for (const auto& p : res.points)
                w.row({fmt_double(p.runtime), fmt_double(p.abs_err), fmt_double(p.estimate),
                       fmt_double(p.cost_t)});
            return;
        }
        case PlotKind::BiasVsT: {
            CsvWriter w(path, "signed bias vs runtime with prediction, stack " + res.stack_tag,
                        {"t", "bias", "std_err", "predicted_bias"});
            for (const auto& p : res.points)
                w.row({fmt_double(p.runtime), fmt_double(wrap_pm_pi(p.estimate - res.theta_oracle)),
                       fmt_double(p.std_err), fmt_double(p.predicted_bias)});
            return;
        }
        case PlotKind::ResidualSpectrum: {
            std::vector<double> ts, r;
            for (const auto& p : res.points) {
                ts.push_back(p.runtime);
                r.push_back(wrap_pm_pi(p.estimate - res.theta_oracle));
            }
            const auto spec = residual_spectrum(ts, r);
            CsvWriter w(path,
                        "residual spectrum (detrended by T^2, Hann window); omega in rad per "
                        "unit T, stack " +
                            res.stack_tag,
                        {"omega", "magnitude"});
            for (const auto& p : spec) w.row({fmt_double(p.omega), fmt_double(p.magnitude)});
            return;
        }
    }
}

SweepOptions sweep_options_from_config(const Config& cfg) {
    SweepOptions o;
    o.stack = stack_from_string(cfg.get_str("sweep.estimator", "fwd-rev"));
    o.t_start = cfg.get_num("sweep.t_start", o.t_start);
    o.t_ratio = cfg.get_num("sweep.t_ratio", o.t_ratio);
    o.t_count = static_cast<int>(cfg.get_int("sweep.t_count", o.t_count));
    o.seed = static_cast<std::uint64_t>(cfg.get_int("sweep.seed", 1));
    o.period_average = cfg.get_bool("sweep.period_average", o.period_average);
    o.period_points = static_cast<int>(cfg.get_int("sweep.period_points", o.period_points));
    o.alpha = cfg.get_num("richardson.alpha", o.alpha);
    o.order = static_cast<int>(cfg.get_int("richardson.m", o.order));
    if (cfg.has("randomized.dist")) {
        const std::string d = cfg.get_str("randomized.dist");
        if (d == "uniform")
            o.dist = DistKind::Uniform;
        else if (d == "triangular")
            o.dist = DistKind::Triangular;
        else if (d == "smooth-bump")
            o.dist = DistKind::SmoothBump;
        else
            throw ConfigError("unknown randomized.dist '" + d + "'");
    }
    o.lambda = cfg.get_num("randomized.lambda", o.lambda);
    o.sharpness = cfg.get_num("randomized.sharpness", o.sharpness);
    o.n_samples = cfg.get_int("randomized.n", o.n_samples);
    o.prop.tol = cfg.get_num("propagate.tol", -1.0);
    return o;
}

} // namespace berry
