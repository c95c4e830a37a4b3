#include "berry/estimators.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "berry/csvio.hpp"
#include "berry/errors.hpp"

namespace berry {

EigenphaseFn exact_eigenphase_fn(const LoopHamiltonian& model, CostLedger* ledger,
                                 const PropagateOptions& opts) {
    return [&model, ledger, opts](double runtime, Direction dir) {
        if (ledger) {
            ledger->total_evolved_time += runtime;
            ledger->evolutions += 1;
        }
        return wrap_2pi(std::arg(final_overlap(model, runtime, dir, opts)));
    };
}

double forward_reverse_estimate(const PhasePair& pair) {
    return 0.5 * wrap_2pi(pair.forward + pair.reverse);
}

PhasePair measure_phase_pair(const EigenphaseFn& fn, double runtime, PhaseSource source) {
    PhasePair p;
    p.runtime = runtime;
    p.forward = fn(runtime, Direction::Forward);
    p.reverse = fn(runtime, Direction::Reverse);
    p.source = source;
    return p;
}

double single_evolution_estimate(const LoopHamiltonian& model, const EigenphaseFn& fn,
                                 double runtime) {
    const double theta_f = fn(runtime, Direction::Forward);
    const double theta_d = dynamical_phase(model, runtime, 1.0);
    return wrap_2pi(theta_f + theta_d);
}

RichardsonScheme RichardsonScheme::make(double alpha, int order) {
    if (!(alpha > 1.0)) throw ConfigError("Richardson scheme requires alpha > 1");
    if (order < 1) throw ConfigError("Richardson scheme requires order >= 1");
    RichardsonScheme s;
    s.alpha = alpha;
    s.order = order;
    s.weights.resize(static_cast<std::size_t>(order) + 1);
    // Nodes x_k = alpha^{-2k}; the scheme is polynomial extrapolation to
    // x = 0 in the variable x = T^{-2}: w_k = prod_{l != k} x_l / (x_l - x_k).
    std::vector<double> x(static_cast<std::size_t>(order) + 1);
    for (int k = 0; k <= order; ++k) x[static_cast<std::size_t>(k)] = std::pow(alpha, -2.0 * k);
    for (int k = 0; k <= order; ++k) {
        double w = 1.0;
        for (int l = 0; l <= order; ++l) {
            if (l == k) continue;
            w *= x[static_cast<std::size_t>(l)] /
                 (x[static_cast<std::size_t>(l)] - x[static_cast<std::size_t>(k)]);
        }
        s.weights[static_cast<std::size_t>(k)] = w;
        s.weight_sum_abs += std::abs(w);
    }
    return s;
}

double RichardsonScheme::weight_sum_bound() const {
    const double a2 = alpha * alpha;
    return (order + 1) * std::pow(a2 / (a2 - 1.0), order);
}

double RichardsonScheme::combine(const std::vector<double>& values) const {
    if (values.size() != weights.size())
        throw ConfigError("Richardson combine: need order + 1 values");
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) acc += weights[k] * values[k];
    return acc;
}

double lift(double estimate_mod_pi, double coarse) {
    const double est = wrap_pi(estimate_mod_pi);
    const double k = std::round((coarse - est) / kPi);
    const double lifted = est + k * kPi;
    const double margin = kPi / 2.0 - std::abs(lifted - coarse);
    if (margin < 1e-9)
        throw AmbiguousLiftError("lifted representative within 1e-9 of the interval boundary; "
                                 "refine the coarse estimate");
    return lifted;
}

double richardson(const RichardsonScheme& scheme, const std::vector<LiftedEstimate>& estimates) {
    if (estimates.size() != scheme.weights.size())
        throw ConfigError("richardson: need order + 1 lifted estimates");
    const double coarse = estimates.front().coarse;
    std::vector<double> values;
    values.reserve(estimates.size());
    for (const auto& e : estimates) {
        if (std::abs(e.coarse - coarse) > 1e-12)
            throw ConfigError("richardson: estimates lifted against different branches");
        if (std::abs(e.value - coarse) >= kPi / 2.0)
            throw ConfigError("richardson: input outside the lift interval (unlifted?)");
        values.push_back(e.value);
    }
    return scheme.combine(values);
}

namespace {

// One runtime-scaling decode: eigenphases at t1 and alpha' t1 determine
// theta_D without branch ambiguity, then theta_B + phi(t1) mod 2pi.
double coarse_once(const EigenphaseFn& fn, double t1, double h_max, double* alpha_prime_out) {
    const double alpha_prime = 1.0 + kPi / (t1 * h_max + kPi);
    const double th1 = fn(t1, Direction::Forward);
    const double th2 = fn(alpha_prime * t1, Direction::Forward);
    const double diff = wrap_pm_pi(th2 - th1); // = -(alpha'-1) theta_D + O(1/t1)
    const double theta_d_hat = -diff / (alpha_prime - 1.0);
    if (alpha_prime_out) *alpha_prime_out = alpha_prime;
    return wrap_2pi(th1 + theta_d_hat);
}

} // namespace

BranchResult branch_resolve(const LoopHamiltonian& model, const SpectralFrame& frame,
                            const EigenphaseFn& fn, const BranchResolveConfig& cfg) {
    const double h_max = std::max(model.h_max, 1e-12);
    double t1 = cfg.t1;
    if (t1 <= 0.0) {
        const double scale =
            frame.hdot_max * frame.hdot_max / std::pow(std::max(frame.gap_min, 1e-12), 3);
        t1 = std::max(cfg.t1_min, cfg.t1_constant * scale);
    }
    BranchResult res;
    double prev = coarse_once(fn, t1, h_max, &res.alpha_prime);
    for (int d = 0; d <= cfg.max_doublings; ++d) {
        const double next = coarse_once(fn, 2.0 * t1, h_max, &res.alpha_prime);
        if (circ_dist(next, prev) <= cfg.agreement) {
            res.coarse = next;
            res.t1_final = 2.0 * t1;
            res.doublings = d;
            return res;
        }
        prev = next;
        t1 *= 2.0;
    }
    throw BranchResolutionError("branch resolution failed to stabilize after " +
                                std::to_string(cfg.max_doublings) + " runtime doublings");
}

QpeResult full_qpe_pipeline(const LoopHamiltonian& model, const SpectralFrame& frame,
                            const QpePipelineConfig& cfg, const EigenphaseFn& fn,
                            CostLedger* ledger) {
    CostLedger local;
    CostLedger* led = ledger ? ledger : &local;

    QpeResult r;
    r.alpha = cfg.alpha;
    r.order = cfg.order;
    r.theta_oracle = berry_phase_oracle(frame, 0);

    const double hdot0 = herm_norm(model.derivative(0.0));
    r.t0 = cfg.t0 > 0.0
               ? cfg.t0
               : std::max(cfg.t0_min, cfg.t0_constant * hdot0 /
                                          (frame.gap0 * frame.gap0 * std::sqrt(cfg.eps_b)));

    // Step 1: forward-reverse pairs at alpha^k T0.
    std::vector<double> mod_pi;
    for (int k = 0; k <= cfg.order; ++k) {
        const double t = std::pow(cfg.alpha, k) * r.t0;
        const PhasePair pair = measure_phase_pair(fn, t, cfg.mode);
        mod_pi.push_back(forward_reverse_estimate(pair));
    }

    // Step 2: coarse branch resolution via runtime scaling.
    r.branch = branch_resolve(model, frame, fn, cfg.branch);

    // Step 3: lift to the interval around the coarse estimate, extrapolate.
    const RichardsonScheme scheme = RichardsonScheme::make(cfg.alpha, cfg.order);
    std::vector<LiftedEstimate> lifted;
    for (int k = 0; k <= cfg.order; ++k) {
        LiftedEstimate e;
        e.coarse = r.branch.coarse;
        e.value = lift(mod_pi[static_cast<std::size_t>(k)], r.branch.coarse);
        lifted.push_back(e);
        EstimateEntry entry;
        entry.runtime = std::pow(cfg.alpha, k) * r.t0;
        entry.estimate = e.value;
        entry.tag = std::string("fwd-rev@") + to_string(cfg.mode);
        entry.seed = cfg.seed;
        entry.lift_lo = r.branch.coarse - kPi / 2.0;
        entry.lift_hi = r.branch.coarse + kPi / 2.0;
        r.series.entries.push_back(entry);
    }
    r.theta_hat = wrap_2pi(richardson(scheme, lifted));
    r.series.theta_oracle = r.theta_oracle;

    EstimateEntry fin;
    fin.runtime = r.t0;
    fin.estimate = r.theta_hat;
    fin.tag = std::string("richardson@") + to_string(cfg.mode);
    fin.seed = cfg.seed;
    fin.lift_lo = r.branch.coarse - kPi / 2.0;
    fin.lift_hi = r.branch.coarse + kPi / 2.0;
    r.series.entries.push_back(fin);

    r.abs_err = circ_dist(r.theta_hat, r.theta_oracle);
    r.cost_total_t = led->total_evolved_time;
    return r;
}

QpeResult full_qpe_pipeline(const LoopHamiltonian& model, const SpectralFrame& frame,
                            const QpePipelineConfig& cfg) {
    CostLedger ledger;
    const EigenphaseFn fn = exact_eigenphase_fn(model, &ledger, cfg.prop);
    return full_qpe_pipeline(model, frame, cfg, fn, &ledger);
}

std::string qpe_result_json(const QpeResult& r) {
    nlohmann::ordered_json j;
    j["theta_hat"] = r.theta_hat;
    j["theta_oracle"] = r.theta_oracle;
    j["abs_err"] = r.abs_err;
    j["T0"] = r.t0;
    j["alpha"] = r.alpha;
    j["m"] = r.order;
    j["cost_total_T"] = r.cost_total_t;
    j["branch"] = {{"coarse", r.branch.coarse},
                   {"T1", r.branch.t1_final},
                   {"alpha_prime", r.branch.alpha_prime},
                   {"doublings", r.branch.doublings}};
    return j.dump(2);
}

} // namespace berry
