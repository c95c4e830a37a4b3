#include "berry/randomize.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "berry/csvio.hpp"
#include "berry/errors.hpp"
#include "berry/rng.hpp"

namespace berry {
namespace {

void check_lambda(double lambda) {
    if (!(lambda > 0.0 && lambda < 1.0))
        throw ConfigError("runtime distribution requires lambda in (0, 1)");
}

double sinc(double x) { return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

// Gauss-Legendre 16 nodes/weights on [-1, 1] (positive half; symmetric).
const double kGlNode[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                           0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                           0.9445750230732326, 0.9894009349916499};
const double kGlWeight[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                             0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                             0.0622535239386479, 0.0271524594117541};

template <class F>
auto gl_panels(double a, double b, int panels, F&& f) -> decltype(f(a)) {
    const double hw = (b - a) / panels / 2.0;
    decltype(f(a)) acc{};
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (2.0 * p + 1.0) * hw;
        for (int q = 0; q < 8; ++q)
            for (double sgn : {-1.0, 1.0})
                acc += kGlWeight[q] * hw * f(mid + sgn * hw * kGlNode[q]);
    }
    return acc;
}

} // namespace

RuntimeDistribution RuntimeDistribution::uniform(double lambda) {
    check_lambda(lambda);
    RuntimeDistribution d;
    d.kind = DistKind::Uniform;
    d.lambda = lambda;
    return d;
}

RuntimeDistribution RuntimeDistribution::triangular(double lambda) {
    check_lambda(lambda);
    RuntimeDistribution d;
    d.kind = DistKind::Triangular;
    d.lambda = lambda;
    return d;
}

RuntimeDistribution RuntimeDistribution::smooth_bump(double lambda, double sharpness) {
    check_lambda(lambda);
    if (!(sharpness > 0.0)) throw ConfigError("smooth-bump sharpness must be positive");
    RuntimeDistribution d;
    d.kind = DistKind::SmoothBump;
    d.lambda = lambda;
    d.sharpness = sharpness;
    d.bump_->norm =
        gl_panels(-1.0, 1.0, 64, [&](double u) { return std::exp(-sharpness / (1.0 - u * u)); });
    return d;
}

Complex RuntimeDistribution::characteristic(double xi) const {
    if (xi == 0.0) return Complex(1.0, 0.0);
    const Complex center = std::polar(1.0, xi);
    switch (kind) {
        case DistKind::Uniform:
            return center * sinc(lambda * xi);
        case DistKind::Triangular: {
            const double s = sinc(lambda * xi / 2.0);
            return center * s * s;
        }
        case DistKind::SmoothBump: {
            auto it = bump_->chi_cache.find(xi);
            if (it != bump_->chi_cache.end()) return it->second;
            // int e^{i xi lambda u} rho(u) du; the integrand is C-infinity and
            // flat at the endpoints, so panel count scales with the phase.
            const int panels =
                std::max(16, static_cast<int>(std::ceil(std::abs(lambda * xi) / 2.0)));
            const double c = sharpness;
            const Complex raw = gl_panels(-1.0, 1.0, std::min(panels, 100000), [&](double u) {
                return std::exp(Complex(0.0, xi * lambda * u)) * std::exp(-c / (1.0 - u * u));
            });
            const Complex chi = center * raw / bump_->norm;
            bump_->chi_cache.emplace(xi, chi);
            return chi;
        }
    }
    throw ConfigError("unknown distribution kind");
}

Complex RuntimeDistribution::weighted_characteristic(double xi) const {
    auto it = bump_->weighted_cache.find(xi);
    if (it != bump_->weighted_cache.end()) return it->second;
    const int panels = std::max(24, static_cast<int>(std::ceil(std::abs(lambda * xi) / 2.0)));
    auto integrate = [&](auto&& density) {
        return gl_panels(1.0 - lambda, 1.0 + lambda, std::min(panels, 100000), [&](double x) {
            return std::exp(Complex(0.0, xi * x)) * density(x) / (x * x);
        });
    };
    Complex k(0.0, 0.0);
    switch (kind) {
        case DistKind::Uniform:
            k = integrate([this](double) { return 1.0 / (2.0 * lambda); });
            break;
        case DistKind::Triangular:
            k = integrate([this](double x) {
                return (lambda - std::abs(x - 1.0)) / (lambda * lambda);
            });
            break;
        case DistKind::SmoothBump:
            k = integrate([this](double x) {
                const double u = (x - 1.0) / lambda;
                return std::exp(-sharpness / (1.0 - u * u)) / (bump_->norm * lambda);
            });
            break;
    }
    bump_->weighted_cache.emplace(xi, k);
    return k;
}

double RuntimeDistribution::sample(Rng& rng) const {
    switch (kind) {
        case DistKind::Uniform:
            return 1.0 + lambda * (2.0 * rng.uniform() - 1.0);
        case DistKind::Triangular:
            return 1.0 + lambda * (rng.uniform() + rng.uniform() - 1.0);
        case DistKind::SmoothBump: {
            // Rejection against the uniform envelope; accept exp(-c u^2/(1-u^2)).
            for (;;) {
                const double u = 2.0 * rng.uniform() - 1.0;
                ++bump_->proposals;
                if (rng.uniform() < std::exp(-sharpness * u * u / (1.0 - u * u))) {
                    ++bump_->accepts;
                    return 1.0 + lambda * u;
                }
                if (bump_->proposals >= 500 &&
                    static_cast<double>(bump_->accepts) < 0.01 * bump_->proposals)
                    throw ConfigError("smooth-bump rejection acceptance below 1%; "
                                      "reduce the sharpness parameter");
            }
        }
    }
    throw ConfigError("unknown distribution kind");
}

std::vector<double> sample_runtimes(const RuntimeDistribution& dist, double runtime, long n,
                                    std::uint64_t seed) {
    if (n < 1) throw ConfigError("sample_runtimes: n >= 1");
    if (!(runtime > 0.0)) throw ConfigError("sample_runtimes: runtime must be positive");
    std::vector<double> t(static_cast<std::size_t>(n));
    for (long j = 0; j < n; ++j) {
        Rng rng = substream(seed, static_cast<std::uint64_t>(j));
        t[static_cast<std::size_t>(j)] = runtime * dist.sample(rng);
    }
    return t;
}

RandomizedEstimate randomized_richardson(const LoopHamiltonian& model, const SpectralFrame& frame,
                                         const RuntimeDistribution& dist, double runtime,
                                         double alpha, int order, long n, std::uint64_t seed,
                                         const RandomizedConfig& cfg) {
    RandomizedEstimate est;
    est.n = n;
    est.runtime = runtime;
    est.alpha = alpha;
    est.order = order;
    est.kind = dist.kind;
    est.lambda = dist.lambda;

    CostLedger ledger;
    const EigenphaseFn fn = exact_eigenphase_fn(model, &ledger, cfg.prop);
    const BranchResult branch = branch_resolve(model, frame, fn, cfg.branch);
    est.coarse = branch.coarse;
    const RichardsonScheme scheme = RichardsonScheme::make(alpha, order);
    const double theta_oracle = berry_phase_oracle(frame, 0);

    est.t_j = sample_runtimes(dist, runtime, n, seed);
    est.x_j.resize(static_cast<std::size_t>(n));
    for (long j = 0; j < n; ++j)
        est.x_j[static_cast<std::size_t>(j)] = est.t_j[static_cast<std::size_t>(j)] / runtime;

    for (long j = 0; j < n; ++j) {
        const double tj = est.t_j[static_cast<std::size_t>(j)];
        bool dropped = false;
        std::vector<LiftedEstimate> lifted;
        for (int k = 0; k <= order && !dropped; ++k) {
            const double t = std::pow(alpha, k) * tj;
            const Complex of = final_overlap(model, t, Direction::Forward, cfg.prop);
            const Complex orv = final_overlap(model, t, Direction::Reverse, cfg.prop);
            ledger.total_evolved_time += 2.0 * t;
            ledger.evolutions += 2;
            if (std::abs(of) < 1e-6 || std::abs(orv) < 1e-6) {
                dropped = true;
                break;
            }
            PhasePair pair;
            pair.runtime = t;
            pair.forward = wrap_2pi(std::arg(of));
            pair.reverse = wrap_2pi(std::arg(orv));
            pair.source = PhaseSource::ExactPropagator;
            LiftedEstimate e;
            e.coarse = branch.coarse;
            e.value = lift(forward_reverse_estimate(pair), branch.coarse);
            lifted.push_back(e);
        }
        if (dropped) {
            ++est.dropped;
            continue;
        }
        est.per_sample.push_back(richardson(scheme, lifted));
    }

    const long kept = n - est.dropped;
    if (kept == 0) throw NumericalError("randomized_richardson: every sample was dropped");
    if (static_cast<double>(est.dropped) / static_cast<double>(n) > cfg.drop_fail_fraction)
        throw NumericalError("randomized_richardson: dropped fraction " +
                             fmt_double(static_cast<double>(est.dropped) / n) + " exceeds " +
                             fmt_double(cfg.drop_fail_fraction));
    double sum = 0.0;
    for (double v : est.per_sample) sum += v;
    est.mean = sum / static_cast<double>(kept);
    double ss = 0.0; // two-pass variance, stable when all samples coincide
    for (double v : est.per_sample) ss += (v - est.mean) * (v - est.mean);
    est.std_err = kept > 1 ? std::sqrt(ss / static_cast<double>(kept) /
                                       static_cast<double>(kept - 1))
                           : 0.0;
    est.bias = wrap_pm_pi(est.mean - theta_oracle);
    est.cost_total_t = ledger.total_evolved_time;
    return est;
}

double bias_prediction(const AptBreakdown& bd, const std::function<Complex(double)>& kernel,
                       double runtime, double alpha) {
    double acc = 0.0;
    for (std::size_t i = 0; i < bd.b_n.size(); ++i) {
        const double w = bd.omega_n[i];
        acc += bd.b_n[i] *
               (kernel(alpha * w * runtime).real() - kernel(w * runtime).real());
    }
    return acc / ((alpha * alpha - 1.0) * runtime * runtime);
}

double bias_prediction(const AptBreakdown& bd, const RuntimeDistribution& dist, double runtime,
                       double alpha) {
    // E[X^2] normalization: the alpha-extrapolated T_j^-2 prefactors carry a
    // 1/X^2 under the expectation, so the weighted kernel is the exact one.
    return bias_prediction(
        bd, [&dist](double xi) { return dist.weighted_characteristic(xi); }, runtime, alpha);
}

VarianceReport variance_report(const AptBreakdown& bd, const RuntimeDistribution& dist,
                               double runtime, double alpha, long n, std::uint64_t seed) {
    VarianceReport rep;
    rep.n = n;
    double sum_b = 0.0;
    for (double b : bd.b_n) sum_b += std::abs(b);
    const double amp_factor = std::max(1.0, 2.0 / (alpha * alpha - 1.0));
    const double denom = std::pow(1.0 - dist.lambda, 2) * runtime * runtime;
    rep.predicted_bound = amp_factor * amp_factor * sum_b * sum_b / (denom * denom);

    double sum = 0.0, sumsq = 0.0;
    for (long j = 0; j < n; ++j) {
        Rng rng = substream(seed, static_cast<std::uint64_t>(j));
        const double tj = runtime * dist.sample(rng);
        const double x = bd.phi2_osc_richardson(alpha, tj) / (tj * tj);
        sum += x;
        sumsq += x * x;
    }
    rep.mean = sum / static_cast<double>(n);
    rep.empirical = std::max(0.0, sumsq / static_cast<double>(n) - rep.mean * rep.mean);
    rep.se_mean = std::sqrt(rep.empirical / static_cast<double>(n));
    if (rep.empirical > rep.predicted_bound)
        throw NumericalError("variance_report: empirical variance exceeds the support bound");
    return rep;
}

std::string randomized_summary_json(const RandomizedEstimate& est, double predicted_bias,
                                    double var_bound) {
    nlohmann::ordered_json j;
    j["bias"] = est.bias;
    j["se"] = est.std_err;
    j["predicted_bias"] = predicted_bias;
    j["var_bound"] = var_bound;
    j["dropped"] = est.dropped;
    j["n"] = est.n;
    j["T"] = est.runtime;
    j["alpha"] = est.alpha;
    j["dist"] = to_string(est.kind);
    j["lambda"] = est.lambda;
    j["cost_total_T"] = est.cost_total_t;
    return j.dump(2);
}

void write_randomized_csv(const RandomizedEstimate& est, const std::string& path) {
    CsvWriter w(path, "randomized Richardson samples", {"j", "x_j", "t_j", "estimate"});
    for (std::size_t j = 0; j < est.per_sample.size(); ++j)
        w.row({std::to_string(j), fmt_double(est.x_j[j]), fmt_double(est.t_j[j]),
               fmt_double(est.per_sample[j])});
}

} // namespace berry
