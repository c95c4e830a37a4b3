#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "berry/apt.hpp"
#include "berry/errors.hpp"
#include "berry/fit.hpp"
#include "berry/randomize.hpp"
#include "oracles.hpp"

using namespace berry;

namespace {
const LoopHamiltonian& spin_cone() {
    static const LoopHamiltonian m = build_spin_cone(1.0, 0.4);
    return m;
}
const SpectralFrame& cone_frame() {
    static const SpectralFrame f = decompose(spin_cone(), 4096);
    return f;
}
} // namespace

TEST_CASE("characteristic functions at zero and the uniform decay bound") {
    for (const auto& d : {RuntimeDistribution::uniform(0.2), RuntimeDistribution::triangular(0.2),
                          RuntimeDistribution::smooth_bump(0.2)}) {
        CHECK(d.characteristic(0.0) == Complex(1.0, 0.0));
        for (double xi : {3.0, 30.0, 300.0}) CHECK(std::abs(d.characteristic(xi)) <= 1.0 + 1e-12);
    }
    const RuntimeDistribution u = RuntimeDistribution::uniform(0.2);
    CHECK(std::abs(u.characteristic(100.0)) <= 0.05);
    CHECK(std::abs(u.characteristic(100.0) -
                   std::polar(1.0, 100.0) * (std::sin(20.0) / 20.0)) < 1e-14);
}

TEST_CASE("triangular closed form is the squared half-width sinc") {
    const RuntimeDistribution t = RuntimeDistribution::triangular(0.3);
    for (double xi : {1.0, 17.0, 230.0}) {
        const double s = std::sin(0.15 * xi) / (0.15 * xi);
        CHECK(std::abs(t.characteristic(xi) - std::polar(1.0, xi) * s * s) < 1e-14);
    }
}

TEST_CASE("smooth bump decays faster than (1+xi)^-3 in the checked window") {
    const RuntimeDistribution b = RuntimeDistribution::smooth_bump(0.2);
    double sup = 0.0;
    for (double xi = 10.0; xi <= 1000.0; xi *= 1.35)
        sup = std::max(sup, std::abs(b.characteristic(xi)) * std::pow(1.0 + xi, 3.0));
    CHECK(sup < 1e5);        // numeric sup over the window, reported
    CHECK(std::isfinite(sup));
    // and it beats uniform by a wide margin well inside the window
    const RuntimeDistribution u = RuntimeDistribution::uniform(0.2);
    CHECK(std::abs(b.characteristic(400.0)) < 0.01 * std::abs(u.characteristic(400.0)));
}

TEST_CASE("Monte-Carlo cosine means match Re chi within 4 standard errors") {
    for (const auto& d : {RuntimeDistribution::uniform(0.2), RuntimeDistribution::triangular(0.2),
                          RuntimeDistribution::smooth_bump(0.2)}) {
        const long n = 200000;
        for (double omega : {1.0, 2.0}) {
            const double T = 37.0;
            double acc = 0.0;
            for (long j = 0; j < n; ++j) {
                Rng rng = substream(5, static_cast<std::uint64_t>(j));
                acc += std::cos(omega * T * d.sample(rng));
            }
            const double mean = acc / n;
            const double se = 1.0 / std::sqrt(static_cast<double>(n)); // var <= 1
            CHECK(std::abs(mean - d.characteristic(omega * T).real()) < 4.0 * se);
        }
    }
}

TEST_CASE("sampler: support containment, mean, determinism, validation") {
    const RuntimeDistribution d = RuntimeDistribution::uniform(0.2);
    const long n = 100000;
    const std::vector<double> t = sample_runtimes(d, 100.0, n, 99);
    double lo = 1e300, hi = -1e300, mean = 0.0;
    for (double x : t) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        mean += x;
    }
    mean /= static_cast<double>(n);
    CHECK(lo >= 80.0);
    CHECK(hi <= 120.0);
    const double band = 3.0 * (0.2 / std::sqrt(3.0)) / std::sqrt(static_cast<double>(n)) * 100.0;
    CHECK(std::abs(mean - 100.0) < band);

    CHECK(sample_runtimes(d, 100.0, 1000, 7) == sample_runtimes(d, 100.0, 1000, 7));
    CHECK_THROWS_AS(RuntimeDistribution::uniform(0.0), ConfigError);
    CHECK_THROWS_AS(RuntimeDistribution::uniform(1.0), ConfigError);
    CHECK_THROWS_AS(sample_runtimes(d, 100.0, 0, 1), ConfigError);
}

TEST_CASE("bump sampling honours the density and the acceptance guard") {
    const RuntimeDistribution b = RuntimeDistribution::smooth_bump(0.5, 1.0);
    const std::vector<double> t = sample_runtimes(b, 1.0, 50000, 3);
    double m2 = 0.0;
    double inside = 0;
    for (double x : t) {
        CHECK(x >= 0.5);
        CHECK(x <= 1.5);
        m2 += (x - 1.0) * (x - 1.0);
        if (std::abs(x - 1.0) < 0.25) inside += 1.0;
    }
    // Monte-Carlo moments vs direct quadrature of the bump density.
    auto density_moment = [](double power, double cut) {
        double num = 0.0, den = 0.0;
        const int n = 400000;
        for (int i = 0; i < n; ++i) {
            const double u = -1.0 + 2.0 * (i + 0.5) / n;
            const double rho = std::exp(-1.0 / (1.0 - u * u));
            den += rho;
            num += rho * (std::abs(u) < cut ? std::pow(u, power) : 0.0);
        }
        return num / den;
    };
    CHECK(m2 / 50000.0 == doctest::Approx(0.25 * density_moment(2.0, 2.0)).epsilon(0.05));
    CHECK(inside / 50000.0 == doctest::Approx(density_moment(0.0, 0.5)).epsilon(0.03));

    // Very sharp bump: acceptance rate under the uniform envelope falls
    // below 1% and the sampler reports the misconfiguration.
    const RuntimeDistribution sharp = RuntimeDistribution::smooth_bump(0.2, 40000.0);
    CHECK_THROWS_AS(sample_runtimes(sharp, 1.0, 2000, 11), ConfigError);
}

TEST_CASE("constant loop: randomized estimator has zero bias and fluctuation") {
    ModelSpec spec = three_level_default_spec();
    spec.params["theta_cone"] = 0.0;
    spec.params["g12"] = 0.0;
    spec.params["g02"] = 0.0;
    const LoopHamiltonian m = build_three_level(spec);
    const SpectralFrame f = decompose(m, 128);
    const RandomizedEstimate est = randomized_richardson(
        m, f, RuntimeDistribution::uniform(0.2), 40.0, 2.0, 1, 64, 17);
    CHECK(std::abs(est.bias) < 1e-10);
    CHECK(est.std_err < 1e-10);
    CHECK(est.dropped == 0);
}

TEST_CASE("measured randomized bias sits within 4 SE of the prediction") {
    const AptBreakdown bd = phase_coefficients(cone_frame());
    const RuntimeDistribution d = RuntimeDistribution::uniform(0.2);
    const double T = 60.0;
    const RandomizedEstimate est =
        randomized_richardson(spin_cone(), cone_frame(), d, T, 2.0, 1, 400, 21);
    const double pred = bias_prediction(bd, d, T, 2.0);
    CHECK(std::abs(est.bias - pred) < 4.0 * est.std_err + 2e-6);
    CHECK(est.per_sample.size() == 400);
    for (double tj : est.t_j) {
        CHECK(tj >= (1.0 - 0.2) * T);
        CHECK(tj <= (1.0 + 0.2) * T);
    }
}

TEST_CASE("point-mass characteristic reproduces the deterministic remainder") {
    const AptBreakdown bd = phase_coefficients(cone_frame());
    const auto point_mass = [](double xi) { return std::polar(1.0, xi); };
    for (double T : {40.0, 90.0, 333.0}) {
        const double pred = bias_prediction(bd, point_mass, T, 2.0);
        CHECK(pred ==
              doctest::Approx(bd.phi2_osc_richardson(2.0, T) / (T * T)).epsilon(1e-12));
    }
}

TEST_CASE("Monte-Carlo mean of the oscillatory coefficient matches -sum B Re chi") {
    const AptBreakdown bd = phase_coefficients(cone_frame());
    const RuntimeDistribution d = RuntimeDistribution::uniform(0.2);
    const double T = 55.0;
    const long n = 100000;
    double acc = 0.0, acc2 = 0.0;
    for (long j = 0; j < n; ++j) {
        Rng rng = substream(23, static_cast<std::uint64_t>(j));
        const double tj = T * d.sample(rng);
        const double x = bd.phi2_osc_fwdrev(tj);
        acc += x;
        acc2 += x * x;
    }
    const double mean = acc / n;
    const double se = std::sqrt((acc2 / n - mean * mean) / n);
    double pred = 0.0;
    for (std::size_t i = 0; i < bd.b_n.size(); ++i)
        pred += bd.b_n[i] * d.characteristic(bd.omega_n[i] * T).real();
    CHECK(std::abs(mean - pred) < 3.0 * se);
}

TEST_CASE("uniform zeros: level contribution vanishes when lambda omega T = k pi") {
    const AptBreakdown bd = phase_coefficients(cone_frame());
    const double omega1 = bd.omega_n[0];
    const RuntimeDistribution d = RuntimeDistribution::uniform(0.2);
    const double T = 25.0 * kPi / (0.2 * omega1); // lambda omega T = 25 pi
    CHECK(std::abs(d.characteristic(omega1 * T).real()) < 1e-12);
    CHECK(std::abs(d.characteristic(omega1 * T)) < 1e-12);
}

TEST_CASE("variance report: empirical below the support bound; zero for constant") {
    const AptBreakdown bd = phase_coefficients(cone_frame());
    const RuntimeDistribution d = RuntimeDistribution::uniform(0.2);
    const VarianceReport r = variance_report(bd, d, 120.0, 2.0, 100000, 5);
    CHECK(r.empirical <= r.predicted_bound);
    CHECK(r.empirical > 0.0);

    ModelSpec spec = three_level_default_spec();
    spec.params["theta_cone"] = 0.0;
    spec.params["g12"] = 0.0;
    spec.params["g02"] = 0.0;
    const SpectralFrame cf = decompose(build_three_level(spec), 128);
    const VarianceReport rc = variance_report(phase_coefficients(cf), d, 120.0, 2.0, 1000, 5);
    CHECK(rc.empirical == 0.0);
    CHECK(rc.predicted_bound == 0.0);
}

TEST_CASE("fluctuation of the N-mean scales as N^{-1/2}") {
    const AptBreakdown bd = phase_coefficients(cone_frame());
    const RuntimeDistribution d = RuntimeDistribution::uniform(0.2);
    const double T = 80.0;
    std::vector<double> ns = {100.0, 1000.0, 10000.0};
    std::vector<double> stds;
    for (double nd : ns) {
        const long n = static_cast<long>(nd);
        const int reps = 160;
        double acc = 0.0, acc2 = 0.0;
        for (int r = 0; r < reps; ++r) {
            double mean = 0.0;
            for (long j = 0; j < n; ++j) {
                Rng rng = substream(1000 + r, static_cast<std::uint64_t>(j));
                const double tj = T * d.sample(rng);
                mean += bd.phi2_osc_richardson(2.0, tj) / (tj * tj);
            }
            mean /= static_cast<double>(n);
            acc += mean;
            acc2 += mean * mean;
        }
        acc /= reps;
        stds.push_back(std::sqrt(std::max(0.0, acc2 / reps - acc * acc)));
    }
    const LineFit f = fit_loglog(ns, stds);
    CHECK(f.slope == doctest::Approx(-0.5).epsilon(0.10));
}

TEST_CASE("summary JSON and per-sample CSV") {
    const RandomizedEstimate est = randomized_richardson(
        spin_cone(), cone_frame(), RuntimeDistribution::uniform(0.2), 40.0, 2.0, 1, 32, 9);
    const std::string json = randomized_summary_json(est, 1e-5, 1e-6);
    CHECK(json.find("\"bias\"") != std::string::npos);
    CHECK(json.find("\"dropped\"") != std::string::npos);
}
