#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "berry/csvio.hpp"
#include "berry/errors.hpp"
#include "berry/harness.hpp"
#include "berry/rng.hpp"
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

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::filesystem::path tmpdir(const std::string& leaf) {
    auto p = std::filesystem::temp_directory_path() / leaf;
    std::filesystem::remove_all(p);
    return p;
}
} // namespace

TEST_CASE("fit sanity: synthetic power laws with 1% noise recover the exponent") {
    Rng rng(31);
    for (double p : {-1.0, -2.0, -3.0}) {
        std::vector<double> t, err;
        for (int i = 0; i < 13; ++i) {
            const double ti = 50.0 * std::pow(1.26, i);
            t.push_back(ti);
            err.push_back(2.5 * std::pow(ti, p) * (1.0 + 0.01 * (2.0 * rng.uniform() - 1.0)));
        }
        const ScalingFit f = scaling_fit(t, err, "raw");
        CHECK(f.exponent == doctest::Approx(p).epsilon(0.05 / std::abs(p)));
        CHECK(f.reliable);
    }
}

TEST_CASE("required_runtime walks the monotone tail envelope") {
    const std::vector<double> t{10, 20, 40, 80};
    const std::vector<double> err{0.5, 0.2, 0.3, 0.01};
    CHECK(required_runtime(t, err, 0.4) == 20.0); // tail max from 20 on is 0.3
    CHECK(required_runtime(t, err, 0.05) == 80.0);
    CHECK(std::isinf(required_runtime(t, err, 1e-3)));
    CHECK(required_runtime(t, err, 0.6) == 10.0);
}

TEST_CASE("fwd-rev sweep fits near slope -2 and persists byte-identically") {
    SweepOptions opts;
    opts.stack = EstimatorStack::FwdRev;
    opts.t_start = 50.0;
    opts.t_count = 5;
    opts.seed = 42;
    opts.period_average = false;
    const SweepResult res = sweep(spin_cone(), cone_frame(), opts);
    CHECK(res.points.size() == 5);
    CHECK(res.fit.exponent == doctest::Approx(-2.0).epsilon(0.15));

    const auto d1 = tmpdir("sweep_a");
    const auto d2 = tmpdir("sweep_b");
    save_sweep(res, d1.string());
    const SweepResult re = sweep(spin_cone(), cone_frame(), opts);
    save_sweep(re, d2.string());
    CHECK(read_file(d1 / "series.csv") == read_file(d2 / "series.csv"));
    CHECK(read_file(d1 / "meta.json") == read_file(d2 / "meta.json"));

    // persistence round trip reproduces the comparison document
    const SweepResult loaded = load_sweep(d1.string());
    CHECK(loaded.stack_tag == res.stack_tag);
    CHECK(loaded.points.size() == res.points.size());
    CHECK(loaded.fit.exponent == doctest::Approx(res.fit.exponent).epsilon(1e-12));
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}

TEST_CASE("single-evolution sweep: slope -1, coefficient near phi1") {
    SweepOptions opts;
    opts.stack = EstimatorStack::Single;
    opts.t_start = 100.0;
    opts.t_count = 13;
    opts.period_average = false;
    const SweepResult res = sweep(spin_cone(), cone_frame(), opts);
    CHECK(res.fit.exponent == doctest::Approx(-1.0).epsilon(0.15));
    // Coefficient at the known exponent: geometric mean of err * T.
    double acc = 0.0;
    for (const auto& p : res.points) acc += std::log(p.abs_err * p.runtime);
    const double coeff = std::exp(acc / static_cast<double>(res.points.size()));
    CHECK(coeff == doctest::Approx(res.predicted_coefficient).epsilon(0.10));
    CHECK(res.predicted_coefficient ==
          doctest::Approx(std::pow(kPi * std::sin(0.4), 2.0)).epsilon(1e-6));
}

TEST_CASE("compare report: exponent table, costs and the crossover line") {
    SweepOptions opts;
    opts.t_start = 40.0;
    opts.t_count = 7;
    opts.period_average = false;
    opts.stack = EstimatorStack::Single;
    const SweepResult single = sweep(spin_cone(), cone_frame(), opts);
    opts.stack = EstimatorStack::FwdRev;
    const SweepResult fwdrev = sweep(spin_cone(), cone_frame(), opts);

    const CompareReport rep = compare_report({single, fwdrev}, {1e-2, 1e-3, 1e-4});
    CHECK(rep.text.find("single") != std::string::npos);
    CHECK(rep.text.find("fwd-rev") != std::string::npos);
    CHECK(rep.text.find("crossover") != std::string::npos);
    CHECK(rep.csv_lines.size() == 3);

    CHECK_THROWS_AS(compare_report({single}), ConfigError);
    SweepResult other = fwdrev;
    other.model_key = "different";
    CHECK_THROWS_AS(compare_report({single, other}), ConfigError);
    SweepResult empty = fwdrev;
    empty.points.clear();
    CHECK_THROWS_AS(compare_report({single, empty}), ConfigError);
}

TEST_CASE("round trip: persisted sweeps produce identical comparison documents") {
    SweepOptions opts;
    opts.t_start = 40.0;
    opts.t_count = 5;
    opts.period_average = false;
    opts.stack = EstimatorStack::Single;
    const SweepResult a = sweep(spin_cone(), cone_frame(), opts);
    opts.stack = EstimatorStack::FwdRev;
    const SweepResult b = sweep(spin_cone(), cone_frame(), opts);
    const auto d1 = tmpdir("cmp_a"), d2 = tmpdir("cmp_b");
    save_sweep(a, d1.string());
    save_sweep(b, d2.string());
    const CompareReport direct = compare_report({a, b});
    const CompareReport reloaded = compare_report({load_sweep(d1.string()), load_sweep(d2.string())});
    CHECK(direct.text == reloaded.text);
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}

TEST_CASE("plotdata: error-vs-T emits one row per sweep point") {
    SweepOptions opts;
    opts.t_start = 30.0;
    opts.t_count = 12;
    opts.period_average = false;
    opts.stack = EstimatorStack::Single;
    const SweepResult res = sweep(spin_cone(), cone_frame(), opts);
    const std::string path = (std::filesystem::temp_directory_path() / "err.csv").string();
    emit_plotdata(res, PlotKind::ErrorVsT, path);
    CHECK(read_csv(path).rows.size() == 12);
    std::filesystem::remove(path);
}

TEST_CASE("residual spectrum finds the oscillation frequencies") {
    // synthetic Richardson-style residual: cos(w T) - cos(2 w T), envelope T^-2
    const double w = 1.0;
    std::vector<double> t, r;
    const int n = 1024;
    for (int i = 0; i < n; ++i) {
        const double ti = 100.0 + 0.25 * i;
        t.push_back(ti);
        r.push_back((std::cos(w * ti) - std::cos(2.0 * w * ti)) / (ti * ti));
    }
    const auto spec = residual_spectrum(t, r);
    auto peak_near = [&](double omega) {
        double best = 0.0;
        for (const auto& p : spec)
            if (std::abs(p.omega - omega) < 0.05) best = std::max(best, p.magnitude);
        return best;
    };
    double global_max = 0.0;
    for (const auto& p : spec) global_max = std::max(global_max, p.magnitude);
    CHECK(peak_near(w) > 0.5 * global_max);
    CHECK(peak_near(2.0 * w) > 0.5 * global_max);
    // no spectral mass below the gap scale
    for (const auto& p : spec)
        if (p.omega > 0.05 && p.omega < 0.8) CHECK(p.magnitude < 0.05 * global_max);

    CHECK_THROWS_AS(residual_spectrum({1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0},
                                      std::vector<double>(8, 0.0)),
                    ConfigError);
}

TEST_CASE("bias-vs-T passthrough carries the prediction column") {
    SweepResult res;
    res.stack_tag = "randomized";
    res.model_key = "x";
    res.theta_oracle = 1.0;
    for (int i = 0; i < 3; ++i) {
        SweepPoint p;
        p.runtime = 10.0 * (i + 1);
        p.estimate = 1.0 + 1e-4 * (i + 1);
        p.abs_err = 1e-4 * (i + 1);
        p.predicted_bias = 1.1e-4 * (i + 1);
        res.points.push_back(p);
    }
    const std::string path = (std::filesystem::temp_directory_path() / "bias.csv").string();
    emit_plotdata(res, PlotKind::BiasVsT, path);
    const CsvTable tab = read_csv(path);
    CHECK(tab.rows.size() == 3);
    CHECK(tab.num(1, "predicted_bias") == doctest::Approx(2.2e-4));
    CHECK(tab.num(1, "bias") == doctest::Approx(2e-4));
    std::filesystem::remove(path);
}

TEST_CASE("sweep options parse from config with overrides") {
    const Config cfg = Config::parse_string(R"(
[sweep]
estimator = "richardson"
t_start = 25.0
t_count = 6
seed = 9
[richardson]
alpha = 3.0
m = 2
[randomized]
dist = "smooth-bump"
lambda = 0.15
n = 500
[propagate]
tol = 1e-9
)");
    const SweepOptions o = sweep_options_from_config(cfg);
    CHECK(o.stack == EstimatorStack::Richardson);
    CHECK(o.t_start == 25.0);
    CHECK(o.t_count == 6);
    CHECK(o.seed == 9);
    CHECK(o.alpha == 3.0);
    CHECK(o.order == 2);
    CHECK(o.dist == DistKind::SmoothBump);
    CHECK(o.lambda == 0.15);
    CHECK(o.n_samples == 500);
    CHECK(o.prop.tol == 1e-9);
    CHECK_THROWS_AS(stack_from_string("bogus"), ConfigError);
}
