#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "berry/apt.hpp"
#include "berry/errors.hpp"
#include "berry/estimators.hpp"
#include "berry/fit.hpp"
#include "berry/propagate.hpp"
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
LoopHamiltonian constant_model() {
    ModelSpec spec = three_level_default_spec();
    spec.params["theta_cone"] = 0.0;
    spec.params["g12"] = 0.0;
    spec.params["g02"] = 0.0;
    return build_three_level(spec);
}
} // namespace

TEST_CASE("constant H: time ordering collapses to exp(-iTH)") {
    const LoopHamiltonian m = constant_model();
    const double T = 37.0;
    const EvolutionRecord r = evolve_true(m, T, Direction::Forward, {1.0});
    Eigen::SelfAdjointEigenSolver<Mat> es(m.evaluate(0.0));
    Vec ph(3);
    for (int i = 0; i < 3; ++i) ph(i) = std::polar(1.0, -T * es.eigenvalues()(i));
    const Mat expected = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
    CHECK((r.u_true[0] - expected).norm() < 1e-10);
}

TEST_CASE("unitarity at T = 200") {
    const EvolutionRecord r = evolve_true(spin_cone(), 200.0, Direction::Forward, {0.5, 1.0});
    for (const Mat& u : r.u_true) CHECK(unitarity_defect(u) < 1e-10);
}

TEST_CASE("agrees with a fixed-step RK4 oracle at 10x finer steps") {
    const double T = 200.0;
    const EvolutionRecord r = evolve_true(spin_cone(), T, Direction::Forward, {1.0});
    const Mat rk4 = oracle::rk4_propagator(spin_cone(), T, 10 * r.report_true.steps);
    Eigen::SelfAdjointEigenSolver<Mat> es(spin_cone().evaluate(0.0));
    const Vec psi0 = es.eigenvectors().col(0);
    const Complex a = psi0.dot(r.u_true[0] * psi0);
    const Complex b = psi0.dot(rk4 * psi0);
    CHECK(std::abs(a - b) < 1e-8);
}

TEST_CASE("reverse evolution is generated by -H") {
    const double T = 25.0;
    const EvolutionRecord r = evolve_true(spin_cone(), T, Direction::Reverse, {1.0});
    const Mat rk4 = oracle::rk4_propagator(spin_cone(), T, 200000, -1.0);
    CHECK((r.u_true[0] - rk4).norm() < 1e-7);
}

TEST_CASE("intertwining property of the ideal evolution") {
    const auto ckpts = uniform_checkpoints(257);
    const EvolutionRecord r = evolve_ideal(spin_cone(), cone_frame(), 50.0, Direction::Forward,
                                           ckpts);
    Eigen::SelfAdjointEigenSolver<Mat> es0(spin_cone().evaluate(0.0));
    const Vec psi0 = es0.eigenvectors().col(0);
    const Mat p0 = psi0 * psi0.adjoint();
    double worst = 0.0;
    for (std::size_t i = 0; i < ckpts.size(); ++i) {
        Eigen::SelfAdjointEigenSolver<Mat> es(spin_cone().evaluate(ckpts[i]));
        const Vec psi = es.eigenvectors().col(0);
        const Mat p = psi * psi.adjoint();
        worst = std::max(worst, (r.u_ideal[i] * p0 - p * r.u_ideal[i]).norm());
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("ideal evolution carries exactly the dynamical and Berry phases") {
    const double T = 50.0;
    const double theta_b = oracle::refined_berry_phase(spin_cone(), 0, 1e-10);
    Eigen::SelfAdjointEigenSolver<Mat> es(spin_cone().evaluate(0.0));
    const Vec psi0 = es.eigenvectors().col(0);

    const EvolutionRecord fwd =
        evolve_ideal(spin_cone(), cone_frame(), T, Direction::Forward, {1.0});
    const double thd = dynamical_phase(spin_cone(), T);
    const Vec expect_f = std::polar(1.0, -thd + theta_b) * psi0;
    CHECK((fwd.u_ideal[0] * psi0 - expect_f).norm() < 1e-8);

    // Reverse: dynamical sign flips, Berry phase is unchanged.
    const EvolutionRecord rev =
        evolve_ideal(spin_cone(), cone_frame(), T, Direction::Reverse, {1.0});
    const Vec expect_r = std::polar(1.0, +thd + theta_b) * psi0;
    CHECK((rev.u_ideal[0] * psi0 - expect_r).norm() < 1e-8);
}

TEST_CASE("wave scalar: constant H gives z = 1, phi = 0, p_leak = 0") {
    const LoopHamiltonian m = constant_model();
    const SpectralFrame f = decompose(m, 128);
    const auto ckpts = uniform_checkpoints(17);
    const EvolutionRecord rec =
        wave_scalar(m, evolve_true(m, 30.0, Direction::Forward, ckpts),
                    evolve_ideal(m, f, 30.0, Direction::Forward, ckpts));
    for (std::size_t i = 0; i < ckpts.size(); ++i) {
        CHECK(std::abs(rec.z[i] - Complex(1.0, 0.0)) < 1e-12);
        CHECK(std::abs(rec.phase_error[i]) < 1e-12);
        CHECK(std::abs(rec.leakage[i]) < 1e-12);
    }
}

TEST_CASE("phi(1, T) * T approaches phi1 within 3% by T = 400") {
    const AptBreakdown bd = phase_coefficients(cone_frame());
    const auto ckpts = uniform_checkpoints(257);
    for (double T : {100.0, 200.0, 400.0}) {
        const EvolutionRecord rec =
            wave_scalar(spin_cone(), evolve_true(spin_cone(), T, Direction::Forward, ckpts),
                        evolve_ideal(spin_cone(), cone_frame(), T, Direction::Forward, ckpts));
        const double rel = std::abs(rec.phase_error.back() * T - bd.phi1) / bd.phi1;
        CHECK(rel < 0.07 * 400.0 / T); // ~ (phi2 + osc)/phi1 / T shrinks as 1/T
        if (T >= 200.0) CHECK(rel < 0.03 * 400.0 / T + 0.01);
    }
}

TEST_CASE("measured leakage matches the leading coefficient within 10% at T = 200") {
    const LeakagePrediction pred = leakage_coefficients(cone_frame());
    const auto ckpts = uniform_checkpoints(257);
    const double T = 200.0;
    const EvolutionRecord rec =
        wave_scalar(spin_cone(), evolve_true(spin_cone(), T, Direction::Forward, ckpts),
                    evolve_ideal(spin_cone(), cone_frame(), T, Direction::Forward, ckpts));
    const double measured = rec.leakage.back();
    const double predicted = pred.leading(T);
    CHECK(std::abs(measured - predicted) / predicted < 0.10);
}

TEST_CASE("forward + reverse phase errors equal 2 (theta_tilde - theta_B)") {
    const double T = 80.0;
    const auto ckpts = uniform_checkpoints(257);
    const SpectralFrame fine = decompose(spin_cone(), 16384);
    PropagateOptions tight;
    tight.tol = 1e-12;
    double phi_sum = 0.0;
    PhasePair pair;
    pair.runtime = T;
    for (Direction dir : {Direction::Forward, Direction::Reverse}) {
        const EvolutionRecord rec =
            wave_scalar(spin_cone(), evolve_true(spin_cone(), T, dir, ckpts, tight),
                        evolve_ideal(spin_cone(), fine, T, dir, ckpts, tight));
        phi_sum += rec.phase_error.back();
        const Complex g = final_overlap(spin_cone(), T, dir, tight);
        (dir == Direction::Forward ? pair.forward : pair.reverse) = wrap_2pi(std::arg(g));
    }
    const double theta_tilde = forward_reverse_estimate(pair);
    const double theta_b = oracle::extrapolated_berry_phase(spin_cone(), 0);
    const double lhs = wrap_pm_pi(phi_sum);
    const double rhs = wrap_pm_pi(2.0 * (theta_tilde - theta_b));
    CHECK(std::abs(wrap_pm_pi(lhs - rhs)) < 1e-10);
}

TEST_CASE("intertwining defect shrinks with tolerance at order >= 2") {
    std::vector<double> steps, defect;
    Eigen::SelfAdjointEigenSolver<Mat> es0(spin_cone().evaluate(0.0));
    const Vec psi0 = es0.eigenvectors().col(0);
    const Mat p0 = psi0 * psi0.adjoint();
    for (double tol : {1e-6, 1e-8, 1e-10}) {
        PropagateOptions o;
        o.tol = tol;
        const EvolutionRecord r =
            evolve_ideal(spin_cone(), cone_frame(), 50.0, Direction::Forward, {1.0}, o);
        Eigen::SelfAdjointEigenSolver<Mat> es(spin_cone().evaluate(1.0));
        const Vec psi = es.eigenvectors().col(0);
        const Mat p = psi * psi.adjoint();
        steps.push_back(static_cast<double>(r.report_true.steps + r.report_ideal.steps));
        defect.push_back((r.u_ideal[0] * p0 - p * r.u_ideal[0]).norm() + 1e-16);
    }
    CHECK(defect[2] < defect[0]);
    const double order = -std::log(defect[2] / defect[0]) / std::log(steps[2] / steps[0]);
    CHECK(order >= 2.0);
}

TEST_CASE("runtime cap raises a runtime-too-large error") {
    PropagateOptions o;
    o.tol = 1e-13;
    o.step_cap = 1L << 10;
    CHECK_THROWS_AS(evolve_true(spin_cone(), 5000.0, Direction::Forward, {1.0}, o),
                    RuntimeTooLargeError);
}

TEST_CASE("checkpoint validation and export clamp") {
    CHECK_THROWS_AS(evolve_true(spin_cone(), 10.0, Direction::Forward, {0.8, 0.2}), ConfigError);
    const auto ckpts = uniform_checkpoints(33);
    const EvolutionRecord rec =
        wave_scalar(spin_cone(), evolve_true(spin_cone(), 20.0, Direction::Forward, ckpts),
                    evolve_ideal(spin_cone(), cone_frame(), 20.0, Direction::Forward, ckpts));
    const std::string path = std::filesystem::temp_directory_path() / "evolution.csv";
    write_evolution_csv(rec, path);
    CHECK(std::filesystem::file_size(path) > 0);
    std::filesystem::remove(path);
}
