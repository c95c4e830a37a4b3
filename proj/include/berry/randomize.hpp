#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "berry/apt.hpp"
#include "berry/estimators.hpp"
#include "berry/rng.hpp"

namespace berry {

enum class DistKind { Uniform, Triangular, SmoothBump };

inline const char* to_string(DistKind k) {
    switch (k) {
        case DistKind::Uniform: return "uniform";
        case DistKind::Triangular: return "triangular";
        case DistKind::SmoothBump: return "smooth-bump";
    }
    return "?";
}

// Runtime multiplier distribution mu on [1 - lambda, 1 + lambda].
// Characteristic functions: uniform and triangular in closed form, the bump
// by panel quadrature with results memoized per xi.
struct RuntimeDistribution {
    DistKind kind = DistKind::Uniform;
    double lambda = 0.2;
    double sharpness = 1.0; // bump exponent scale: density ~ exp(-c/(1-u^2))

    static RuntimeDistribution uniform(double lambda);
    static RuntimeDistribution triangular(double lambda);
    static RuntimeDistribution smooth_bump(double lambda, double sharpness = 1.0);

    Complex characteristic(double xi) const;
    // Weighted kernel E[X^-2 e^{i xi X}]; this is what the expectation of an
    // oscillatory T_j^-2 error term actually contracts against, and it decays
    // at the same rate as the plain characteristic function.
    Complex weighted_characteristic(double xi) const;
    double sample(Rng& rng) const;

  private:
    struct BumpTables {
        double norm = 0.0;
        std::map<double, Complex> chi_cache;
        std::map<double, Complex> weighted_cache;
        long proposals = 0; // rejection-sampler statistics across calls
        long accepts = 0;
    };
    std::shared_ptr<BumpTables> bump_ = std::make_shared<BumpTables>();
};

// T_j = T X_j, reproducible under fixed seed.
std::vector<double> sample_runtimes(const RuntimeDistribution& dist, double runtime, long n,
                                    std::uint64_t seed);

struct RandomizedEstimate {
    long n = 0;
    double runtime = 0.0;
    double alpha = 2.0;
    int order = 1;
    DistKind kind = DistKind::Uniform;
    double lambda = 0.0;
    std::vector<double> x_j;
    std::vector<double> t_j;
    std::vector<double> per_sample; // lifted Richardson extrapolant per kept sample
    double mean = 0.0;
    double std_err = 0.0;
    double bias = 0.0; // mean - oracle
    double coarse = 0.0;
    long dropped = 0;
    double cost_total_t = 0.0;
};

struct RandomizedConfig {
    std::uint64_t seed = 1;
    BranchResolveConfig branch;
    PropagateOptions prop;
    double drop_fail_fraction = 1e-3;
};

// Mean of per-sample Richardson extrapolants theta_B,R(T_j) over runtimes
// sampled from mu. The coarse estimate is resolved once and shared across
// samples; samples with |<psi0|U|psi0>| < 1e-6 are dropped and counted.
// Exact-propagator phases isolate the randomization bias and fluctuation.
RandomizedEstimate randomized_richardson(const LoopHamiltonian& model, const SpectralFrame& frame,
                                         const RuntimeDistribution& dist, double runtime,
                                         double alpha, int order, long n, std::uint64_t seed,
                                         const RandomizedConfig& cfg = {});

// Analytic expectation of the extrapolated oscillatory term under mu,
//   sum_n B_n [Re K(alpha omega_n T) - Re K(omega_n T)] / ((alpha^2-1) T^2),
// with K the weighted kernel above (the T_j^-2 factor rides along inside the
// expectation).
double bias_prediction(const AptBreakdown& bd, const RuntimeDistribution& dist, double runtime,
                       double alpha);
// Same combination with an arbitrary kernel (the point-mass limit
// K(xi) = e^{i xi} reproduces the deterministic remainder).
double bias_prediction(const AptBreakdown& bd, const std::function<Complex(double)>& kernel,
                       double runtime, double alpha);

struct VarianceReport {
    double predicted_bound = 0.0; // (sum |B_n|)^2 scaled bound on Var X
    double empirical = 0.0;       // sample variance of Phi_2^(alpha, T_j)/T_j^2
    double mean = 0.0;
    double se_mean = 0.0;
    long n = 0;
};

// Monte-Carlo variance of the analytic oscillatory functional X(T_j)
// against the support bound; empirical > bound is a hard failure.
VarianceReport variance_report(const AptBreakdown& bd, const RuntimeDistribution& dist,
                               double runtime, double alpha, long n, std::uint64_t seed);

std::string randomized_summary_json(const RandomizedEstimate& est, double predicted_bias,
                                    double var_bound);
void write_randomized_csv(const RandomizedEstimate& est, const std::string& path);

} // namespace berry
