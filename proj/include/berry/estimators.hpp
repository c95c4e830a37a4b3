#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "berry/hamiltonians.hpp"
#include "berry/propagate.hpp"
#include "berry/spectral.hpp"

namespace berry {

enum class PhaseSource { ExactPropagator, QpeSampled, HadamardSampled };

inline const char* to_string(PhaseSource s) {
    switch (s) {
        case PhaseSource::ExactPropagator: return "exact-propagator";
        case PhaseSource::QpeSampled: return "qpe-sampled";
        case PhaseSource::HadamardSampled: return "hadamard-sampled";
    }
    return "?";
}

// Measured eigenphase of the propagator at a given runtime/direction, mod 2pi.
// Exact mode reads arg<psi0|U(1)|psi0>; sampled modes are provided by the
// measurement emulators. Each call also tallies the simulated evolution time
// into the ledger (one full evolution of length T per unit cost).
struct CostLedger {
    double total_evolved_time = 0.0;
    long evolutions = 0;
};
using EigenphaseFn = std::function<double(double runtime, Direction dir)>;

EigenphaseFn exact_eigenphase_fn(const LoopHamiltonian& model, CostLedger* ledger,
                                 const PropagateOptions& opts = {});

struct PhasePair {
    double runtime = 0.0;
    double forward = 0.0; // (-theta_D + theta_B + phi) mod 2pi
    double reverse = 0.0; // (+theta_D + theta_B + phi_hat) mod 2pi
    PhaseSource source = PhaseSource::ExactPropagator;
};

// (forward + reverse) mod 2pi, halved: theta_B + (phi + phi_hat)/2 mod pi,
// the dynamical phase cancelling identically. Returned in [0, pi).
double forward_reverse_estimate(const PhasePair& pair);

PhasePair measure_phase_pair(const EigenphaseFn& fn, double runtime, PhaseSource source);

// Forward-only estimate with theta_D removed by quadrature (a simulation
// privilege; real experiments use runtime scaling instead). In [0, 2pi).
double single_evolution_estimate(const LoopHamiltonian& model, const EigenphaseFn& fn,
                                 double runtime);

// Extrapolation scheme annihilating T^-2, ..., T^-2m across runtimes alpha^k T.
struct RichardsonScheme {
    double alpha = 2.0;
    int order = 1;
    std::vector<double> weights; // w_{m,k}, k = 0..m, applied to f(alpha^k T)
    double weight_sum_abs = 0.0; // L_m(alpha)

    static RichardsonScheme make(double alpha, int order);
    double weight_sum_bound() const; // (m+1) (alpha^2/(alpha^2-1))^m
    // Raw combination; callers must guarantee a common branch.
    double combine(const std::vector<double>& values) const;
};

// A mod-pi estimate lifted into the interval (coarse - pi/2, coarse + pi/2).
struct LiftedEstimate {
    double value = 0.0;
    double coarse = 0.0;
};

double lift(double estimate_mod_pi, double coarse);

// Richardson extrapolation of lifted estimates ordered k = 0..m. Refuses
// inputs whose branch metadata is inconsistent.
double richardson(const RichardsonScheme& scheme, const std::vector<LiftedEstimate>& estimates);

struct BranchResolveConfig {
    double t1 = -1.0;          // auto: t1_constant * Hdot_max^2 / Delta_min^3
    double t1_constant = 4.0;
    double t1_min = 4.0;
    int max_doublings = 6;
    double agreement = kPi / 8.0;
};

struct BranchResult {
    double coarse = 0.0;      // estimate of theta_B in [0, 2pi), pi/4-accurate
    double t1_final = 0.0;
    double alpha_prime = 0.0; // at the accepted t1
    int doublings = 0;
};

// Coarse branch resolution by runtime scaling: the eigenphase difference
// between T1 and alpha' T1 decodes theta_D without branch ambiguity because
// alpha' = 1 + pi / (T1 H_max + pi) keeps |(alpha'-1) theta_D| < pi. T1 is
// doubled until two successive coarse estimates agree within pi/8.
BranchResult branch_resolve(const LoopHamiltonian& model, const SpectralFrame& frame,
                            const EigenphaseFn& fn, const BranchResolveConfig& cfg = {});

struct EstimateEntry {
    double runtime = 0.0;
    double estimate = 0.0;
    std::string tag;
    std::uint64_t seed = 0;
    double lift_lo = 0.0; // branch interval I, when lifted
    double lift_hi = 0.0;
};

struct EstimateSeries {
    std::vector<EstimateEntry> entries;
    double theta_oracle = 0.0;
};

struct QpePipelineConfig {
    double eps_b = 1e-3;
    double alpha = 2.0;
    int order = 1;
    PhaseSource mode = PhaseSource::ExactPropagator;
    double t0 = -1.0;         // auto: t0_constant * |Hdot(0)| / (Delta(0)^2 sqrt(eps_b))
    double t0_constant = 4.0;
    double t0_min = 4.0;      // floor for loops with vanishing endpoint drive
    std::uint64_t seed = 1;
    BranchResolveConfig branch;
    PropagateOptions prop;
};

struct QpeResult {
    double theta_hat = 0.0;
    double theta_oracle = 0.0;
    double abs_err = 0.0;
    double t0 = 0.0;
    double alpha = 2.0;
    int order = 1;
    double cost_total_t = 0.0;
    BranchResult branch;
    EstimateSeries series;
};

// Steps 1-3 of the QPE protocol: forward-reverse eigenphase pairs at
// alpha^k T0, coarse branch resolution, lifting, Richardson combination.
// The eigenphase source is injected so the same pipeline runs on exact
// propagator phases or on sampled ones.
QpeResult full_qpe_pipeline(const LoopHamiltonian& model, const SpectralFrame& frame,
                            const QpePipelineConfig& cfg, const EigenphaseFn& fn,
                            CostLedger* ledger = nullptr);
QpeResult full_qpe_pipeline(const LoopHamiltonian& model, const SpectralFrame& frame,
                            const QpePipelineConfig& cfg); // exact-propagator mode

std::string qpe_result_json(const QpeResult& r);

} // namespace berry
