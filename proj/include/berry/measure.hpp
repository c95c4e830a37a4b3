#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "berry/estimators.hpp"
#include "berry/randomize.hpp"
#include "berry/rng.hpp"

namespace berry {

// QPE is emulated at the outcome-distribution level: pick an eigenbranch of
// the final unitary with Born weights (leakage enters here), then draw the
// m-bit register outcome from the textbook distribution for that eigenphase.
struct QpeConfig {
    int m_bits = 12;   // in [1, 24]
    int reps = 15;     // repetitions, majority vote over the leading bits
    int vote_bits = 8; // leading bits voted on; clamped to m_bits
};

struct UnitarySpectrum {
    RVec phases; // eigenphases of U(1), in [0, 2pi)
    Vec amps;    // <v_j | psi(0)>
};

UnitarySpectrum unitary_spectrum(const Mat& u, const Vec& psi0);

// Exact register distribution Pr[k | theta] for an m-bit QPE register.
double qpe_register_prob(double theta, int m_bits, long k);

// One register draw given the branch eigenphase; inverse-CDF expanding from
// the nearest register value, so no 2^m table is ever built.
long qpe_sample_register(double theta, int m_bits, Rng& rng);

// Full sampler: R repetitions of branch + register draws, majority vote on
// the leading vote_bits, then the circular mean of the winning bucket's
// full-resolution phases. Returns a phase estimate in [0, 2pi).
double qpe_sample(const UnitarySpectrum& spectrum, const QpeConfig& cfg, Rng& rng);

// Eigenphase source backed by the QPE sampler; final unitaries are cached
// per (runtime, direction). Cost per call: reps * (2^m - 1) * runtime.
// A shared SpectrumCache lets repeated trials on one model reuse the
// propagator eigendecompositions (only the sampling stays per-seed).
struct SpectrumCache {
    std::map<std::pair<double, int>, UnitarySpectrum> entries;
};
EigenphaseFn qpe_eigenphase_fn(const LoopHamiltonian& model, const QpeConfig& cfg,
                               std::uint64_t seed, CostLedger* ledger,
                               const PropagateOptions& opts = {},
                               std::shared_ptr<SpectrumCache> cache = nullptr);

enum class HadamardBasis { Real, Imag };

struct ShotRecord {
    std::string tag;
    HadamardBasis basis = HadamardBasis::Real;
    double runtime = 0.0;
    int outcome = 0;
    long index = 0;
};

// Hadamard test: P(b = 0) = (1 + Re overlap)/2, imag basis applies a -pi/2
// control phase so P(b = 0) = (1 + Im overlap)/2. Returns the fraction of 0s.
double hadamard_sample(Complex overlap, HadamardBasis basis, long shots, Rng& rng);

// Eigenphase source from Hadamard-test interference at a fixed shot budget
// per quadrature (used for the coarse branch step of the Hadamard pipeline).
EigenphaseFn hadamard_eigenphase_fn(const LoopHamiltonian& model, long shots_per_basis,
                                    std::uint64_t seed, CostLedger* ledger,
                                    const PropagateOptions& opts = {});

struct HadamardPipelineConfig {
    double eps_b = 3e-2;
    double alpha = 2.0;
    double lambda = 0.2;
    long n_samples = -1;        // auto: ceil(shot_constant / eps_b^2)
    double shot_constant = 9.0;
    double runtime = -1.0;      // auto: t_constant * (scale / eps_b)^(1/3)
    double t_constant = 2.0;
    std::uint64_t seed = 1;
    bool exact_overlaps = false; // bias mode: no shot noise
    long coarse_shots = 4096;
    BranchResolveConfig branch;
    PropagateOptions prop;
    std::optional<std::string> shot_csv; // stream one-shot outcomes when set
};

struct HadamardResult {
    double theta_hat = 0.0;
    double theta_oracle = 0.0;
    double abs_err = 0.0;
    double runtime = 0.0;
    long n_samples = 0;
    double coarse = 0.0;
    double cost_total_t = 0.0;
    double p_leak_center = 0.0;  // 1 - |<psi0|U_T(1)|psi0>|^2 at the base runtime
    Complex signal_t;            // averaged forward-reverse interference at T
    Complex signal_alpha_t;      //   and at alpha T
};

// Five-step randomized Hadamard protocol: coarse branch resolution, uniform
// runtime randomization, one-shot interference sampling at T_j and alpha T_j,
// phasor aggregation + mod-pi reconstruction + lifting, Richardson output.
HadamardResult hadamard_pipeline(const LoopHamiltonian& model, const SpectralFrame& frame,
                                 const HadamardPipelineConfig& cfg);

std::string hadamard_result_json(const HadamardResult& r);

} // namespace berry
