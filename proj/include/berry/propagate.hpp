#pragma once

#include <functional>
#include <string>
#include <vector>

#include "berry/hamiltonians.hpp"
#include "berry/linalg.hpp"
#include "berry/spectral.hpp"

namespace berry {

enum class Direction { Forward, Reverse };

inline const char* to_string(Direction d) {
    return d == Direction::Forward ? "forward" : "reverse";
}

struct IntegratorReport {
    long steps = 0;        // steps of the accepted (finest) pass
    int doublings = 0;     // refinement rounds before acceptance
    double defect = 0.0;   // two-level Richardson defect estimate of the result
    double tol = 0.0;
};

struct PropagateOptions {
    // Global unitary defect target; negative means the default 1e-10 * (1 + T).
    double tol = -1.0;
    long step_cap = 1L << 26;

    double resolve_tol(double runtime) const {
        return tol > 0.0 ? tol : 1e-10 * (1.0 + runtime);
    }
};

// One evolution at fixed runtime. evolve_true fills u_true; evolve_ideal
// fills u_ideal; wave_scalar merges the two and derives z, phase error,
// leakage and the dynamical phase.
struct EvolutionRecord {
    double runtime = 0.0;
    Direction direction = Direction::Forward;
    std::vector<double> s;
    std::vector<Mat> u_true;
    std::vector<Mat> u_ideal;
    std::vector<Complex> z;
    std::vector<double> phase_error; // arg z, unwrapped along the checkpoints
    std::vector<double> leakage;     // 1 - |z|^2, clamped on export only
    std::vector<double> dyn_phase;   // theta_D(s) for this direction's sign
    IntegratorReport report_true;
    IntegratorReport report_ideal;
};

std::vector<double> uniform_checkpoints(int count); // count points incl. 0 and 1

// True evolution U_T(s) (reverse: generated by -H) by the 4th-order
// commutator-free Magnus scheme with step halving until the two-level
// Richardson defect meets the tolerance.
EvolutionRecord evolve_true(const LoopHamiltonian& model, double runtime, Direction dir,
                            const std::vector<double>& checkpoints,
                            const PropagateOptions& opts = {});

// Ideal adiabatic evolution under H_A = H + (i/T)[Pdot, P]; the same
// geometric correction is kept for the reverse direction. The frame is used
// for validation; the projector data is eigensolved pointwise at the
// integrator nodes.
EvolutionRecord evolve_ideal(const LoopHamiltonian& model, const SpectralFrame& frame,
                             double runtime, Direction dir,
                             const std::vector<double>& checkpoints,
                             const PropagateOptions& opts = {});

// z(s) = <psi(0)| U_A^dag(s) U_T(s) |psi(0)>, phase unwrapped from phi(0)=0;
// refuses checkpoints too sparse to unwrap (step >= pi/2) and phases with
// |z| < 1e-6.
EvolutionRecord wave_scalar(const LoopHamiltonian& model, const EvolutionRecord& true_rec,
                            const EvolutionRecord& ideal_rec);

void write_evolution_csv(const EvolutionRecord& rec, const std::string& path);

// <psi(0)|U(1)|psi(0)> for the given direction; this is the exact-propagator
// eigenphase source used by the estimator stack (only the final point is
// integrated, no ideal evolution involved).
Complex final_overlap(const LoopHamiltonian& model, double runtime, Direction dir,
                      const PropagateOptions& opts = {});

// Full final unitary, for the QPE sampler's eigendecomposition.
Mat final_unitary(const LoopHamiltonian& model, double runtime, Direction dir,
                  const PropagateOptions& opts = {});

// theta_D(s) = T * integral of E_0 (forward sign); Gauss-Legendre panels.
double dynamical_phase(const LoopHamiltonian& model, double runtime, double s_to = 1.0);

} // namespace berry
