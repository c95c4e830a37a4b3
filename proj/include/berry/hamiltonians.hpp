#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "berry/config.hpp"
#include "berry/linalg.hpp"

namespace berry {

// A smooth closed family s in [0,1] -> H(s), H(1) = H(0), with first and
// second derivatives in s. Evaluation is pure and reentrant; nothing is
// mutated after construction.
struct LoopHamiltonian {
    int dim = 0;
    // In-place evaluators fill a preallocated dim x dim matrix; they are the
    // hot path for the integrators.
    std::function<void(double, Mat&)> eval_into;
    std::function<void(double, Mat&)> deriv_into;
    std::function<void(double, Mat&)> deriv2_into;

    std::string name;
    std::map<std::string, double> params;
    // The loop orientation is fixed by the model definition: the built-in
    // families traverse the parameter angle 2*pi*s counterclockwise.
    std::string orientation = "counterclockwise in 2*pi*s";

    // Coarse norm scans recorded at build time (64-point grid); used for
    // integrator step heuristics and for the bound reports.
    double h_max = 0.0;
    double hdot_max = 0.0;
    double hddot_max = 0.0;

    Mat evaluate(double s) const {
        Mat m(dim, dim);
        eval_into(s, m);
        return m;
    }
    Mat derivative(double s) const {
        Mat m(dim, dim);
        deriv_into(s, m);
        return m;
    }
    Mat second_derivative(double s) const {
        Mat m(dim, dim);
        deriv2_into(s, m);
        return m;
    }

    std::string cache_key() const;
};

enum class ModelKind { SpinCone, ThreeLevel, MatrixPath };
enum class DerivativeMode { Analytic, FiniteDifference };

struct ModelSpec {
    ModelKind kind = ModelKind::SpinCone;
    std::map<std::string, double> params;
    DerivativeMode derivative = DerivativeMode::Analytic;
    double fd_step = 1e-5;
    // matrix-path only: truncated Fourier series
    //   H(s) = fourier_const + sum_k [cos_coeff[k] cos(2 pi (k+1) s)
    //                               + sin_coeff[k] sin(2 pi (k+1) s)]
    Mat fourier_const;
    std::vector<Mat> cos_coeff;
    std::vector<Mat> sin_coeff;
};

LoopHamiltonian build_model(const ModelSpec& spec);

// H(s) = (B/2) (sin(theta) cos(2 pi s), sin(theta) sin(2 pi s), cos(theta)) . sigma
LoopHamiltonian build_spin_cone(double b_field, double theta_cone);

// dim = 3: a spin-cone block on levels {0,1} plus a third level at energy e2
// coupled to both, so at least two excited levels couple to the ground state.
// Defaults exercise every multi-level sum downstream.
LoopHamiltonian build_three_level(const ModelSpec& spec);
ModelSpec three_level_default_spec();

LoopHamiltonian build_matrix_path(const ModelSpec& spec);

// Model config file: [model] kind/derivative/fd_step, [model.params] numbers,
// [model.matrices] for matrix-path entries given as row-major [re, im] pairs.
LoopHamiltonian build_from_config(const std::string& path);
LoopHamiltonian build_from_config(const Config& cfg);

// Same family with H(s) -> H(s) + shift * I (spectrum rigidly displaced).
LoopHamiltonian shift_spectrum(const LoopHamiltonian& model, double shift);

// Build-time validation shared by all constructors: hermiticity and loop
// closure to 1e-13 on a sample grid, derivative consistency for analytic mode.
void validate_loop(const LoopHamiltonian& model);

} // namespace berry
