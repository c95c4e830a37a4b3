#pragma once

// Test-only oracles, independent of the library's integration and coupling
// code paths: a fixed-step RK4 Schrodinger integrator and finite-difference
// eigenvector overlaps.

#include "berry/hamiltonians.hpp"
#include "berry/linalg.hpp"
#include "berry/spectral.hpp"

namespace oracle {

// Fixed-step classical RK4 on i dU/ds = sign T H(s) U.
inline berry::Mat rk4_propagator(const berry::LoopHamiltonian& model, double runtime, long steps,
                                 double sign = 1.0) {
    using berry::Mat;
    const int dim = model.dim;
    Mat u = Mat::Identity(dim, dim);
    const double h = 1.0 / static_cast<double>(steps);
    Mat hs(dim, dim);
    auto rhs = [&](double s, const Mat& x) {
        model.eval_into(s, hs);
        return Mat((-berry::kI * sign * runtime) * (hs * x));
    };
    for (long k = 0; k < steps; ++k) {
        const double s = static_cast<double>(k) * h;
        const Mat k1 = rhs(s, u);
        const Mat k2 = rhs(s + h / 2.0, u + (h / 2.0) * k1);
        const Mat k3 = rhs(s + h / 2.0, u + (h / 2.0) * k2);
        const Mat k4 = rhs(s + h, u + h * k3);
        u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return u;
}

// <n(s)| d/ds |m(s)> from centered finite differences of freshly eigensolved
// (and locally gauge-aligned) eigenvectors; independent of the frame's
// Hellmann-Feynman route.
inline berry::Complex coupling_fd(const berry::LoopHamiltonian& model, double s, int n, int m,
                                  double h = 1e-6) {
    using berry::Mat;
    using berry::Vec;
    auto eig = [&](double at) {
        Eigen::SelfAdjointEigenSolver<Mat> es(model.evaluate(at));
        return Mat(es.eigenvectors());
    };
    const Mat v0 = eig(s);
    Mat vp = eig(s + h), vm = eig(s - h);
    for (int c = 0; c < model.dim; ++c) {
        const berry::Complex op = v0.col(c).dot(vp.col(c));
        vp.col(c) *= std::conj(op) / std::abs(op);
        const berry::Complex om = v0.col(c).dot(vm.col(c));
        vm.col(c) *= std::conj(om) / std::abs(om);
    }
    const Vec dm = (vp.col(m) - vm.col(m)) / (2.0 * h);
    return v0.col(n).dot(dm);
}

// Wilson-loop value extrapolated over one grid doubling; the discretization
// error is even in the grid spacing, so this removes the h^2 term.
inline double extrapolated_berry_phase(const berry::LoopHamiltonian& model, int level,
                                       int grid = 16384) {
    const double a = berry::berry_phase_oracle(berry::decompose(model, grid), level);
    const double b = berry::berry_phase_oracle(berry::decompose(model, 2 * grid), level);
    return berry::wrap_2pi(b + berry::wrap_pm_pi(b - a) / 3.0);
}

// Wilson-loop Berry phase refined by grid doubling until two successive
// evaluations agree to `tol`.
inline double refined_berry_phase(const berry::LoopHamiltonian& model, int level, double tol,
                                  int grid0 = 4096, int max_doublings = 8) {
    double prev = berry::berry_phase_oracle(berry::decompose(model, grid0), level);
    int grid = grid0;
    for (int d = 0; d < max_doublings; ++d) {
        grid *= 2;
        const double next = berry::berry_phase_oracle(berry::decompose(model, grid), level);
        if (berry::circ_dist(next, prev) <= tol) return next;
        prev = next;
    }
    throw berry::NumericalError("refined_berry_phase did not converge");
}

} // namespace oracle
