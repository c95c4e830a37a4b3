#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>

namespace berry {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline const Complex kI{0.0, 1.0};

// Largest |entry| of A - A^dagger; zero for exactly Hermitian input.
inline double hermiticity_defect(const Mat& a) {
    return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

inline double max_abs(const Mat& a) { return a.cwiseAbs().maxCoeff(); }

// Spectral norm of a Hermitian matrix (max |eigenvalue|).
inline double herm_norm(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double unitarity_defect(const Mat& u) {
    const Mat d = u.adjoint() * u - Mat::Identity(u.rows(), u.cols());
    return d.norm();
}

// Wrap into [0, 2*pi).
inline double wrap_2pi(double x) {
    double y = std::fmod(x, kTwoPi);
    if (y < 0.0) y += kTwoPi;
    if (y >= kTwoPi) y = 0.0;
    return y;
}

// Wrap into (-pi, pi].
inline double wrap_pm_pi(double x) {
    double y = std::fmod(x, kTwoPi);
    if (y > kPi) y -= kTwoPi;
    if (y <= -kPi) y += kTwoPi;
    return y;
}

// Wrap into [0, pi).
inline double wrap_pi(double x) {
    double y = std::fmod(x, kPi);
    if (y < 0.0) y += kPi;
    if (y >= kPi) y = 0.0;
    return y;
}

// Distance on the circle of circumference 2*pi.
inline double circ_dist(double a, double b) { return std::abs(wrap_pm_pi(a - b)); }

} // namespace berry
