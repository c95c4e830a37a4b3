#pragma once

#include <functional>
#include <string>
#include <vector>

#include "berry/linalg.hpp"
#include "berry/spectral.hpp"

namespace berry {

// Expansion coefficients of the adiabatic phase and leakage errors, computed
// from the spectral frame. All full-loop integrals use composite Simpson on
// the frame grid.
//
// Endpoint combinations are evaluated in the gauge-invariant form
//   gamma_n = beta_n(1) + phi_n(0) - phi_n(1)
// which reduces to the closed-loop relative Berry phase when the derivative
// endpoints match. The oscillatory denominators follow the appendix form
// Delta_n(1) Delta_n(0); equality with Delta_n(0)^2 under loop closure is a
// checked invariant rather than an assumption.
struct AptBreakdown {
    double phi1 = 0.0;        // integral of sum |M_n|^2 / Delta_n
    double phi2 = 0.0;        // non-oscillatory second order (both parts)
    double phi2_beta_phi = 0.0; // (beta' - phi') |M|^2 / Delta^2 part
    double phi2_triple = 0.0;   // -i * integral of the triple-excitation sum

    // Per excited level n = 1..dim-1 (index 0 of the vectors is level 1).
    std::vector<double> amp_n;     // |M_n(0)||M_n(1)| / (Delta_n(1) Delta_n(0))
    std::vector<double> gamma_n;   // invariant endpoint phase (see above)
    std::vector<double> b_n;       // amp_n * sin(gamma_n)
    std::vector<double> omega_n;   // integral of Delta_n over the loop
    std::vector<double> m0_over_gap; // |M_n(0)| / Delta_n(0)
    std::vector<double> m1_over_gap; // |M_n(1)| / Delta_n(1)

    double hdot_max = 0.0;
    double gap_min = 0.0;
    double gap0 = 0.0;

    // Oscillatory second-order term phi_2^(T).
    double phi2_osc(double T) const;
    // Forward-reverse combination Phi_2^(T) = -sum B_n cos(omega_n T).
    double phi2_osc_fwdrev(double T) const;
    // Richardson remainder Phi_2^(alpha, T).
    double phi2_osc_richardson(double alpha, double T) const;
    // Leading leakage term of the expansion (including the 1/T^2).
    double leakage_leading(double T) const;
    // sup_T |phi2_osc| and the leakage bound proxy sum (a_n + b_n)^2.
    double phi2_osc_sup() const;
    double leak_coeff_sup() const;
    // Lemma bound phi1 <= Hdot_max^2 / Delta_min^3; returned as the bound value.
    double phi1_bound() const;
};

AptBreakdown phase_coefficients(const SpectralFrame& frame);

// Leading leakage prediction as a function of T plus the realized
// coefficient-bound proxy: p_leak(1) ~ leading(T), sup_T T^2 leading <= bound.
struct LeakagePrediction {
    std::function<double(double)> leading;
    double coeff_bound = 0.0; // sum_n (a_n + b_n)^2
    double scale_proxy = 0.0; // Hdot(0)-based scale the bound is compared to
};
LeakagePrediction leakage_coefficients(const SpectralFrame& frame);

// APT recursion coefficients b^(p)_{nm}(s) for p = 1, 2, ground-state start.
// Values are computed on the full frame grid; evaluation snaps to the nearest
// grid point.
struct AptAmplitudes {
    int order = 1;
    std::vector<Mat> b_grid; // per grid point, dim x dim
    const SpectralFrame* frame = nullptr;

    Mat at(double s) const;
};
AptAmplitudes apt_amplitudes(const SpectralFrame& frame, int order);
Mat apt_amplitudes(const SpectralFrame& frame, int order, double s);

// |Psi^(p)(s_g)> reconstructed from the amplitude table (T-dependent phases
// included, coefficient scaled by T^-p NOT applied).
Vec apt_state_correction(const SpectralFrame& frame, const AptAmplitudes& amps, double runtime,
                         int grid_index);

// Appendix bound constituents for the second-order coefficient.
struct SecondOrderBound {
    double term1 = 0.0; // Hdot^2 Hddot / Delta^5
    double term2 = 0.0; // Hdot^4 / Delta^6
    double term3 = 0.0; // Hdot^3 / (Delta^4 gamma_ex); absent for dim = 2
    double gamma_ex = 0.0;
    double hdot_max = 0.0;
    double hddot_max = 0.0;
    double gap_min = 0.0;
    double phi2_plus_osc_sup = 0.0; // |phi2| + sup_T |phi2^(T)|
    double c2_proxy = 0.0;          // term1 + term2 + term3
    double realized_ratio = 0.0;    // phi2_plus_osc_sup / c2_proxy
};
SecondOrderBound second_order_bound(const SpectralFrame& frame);

std::string apt_report_json(const AptBreakdown& bd, const SecondOrderBound& bound);

} // namespace berry
