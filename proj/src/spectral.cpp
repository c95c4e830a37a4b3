#include "berry/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "berry/csvio.hpp"
#include "berry/errors.hpp"
#include "berry/quadrature.hpp"

namespace berry {

SpectralFrame decompose(const LoopHamiltonian& model, int grid_size) {
    if (grid_size < 64) throw ConfigError("decompose requires grid_size >= 64");
    if (grid_size % 2 != 0) throw ConfigError("decompose requires an even grid_size");

    const int dim = model.dim;
    const int G = grid_size;
    SpectralFrame f;
    f.dim = dim;
    f.grid_size = G;
    f.s.resize(static_cast<std::size_t>(G) + 1);
    f.energies.resize(G + 1, dim);
    f.vecs.resize(static_cast<std::size_t>(G) + 1);
    f.coupling.assign(static_cast<std::size_t>(G) + 1, Mat::Zero(dim, dim));

    Mat h(dim, dim);
    for (int g = 0; g <= G; ++g) {
        const double s = static_cast<double>(g) / G;
        f.s[static_cast<std::size_t>(g)] = s;
        model.eval_into(s, h);
        Eigen::SelfAdjointEigenSolver<Mat> es(h);
        if (es.info() != Eigen::Success)
            throw NumericalError("eigensolve failed at s = " + fmt_double(s));
        RVec ev = es.eigenvalues();
        Mat V = es.eigenvectors();

        if (g > 0) {
            // Track continuation: match each previous column to the current
            // one of largest |overlap| rather than trusting the sort order.
            const Mat& prev = f.vecs[static_cast<std::size_t>(g) - 1];
            Mat ov = prev.adjoint() * V;
            std::vector<int> perm(static_cast<std::size_t>(dim), -1);
            std::vector<bool> used(static_cast<std::size_t>(dim), false);
            for (int n = 0; n < dim; ++n) {
                int best = -1;
                double best_val = -1.0;
                for (int m = 0; m < dim; ++m) {
                    if (used[static_cast<std::size_t>(m)]) continue;
                    const double val = std::abs(ov(n, m));
                    if (val > best_val) {
                        best_val = val;
                        best = m;
                    }
                }
                if (best_val < 0.7)
                    throw GridTooCoarseError(
                        "eigenvector overlap matching ambiguous at s = " + fmt_double(s) +
                        " (max overlap " + fmt_double(best_val) + "); refine the grid");
                perm[static_cast<std::size_t>(n)] = best;
                used[static_cast<std::size_t>(best)] = true;
            }
            Mat Vp(dim, dim);
            RVec evp(dim);
            for (int n = 0; n < dim; ++n) {
                Vp.col(n) = V.col(perm[static_cast<std::size_t>(n)]);
                evp(n) = ev(perm[static_cast<std::size_t>(n)]);
            }
            V = Vp;
            ev = evp;
            // Chain gauge: rotate each column so the overlap with the previous
            // point is real-positive.
            for (int n = 0; n < dim; ++n) {
                const Complex o = prev.col(n).dot(V.col(n));
                const double a = std::abs(o);
                if (a > 0.0) V.col(n) *= std::conj(o) / a;
            }
        }

        for (int n = 0; n + 1 < dim; ++n)
            if (ev(n + 1) - ev(n) < 1e-8)
                throw ModelDegeneracyError("spectrum degenerate at s = " + fmt_double(s) +
                                           " (splitting " + fmt_double(ev(n + 1) - ev(n)) + ")");

        f.energies.row(g) = ev.transpose();
        f.vecs[static_cast<std::size_t>(g)] = V;
    }

    f.h_max = model.h_max;
    f.hdot_max = model.hdot_max;
    f.hddot_max = model.hddot_max;
    f.gap0 = f.energies(0, 1) - f.energies(0, 0);
    f.gap_min = std::numeric_limits<double>::infinity();
    f.gamma_ex = std::numeric_limits<double>::infinity();
    for (int g = 0; g <= G; ++g) {
        f.gap_min = std::min(f.gap_min, f.energies(g, 1) - f.energies(g, 0));
        for (int n = 1; n < dim; ++n)
            for (int k = n + 1; k < dim; ++k)
                f.gamma_ex = std::min(f.gamma_ex, std::abs(f.energies(g, k) - f.energies(g, n)));
    }

    // Endpoint identification: |n(1)> = e^{i chi_n} |n(0)>.
    f.chi.resize(dim);
    for (int n = 0; n < dim; ++n)
        f.chi(n) = std::arg(f.vecs[0].col(n).dot(f.vecs[static_cast<std::size_t>(G)].col(n)));

    // Couplings. Off-diagonal entries follow from differentiating the
    // eigenvalue equation: M_nm = <n|Hdot|m> / (E_m - E_n). Diagonal entries
    // come from centered differences of the chain, with the chi twist applied
    // when the stencil wraps around the endpoint.
    const double hgrid = 1.0 / G;
    Mat hdot(dim, dim);
    auto vec_at = [&](int g, int n) -> Vec {
        if (g > G) return std::polar(1.0, f.chi(n)) * Vec(f.vecs[static_cast<std::size_t>(g - G)].col(n));
        if (g < 0) return std::polar(1.0, -f.chi(n)) * Vec(f.vecs[static_cast<std::size_t>(g + G)].col(n));
        return f.vecs[static_cast<std::size_t>(g)].col(n);
    };
    for (int g = 0; g <= G; ++g) {
        model.deriv_into(f.s[static_cast<std::size_t>(g)], hdot);
        const Mat& V = f.vecs[static_cast<std::size_t>(g)];
        Mat me = V.adjoint() * hdot * V;
        Mat& M = f.coupling[static_cast<std::size_t>(g)];
        for (int n = 0; n < dim; ++n) {
            for (int m = 0; m < dim; ++m) {
                if (n == m) {
                    const Vec dvec = (vec_at(g + 1, n) - vec_at(g - 1, n)) / (2.0 * hgrid);
                    M(n, n) = V.col(n).dot(dvec);
                } else {
                    M(n, m) = me(n, m) / (f.energies(g, m) - f.energies(g, n));
                }
            }
        }
    }

    // Integrated quantities.
    f.theta_b_open.resize(G + 1, dim);
    f.omega.resize(G + 1, dim);
    f.energy_cum.resize(G + 1, dim);
    f.phi_arg.resize(G + 1, dim);
    f.beta_open.resize(G + 1, dim);
    f.theta_b_loop.resize(dim);
    f.beta_loop.resize(dim);

    std::vector<double> buf(static_cast<std::size_t>(G) + 1);
    for (int n = 0; n < dim; ++n) {
        for (int g = 0; g <= G; ++g)
            buf[static_cast<std::size_t>(g)] =
                -f.coupling[static_cast<std::size_t>(g)](n, n).imag(); // i*M_nn is real
        std::vector<double> th = cumulative(buf, hgrid);
        for (int g = 0; g <= G; ++g) f.theta_b_open(g, n) = th[static_cast<std::size_t>(g)];
        f.theta_b_loop(n) = wrap_2pi(th[static_cast<std::size_t>(G)] + f.chi(n));

        for (int g = 0; g <= G; ++g)
            buf[static_cast<std::size_t>(g)] = f.energies(g, n) - f.energies(g, 0);
        std::vector<double> om = cumulative(buf, hgrid);
        for (int g = 0; g <= G; ++g) f.omega(g, n) = om[static_cast<std::size_t>(g)];

        for (int g = 0; g <= G; ++g) buf[static_cast<std::size_t>(g)] = f.energies(g, n);
        std::vector<double> ec = cumulative(buf, hgrid);
        for (int g = 0; g <= G; ++g) f.energy_cum(g, n) = ec[static_cast<std::size_t>(g)];
    }
    for (int g = 0; g <= G; ++g)
        for (int n = 0; n < dim; ++n)
            f.beta_open(g, n) = f.theta_b_open(g, n) - f.theta_b_open(g, 0);
    for (int n = 0; n < dim; ++n)
        f.beta_loop(n) = wrap_pm_pi(f.theta_b_loop(n) - f.theta_b_loop(0));

    // arg M_n0 unwrapped along the grid (levels n >= 1).
    for (int n = 0; n < dim; ++n) {
        double prev = 0.0;
        for (int g = 0; g <= G; ++g) {
            const Complex m = f.coupling[static_cast<std::size_t>(g)](n, 0);
            double a = (n == 0 || std::abs(m) == 0.0) ? 0.0 : std::arg(m);
            if (g > 0) a = prev + wrap_pm_pi(a - prev);
            f.phi_arg(g, n) = a;
            prev = a;
        }
    }
    return f;
}

double berry_phase_oracle(const SpectralFrame& frame, int level) {
    if (level < 0 || level >= frame.dim) throw ConfigError("berry_phase_oracle: bad level");
    const int G = frame.grid_size;
    double arg_sum = 0.0;
    for (int g = 0; g < G; ++g) {
        const Complex o = frame.vecs[static_cast<std::size_t>(g)].col(level).dot(
            frame.vecs[static_cast<std::size_t>(g) + 1].col(level));
        arg_sum += std::arg(o);
    }
    // Close the loop: the last factor is <n(s_G)|n(s_0)>.
    const Complex closing =
        frame.vecs[static_cast<std::size_t>(G)].col(level).dot(frame.vecs[0].col(level));
    arg_sum += std::arg(closing);
    return wrap_2pi(-arg_sum);
}

double berry_phase_oracle_refined(const LoopHamiltonian& model, int level, int grid) {
    const double a = berry_phase_oracle(decompose(model, grid), level);
    const double b = berry_phase_oracle(decompose(model, 2 * grid), level);
    return wrap_2pi(b + wrap_pm_pi(b - a) / 3.0);
}

std::vector<CouplingRow> coupling_profile(const SpectralFrame& frame) {
    std::vector<CouplingRow> rows;
    rows.reserve(static_cast<std::size_t>(frame.grid_size + 1) *
                 static_cast<std::size_t>(frame.dim - 1));
    for (int g = 0; g <= frame.grid_size; ++g) {
        for (int n = 1; n < frame.dim; ++n) {
            CouplingRow r;
            r.s = frame.s[static_cast<std::size_t>(g)];
            r.n = n;
            r.m_n0 = frame.coupling[static_cast<std::size_t>(g)](n, 0);
            r.gap = frame.delta_n0(g, n);
            r.phi_n = frame.phi_arg(g, n);
            r.beta_n = (g == frame.grid_size) ? frame.beta_loop(n) : frame.beta_open(g, n);
            r.omega_n = frame.omega(g, n);
            rows.push_back(r);
        }
    }
    return rows;
}

void write_coupling_csv(const std::vector<CouplingRow>& rows, const std::string& path) {
    CsvWriter w(path, "coupling profile: M_n0, gaps and integrated phases per level",
                {"s", "n", "re_m", "im_m", "gap", "phi_n", "beta_n", "omega_n"});
    for (const auto& r : rows)
        w.row({fmt_double(r.s), std::to_string(r.n), fmt_double(r.m_n0.real()),
               fmt_double(r.m_n0.imag()), fmt_double(r.gap), fmt_double(r.phi_n),
               fmt_double(r.beta_n), fmt_double(r.omega_n)});
}

} // namespace berry
