#include "berry/propagate.hpp"

#include <algorithm>
#include <cmath>

#include "berry/csvio.hpp"
#include "berry/errors.hpp"

namespace berry {
namespace {

// i dU/ds = G(s) U with G Hermitian; the callback fills a preallocated matrix.
using GeneratorFn = std::function<void(double, Mat&)>;

// exp(-i g) for Hermitian g. dim = 2 uses the Pauli closed form; larger dims
// go through a Hermitian eigensolve, so every step stays exactly unitary.
void expm_minus_i(const Mat& g, Mat& out) {
    const int dim = static_cast<int>(g.rows());
    if (dim == 2) {
        const double a = 0.5 * (g(0, 0).real() + g(1, 1).real());
        const double bz = 0.5 * (g(0, 0).real() - g(1, 1).real());
        const double bx = g(0, 1).real();
        const double by = -g(0, 1).imag();
        const double bn = std::sqrt(bx * bx + by * by + bz * bz);
        const Complex pref = std::polar(1.0, -a);
        double cb = std::cos(bn);
        double snc = (bn > 1e-300) ? std::sin(bn) / bn : 1.0;
        out.resize(2, 2);
        out(0, 0) = pref * Complex(cb, -snc * bz);
        out(1, 1) = pref * Complex(cb, snc * bz);
        out(0, 1) = pref * (Complex(0.0, -snc) * Complex(bx, -by));
        out(1, 0) = pref * (Complex(0.0, -snc) * Complex(bx, by));
        return;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(g);
    const RVec& ev = es.eigenvalues();
    Vec phases(dim);
    for (int i = 0; i < dim; ++i) phases(i) = std::polar(1.0, -ev(i));
    out.noalias() = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

struct StepWork {
    Mat g1, g2, a, b, ea, eb, tmp, u2;
    explicit StepWork(int dim)
        : g1(dim, dim), g2(dim, dim), a(dim, dim), b(dim, dim), ea(dim, dim), eb(dim, dim),
          tmp(dim, dim), u2(dim, dim) {}
};

// One CF4 step over [s, s+h]: two Gauss-Legendre generator samples combined
// into two exponentials (Blanes-Moan fourth-order commutator-free scheme).
void step_cf4(const GeneratorFn& gen, double s, double h, Mat& u, StepWork& w) {
    static const double kC1 = 0.5 - std::sqrt(3.0) / 6.0;
    static const double kC2 = 0.5 + std::sqrt(3.0) / 6.0;
    static const double kX1 = 0.25 + std::sqrt(3.0) / 6.0;
    static const double kX2 = 0.25 - std::sqrt(3.0) / 6.0;
    gen(s + kC1 * h, w.g1);
    gen(s + kC2 * h, w.g2);
    w.a.noalias() = h * (kX1 * w.g1 + kX2 * w.g2); // applied first
    w.b.noalias() = h * (kX2 * w.g1 + kX1 * w.g2);
    expm_minus_i(w.a, w.ea);
    expm_minus_i(w.b, w.eb);
    w.tmp.noalias() = w.ea * u;
    w.u2.noalias() = w.eb * w.tmp;
    u.swap(w.u2);
}

// Integrate with a fixed total step budget distributed over the checkpoint
// intervals; returns U at every checkpoint (checkpoints[0] may be 0).
std::vector<Mat> integrate_fixed(const GeneratorFn& gen, int dim,
                                 const std::vector<double>& ckpts, long n_total,
                                 long& steps_done) {
    StepWork w(dim);
    Mat u = Mat::Identity(dim, dim);
    std::vector<Mat> out;
    out.reserve(ckpts.size());
    double s_prev = 0.0;
    steps_done = 0;
    for (double s_next : ckpts) {
        const double span = s_next - s_prev;
        if (span > 0.0) {
            const long m = std::max<long>(1, std::lround(static_cast<double>(n_total) * span));
            const double h = span / static_cast<double>(m);
            for (long k = 0; k < m; ++k) step_cf4(gen, s_prev + k * h, h, u, w);
            steps_done += m;
        }
        s_prev = s_next;
        out.push_back(u);
    }
    return out;
}

struct AdaptiveResult {
    std::vector<Mat> us;
    IntegratorReport report;
};

// Halve the step until the two-level Richardson defect meets the tolerance.
// The finer pass is returned; its error estimate is defect / (2^4 - 1).
AdaptiveResult integrate_adaptive(const GeneratorFn& gen, int dim,
                                  const std::vector<double>& ckpts, double runtime, double tol,
                                  long step_cap, double scale_hint) {
    // A-priori budget from the fourth-order error model err ~ S T^2 h^4.
    const double s_const = std::max(1e-4, scale_hint);
    double n_guess = std::pow(runtime * runtime * s_const / tol, 0.25);
    long n = 64;
    while (static_cast<double>(n) < n_guess) n *= 2;

    long steps_coarse = 0;
    std::vector<Mat> us = integrate_fixed(gen, dim, ckpts, n, steps_coarse);
    IntegratorReport rep;
    rep.tol = tol;
    for (;;) {
        if (2 * n > step_cap)
            throw RuntimeTooLargeError(
                "step cap " + std::to_string(step_cap) + " exceeded integrating runtime T = " +
                fmt_double(runtime) + "; relax the tolerance (currently " + fmt_double(tol) + ")");
        long steps_fine = 0;
        std::vector<Mat> us2 = integrate_fixed(gen, dim, ckpts, 2 * n, steps_fine);
        double defect = 0.0;
        for (std::size_t i = 0; i < us.size(); ++i)
            defect = std::max(defect, (us[i] - us2[i]).norm());
        rep.defect = defect / 15.0;
        rep.steps = steps_fine;
        if (rep.defect <= tol) {
            rep.doublings = static_cast<int>(std::lround(std::log2(static_cast<double>(n) / 64.0)));
            return {std::move(us2), rep};
        }
        us = std::move(us2);
        n *= 2;
    }
}

void check_checkpoints(const std::vector<double>& ckpts) {
    if (ckpts.empty()) throw ConfigError("need at least one checkpoint");
    double prev = 0.0;
    for (double c : ckpts) {
        if (c < prev || c > 1.0) throw ConfigError("checkpoints must be sorted within [0, 1]");
        prev = c;
    }
}

Vec ground_state(const LoopHamiltonian& model, double s) {
    Eigen::SelfAdjointEigenSolver<Mat> es(model.evaluate(s));
    return es.eigenvectors().col(0);
}

} // namespace

std::vector<double> uniform_checkpoints(int count) {
    if (count < 2) throw ConfigError("uniform_checkpoints: count >= 2");
    std::vector<double> s(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        s[static_cast<std::size_t>(i)] = static_cast<double>(i) / (count - 1);
    s.back() = 1.0;
    return s;
}

EvolutionRecord evolve_true(const LoopHamiltonian& model, double runtime, Direction dir,
                            const std::vector<double>& checkpoints,
                            const PropagateOptions& opts) {
    if (!(runtime > 0.0)) throw ConfigError("evolve_true: runtime must be positive");
    check_checkpoints(checkpoints);
    const double sign = (dir == Direction::Forward) ? 1.0 : -1.0;
    const int dim = model.dim;
    GeneratorFn gen = [&model, sign, runtime](double s, Mat& g) {
        model.eval_into(s, g);
        g *= sign * runtime;
    };
    const double tol = opts.resolve_tol(runtime);
    const double hint = 0.1 * (2.0 * model.h_max * model.hdot_max +
                               model.hddot_max / std::max(runtime, 1.0));
    AdaptiveResult res =
        integrate_adaptive(gen, dim, checkpoints, runtime, tol, opts.step_cap, hint);

    EvolutionRecord rec;
    rec.runtime = runtime;
    rec.direction = dir;
    rec.s = checkpoints;
    rec.u_true = std::move(res.us);
    rec.report_true = res.report;
    return rec;
}

EvolutionRecord evolve_ideal(const LoopHamiltonian& model, const SpectralFrame& frame,
                             double runtime, Direction dir,
                             const std::vector<double>& checkpoints,
                             const PropagateOptions& opts) {
    if (!(runtime > 0.0)) throw ConfigError("evolve_ideal: runtime must be positive");
    if (frame.dim != model.dim) throw ConfigError("evolve_ideal: frame/model dimension mismatch");
    if (frame.gap_min < 1e-8) throw ModelDegeneracyError("evolve_ideal: frame is degenerate");
    check_checkpoints(checkpoints);

    const double sign = (dir == Direction::Forward) ? 1.0 : -1.0;
    const int dim = model.dim;
    // G(s) = sign*T*H + i[Pdot, P]; the bracket term is direction-independent.
    // P and Pdot come from a pointwise eigensolve plus the eigenvalue-equation
    // identity, never from numerical differentiation of projectors.
    GeneratorFn gen = [&model, sign, runtime, dim](double s, Mat& g) {
        Mat h(dim, dim), hdot(dim, dim);
        model.eval_into(s, h);
        model.deriv_into(s, hdot);
        Eigen::SelfAdjointEigenSolver<Mat> es(h);
        const RVec& ev = es.eigenvalues();
        const Mat& v = es.eigenvectors();
        const Vec psi = v.col(0);
        Vec w = Vec::Zero(dim); // Q |psidot| component: sum_n c_n |n>
        for (int n = 1; n < dim; ++n) {
            const Complex hn0 = v.col(n).dot(hdot * psi);
            w += (hn0 / (ev(0) - ev(n))) * v.col(n);
        }
        g.noalias() = (sign * runtime) * h;
        g.noalias() += kI * (w * psi.adjoint() - psi * w.adjoint());
    };
    const double tol = opts.resolve_tol(runtime);
    const double hint = 0.1 * (2.0 * model.h_max * model.hdot_max +
                               model.hddot_max / std::max(runtime, 1.0));
    AdaptiveResult res =
        integrate_adaptive(gen, dim, checkpoints, runtime, tol, opts.step_cap, hint);

    EvolutionRecord rec;
    rec.runtime = runtime;
    rec.direction = dir;
    rec.s = checkpoints;
    rec.u_ideal = std::move(res.us);
    rec.report_ideal = res.report;
    return rec;
}

EvolutionRecord wave_scalar(const LoopHamiltonian& model, const EvolutionRecord& true_rec,
                            const EvolutionRecord& ideal_rec) {
    if (true_rec.runtime != ideal_rec.runtime || true_rec.direction != ideal_rec.direction ||
        true_rec.s != ideal_rec.s)
        throw ConfigError("wave_scalar: records must share runtime, direction and checkpoints");
    if (true_rec.u_true.empty() || ideal_rec.u_ideal.empty())
        throw ConfigError("wave_scalar: need one true and one ideal record");

    EvolutionRecord rec;
    rec.runtime = true_rec.runtime;
    rec.direction = true_rec.direction;
    rec.s = true_rec.s;
    rec.u_true = true_rec.u_true;
    rec.u_ideal = ideal_rec.u_ideal;
    rec.report_true = true_rec.report_true;
    rec.report_ideal = ideal_rec.report_ideal;

    const Vec psi0 = ground_state(model, 0.0);
    const std::size_t npts = rec.s.size();
    rec.z.resize(npts);
    rec.phase_error.resize(npts);
    rec.leakage.resize(npts);
    rec.dyn_phase.resize(npts);

    const double dsign = (rec.direction == Direction::Forward) ? 1.0 : -1.0;
    double phi_prev = 0.0;
    for (std::size_t i = 0; i < npts; ++i) {
        const Vec a = rec.u_ideal[i] * psi0;
        const Vec b = rec.u_true[i] * psi0;
        const Complex z = a.dot(b);
        rec.z[i] = z;
        if (std::abs(z) < 1e-6)
            throw PhaseUndefinedError("wave_scalar: |z| < 1e-6 at s = " + fmt_double(rec.s[i]) +
                                      " (phase error undefined)");
        rec.leakage[i] = 1.0 - std::norm(z);
        double phi = std::arg(z);
        if (i == 0) {
            if (rec.s[0] == 0.0 && std::abs(phi) > 1e-12)
                throw NumericalError("wave_scalar: z(0) != 1");
        } else {
            const double jump = wrap_pm_pi(phi - phi_prev);
            if (std::abs(jump) >= kPi / 2.0)
                throw NumericalError(
                    "wave_scalar: phase step >= pi/2 between checkpoints; use a denser grid");
            phi = phi_prev + jump;
        }
        rec.phase_error[i] = phi;
        phi_prev = phi;
        rec.dyn_phase[i] = dsign * dynamical_phase(model, rec.runtime, rec.s[i]);
    }
    return rec;
}

void write_evolution_csv(const EvolutionRecord& rec, const std::string& path) {
    CsvWriter w(path,
                "wave-operator record at T = " + fmt_double(rec.runtime) + ", " +
                    to_string(rec.direction),
                {"s", "re_z", "im_z", "phi", "p_leak", "theta_d"});
    for (std::size_t i = 0; i < rec.s.size(); ++i)
        w.row({fmt_double(rec.s[i]), fmt_double(rec.z[i].real()), fmt_double(rec.z[i].imag()),
               fmt_double(rec.phase_error[i]),
               fmt_double(std::max(0.0, rec.leakage[i])), // clamp round-off negatives
               fmt_double(rec.dyn_phase[i])});
}

Complex final_overlap(const LoopHamiltonian& model, double runtime, Direction dir,
                      const PropagateOptions& opts) {
    const EvolutionRecord rec = evolve_true(model, runtime, dir, {1.0}, opts);
    const Vec psi0 = ground_state(model, 0.0);
    return psi0.dot(rec.u_true[0] * psi0);
}

Mat final_unitary(const LoopHamiltonian& model, double runtime, Direction dir,
                  const PropagateOptions& opts) {
    return evolve_true(model, runtime, dir, {1.0}, opts).u_true[0];
}

double dynamical_phase(const LoopHamiltonian& model, double runtime, double s_to) {
    // 16-point Gauss-Legendre panels over [0, s_to]; E_0 per node.
    static const double kNode[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                                    0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                                    0.9445750230732326, 0.9894009349916499};
    static const double kWeight[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                                      0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                                      0.0622535239386479, 0.0271524594117541};
    if (s_to == 0.0) return 0.0;
    const int panels = std::max(4, static_cast<int>(std::ceil(16.0 * s_to)));
    const double hw = s_to / panels / 2.0;
    double acc = 0.0;
    Mat h(model.dim, model.dim);
    for (int p = 0; p < panels; ++p) {
        const double mid = (2.0 * p + 1.0) * hw;
        for (int q = 0; q < 8; ++q) {
            for (double sgn : {-1.0, 1.0}) {
                const double s = mid + sgn * hw * kNode[q];
                model.eval_into(s, h);
                Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
                acc += kWeight[q] * hw * es.eigenvalues()(0);
            }
        }
    }
    return runtime * acc;
}

} // namespace berry
