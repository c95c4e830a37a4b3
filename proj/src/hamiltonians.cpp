#include "berry/hamiltonians.hpp"

#include <cmath>
#include <memory>
#include <sstream>

#include "berry/csvio.hpp"
#include "berry/errors.hpp"

namespace berry {
namespace {

void scan_norms(LoopHamiltonian& model) {
    Mat buf(model.dim, model.dim);
    model.h_max = model.hdot_max = model.hddot_max = 0.0;
    for (int g = 0; g <= 64; ++g) {
        const double s = static_cast<double>(g) / 64.0;
        model.eval_into(s, buf);
        model.h_max = std::max(model.h_max, herm_norm(buf));
        model.deriv_into(s, buf);
        model.hdot_max = std::max(model.hdot_max, herm_norm(buf));
        model.deriv2_into(s, buf);
        model.hddot_max = std::max(model.hddot_max, herm_norm(buf));
    }
}

// Centered stencils on the analytic evaluator; used for derivative = "fd".
void attach_fd_derivatives(LoopHamiltonian& model, double h) {
    if (!(h > 0.0) || h > 1e-2) throw ConfigError("fd_step must lie in (0, 1e-2]");
    auto eval = model.eval_into;
    const int dim = model.dim;
    model.deriv_into = [eval, h, dim](double s, Mat& out) {
        Mat hi(dim, dim), lo(dim, dim);
        eval(s + h, hi);
        eval(s - h, lo);
        out = (hi - lo) / (2.0 * h);
    };
    model.deriv2_into = [eval, h, dim](double s, Mat& out) {
        Mat hi(dim, dim), mid(dim, dim), lo(dim, dim);
        eval(s + h, hi);
        eval(s, mid);
        eval(s - h, lo);
        out = (hi - 2.0 * mid + lo) / (h * h);
    };
}

double get_param(const ModelSpec& spec, const std::string& key, double fallback) {
    auto it = spec.params.find(key);
    return it == spec.params.end() ? fallback : it->second;
}

} // namespace

std::string LoopHamiltonian::cache_key() const {
    std::ostringstream os;
    os << name << "{";
    for (const auto& kv : params) os << kv.first << "=" << fmt_double(kv.second) << ";";
    os << "}";
    return os.str();
}

void validate_loop(const LoopHamiltonian& model) {
    Mat h0 = model.evaluate(0.0);
    Mat h1 = model.evaluate(1.0);
    if (max_abs(h1 - h0) > 1e-13)
        throw ConfigError("loop closure violated: max|H(1)-H(0)| = " +
                          fmt_double(max_abs(h1 - h0)));
    for (int g = 0; g <= 32; ++g) {
        const double s = static_cast<double>(g) / 32.0;
        const Mat h = model.evaluate(s);
        if (hermiticity_defect(h) > 1e-13)
            throw ConfigError("H(s) not Hermitian at s = " + fmt_double(s));
        // derivative vs centered difference of evaluate, O(h^2) stencil
        const double fd = 1e-5;
        const Mat d = model.derivative(s);
        const Mat dfd = (model.evaluate(s + fd) - model.evaluate(s - fd)) / (2.0 * fd);
        const double scale = std::max(1.0, model.hddot_max);
        if (max_abs(d - dfd) > 1e3 * fd * fd * scale + 1e-9)
            throw ConfigError("derivative inconsistent with finite differences at s = " +
                              fmt_double(s));
    }
}

LoopHamiltonian build_spin_cone(double b_field, double theta_cone) {
    if (!(b_field > 0.0)) throw ConfigError("spin-cone requires B > 0");
    if (!(theta_cone > 0.0 && theta_cone < kPi))
        throw ConfigError("spin-cone requires 0 < theta_cone < pi");

    LoopHamiltonian m;
    m.dim = 2;
    m.name = "spin-cone";
    m.params = {{"B", b_field}, {"theta_cone", theta_cone}};

    const double b = b_field, th = theta_cone;
    auto fill = [b, th](double s, Mat& out, int order) {
        const double w = kTwoPi;
        const double pref = std::pow(w, order);
        double c = std::cos(w * s), sn = std::sin(w * s);
        // d/ds rotates (cos, sin) by +pi/2 each order
        for (int k = 0; k < order; ++k) {
            const double c2 = -sn, s2 = c;
            c = c2;
            sn = s2;
        }
        const double nx = std::sin(th) * c * pref;
        const double ny = std::sin(th) * sn * pref;
        const double nz = (order == 0) ? std::cos(th) : 0.0;
        out.resize(2, 2);
        out(0, 0) = Complex(0.5 * b * nz, 0.0);
        out(1, 1) = Complex(-0.5 * b * nz, 0.0);
        out(0, 1) = Complex(0.5 * b * nx, -0.5 * b * ny);
        out(1, 0) = Complex(0.5 * b * nx, 0.5 * b * ny);
    };
    m.eval_into = [fill](double s, Mat& out) { fill(s, out, 0); };
    m.deriv_into = [fill](double s, Mat& out) { fill(s, out, 1); };
    m.deriv2_into = [fill](double s, Mat& out) { fill(s, out, 2); };

    scan_norms(m);
    validate_loop(m);
    return m;
}

ModelSpec three_level_default_spec() {
    ModelSpec spec;
    spec.kind = ModelKind::ThreeLevel;
    spec.params = {{"B", 1.0}, {"theta_cone", 0.9}, {"e2", 2.2}, {"g12", 0.3}, {"g02", 0.15}};
    return spec;
}

LoopHamiltonian build_three_level(const ModelSpec& spec) {
    const double b = get_param(spec, "B", 1.0);
    const double th = get_param(spec, "theta_cone", 0.9);
    const double e2 = get_param(spec, "e2", 2.2);
    const double g12 = get_param(spec, "g12", 0.3);
    const double g02 = get_param(spec, "g02", 0.15);
    if (!(b > 0.0)) throw ConfigError("three-level requires B > 0");
    if (th < 0.0 || th >= kPi) throw ConfigError("three-level requires 0 <= theta_cone < pi");

    LoopHamiltonian m;
    m.dim = 3;
    m.name = "three-level";
    m.params = {{"B", b}, {"theta_cone", th}, {"e2", e2}, {"g12", g12}, {"g02", g02}};

    // Cone block on {0,1}; |2> at energy e2 coupled to |1> with one Fourier
    // harmonic and to |0> with two, so the loop closes exactly.
    auto fill = [b, th, e2, g12, g02](double s, Mat& out, int order) {
        auto harm = [s, order](double freq) -> Complex {
            // d^order/ds^order of exp(-i freq s)
            const Complex base = std::exp(Complex(0.0, -freq * s));
            return std::pow(Complex(0.0, -freq), order) * base;
        };
        const double w = kTwoPi;
        const double pref = std::pow(w, order);
        double c = std::cos(w * s), sn = std::sin(w * s);
        for (int k = 0; k < order; ++k) {
            const double c2 = -sn, s2 = c;
            c = c2;
            sn = s2;
        }
        const double nx = std::sin(th) * c * pref;
        const double ny = std::sin(th) * sn * pref;
        const double nz = (order == 0) ? std::cos(th) : 0.0;

        out.resize(3, 3);
        out.setZero();
        out(0, 0) = Complex(0.5 * b * nz, 0.0);
        out(1, 1) = Complex(-0.5 * b * nz, 0.0);
        out(0, 1) = Complex(0.5 * b * nx, -0.5 * b * ny);
        out(1, 0) = std::conj(out(0, 1));
        out(2, 2) = (order == 0) ? Complex(e2, 0.0) : Complex(0.0, 0.0);
        const Complex c12 = g12 * harm(kTwoPi);
        const Complex c02 = g02 * harm(2.0 * kTwoPi);
        out(1, 2) = c12;
        out(2, 1) = std::conj(c12);
        out(0, 2) = c02;
        out(2, 0) = std::conj(c02);
    };
    m.eval_into = [fill](double s, Mat& out) { fill(s, out, 0); };
    m.deriv_into = [fill](double s, Mat& out) { fill(s, out, 1); };
    m.deriv2_into = [fill](double s, Mat& out) { fill(s, out, 2); };
    if (spec.derivative == DerivativeMode::FiniteDifference)
        attach_fd_derivatives(m, spec.fd_step);

    scan_norms(m);
    validate_loop(m);

    // The paper's setting is a fully non-degenerate spectrum; enforce it at
    // build time on a coarse grid rather than handling degeneracy downstream.
    for (int g = 0; g <= 256; ++g) {
        const double s = static_cast<double>(g) / 256.0;
        Eigen::SelfAdjointEigenSolver<Mat> es(m.evaluate(s), Eigen::EigenvaluesOnly);
        const auto& ev = es.eigenvalues();
        for (int n = 0; n + 1 < m.dim; ++n)
            if (ev(n + 1) - ev(n) < 1e-8)
                throw ModelDegeneracyError(
                    "three-level spectrum degenerate at s = " + fmt_double(s) +
                    " (splitting " + fmt_double(ev(n + 1) - ev(n)) + ")");
    }
    return m;
}

LoopHamiltonian build_matrix_path(const ModelSpec& spec) {
    const Mat f0 = spec.fourier_const;
    if (f0.rows() == 0 || f0.rows() != f0.cols())
        throw ConfigError("matrix-path requires a square constant term");
    const int dim = static_cast<int>(f0.rows());
    if (hermiticity_defect(f0) > 1e-13)
        throw ConfigError("matrix-path constant term is not Hermitian");
    if (spec.cos_coeff.size() != spec.sin_coeff.size())
        throw ConfigError("matrix-path needs matching cos/sin coefficient lists");
    for (std::size_t k = 0; k < spec.cos_coeff.size(); ++k) {
        for (const Mat* mm : {&spec.cos_coeff[k], &spec.sin_coeff[k]}) {
            if (mm->rows() != dim || mm->cols() != dim)
                throw ConfigError("matrix-path coefficient size mismatch at harmonic " +
                                  std::to_string(k + 1));
            if (hermiticity_defect(*mm) > 1e-13)
                throw ConfigError("matrix-path coefficient not Hermitian at harmonic " +
                                  std::to_string(k + 1));
        }
    }

    LoopHamiltonian m;
    m.dim = dim;
    m.name = "matrix-path";
    m.params = {{"dim", static_cast<double>(dim)},
                {"harmonics", static_cast<double>(spec.cos_coeff.size())}};

    auto series = std::make_shared<ModelSpec>(spec);
    auto fill = [series](double s, Mat& out, int order) {
        out = (order == 0) ? series->fourier_const
                           : Mat::Zero(series->fourier_const.rows(), series->fourier_const.cols());
        for (std::size_t k = 0; k < series->cos_coeff.size(); ++k) {
            const double freq = kTwoPi * static_cast<double>(k + 1);
            const double pref = std::pow(freq, order);
            double c = std::cos(freq * s), sn = std::sin(freq * s);
            for (int j = 0; j < order; ++j) {
                const double c2 = -sn, s2 = c;
                c = c2;
                sn = s2;
            }
            out += pref * (c * series->cos_coeff[k] + sn * series->sin_coeff[k]);
        }
    };
    m.eval_into = [fill](double s, Mat& out) { fill(s, out, 0); };
    m.deriv_into = [fill](double s, Mat& out) { fill(s, out, 1); };
    m.deriv2_into = [fill](double s, Mat& out) { fill(s, out, 2); };
    if (spec.derivative == DerivativeMode::FiniteDifference)
        attach_fd_derivatives(m, spec.fd_step);

    scan_norms(m);
    validate_loop(m);
    return m;
}

LoopHamiltonian build_model(const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelKind::SpinCone: {
            LoopHamiltonian m =
                build_spin_cone(get_param(spec, "B", 1.0), get_param(spec, "theta_cone", 0.4));
            if (spec.derivative == DerivativeMode::FiniteDifference) {
                attach_fd_derivatives(m, spec.fd_step);
                scan_norms(m);
            }
            return m;
        }
        case ModelKind::ThreeLevel:
            return build_three_level(spec);
        case ModelKind::MatrixPath:
            return build_matrix_path(spec);
    }
    throw ConfigError("unknown model kind");
}

namespace {

Mat parse_matrix(const ConfigValue& v, int dim, const std::string& key) {
    if (v.kind != ConfigValue::Kind::Array ||
        v.arr.size() != static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim))
        throw ConfigError("matrix '" + key + "' must be a row-major array of dim^2 [re, im] pairs");
    Mat m(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) {
            const ConfigValue& cell = v.arr[static_cast<std::size_t>(r * dim + c)];
            if (cell.kind != ConfigValue::Kind::Array || cell.arr.size() != 2 ||
                cell.arr[0].kind != ConfigValue::Kind::Number ||
                cell.arr[1].kind != ConfigValue::Kind::Number)
                throw ConfigError("matrix '" + key + "' entry (" + std::to_string(r) + "," +
                                  std::to_string(c) + ") is not a [re, im] pair");
            m(r, c) = Complex(cell.arr[0].num, cell.arr[1].num);
        }
    // Non-Hermitian input is a config mistake; report the first offender.
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c)
            if (std::abs(m(r, c) - std::conj(m(c, r))) > 1e-13)
                throw ConfigError("matrix '" + key + "' is not Hermitian at entry (" +
                                  std::to_string(r) + "," + std::to_string(c) + ")");
    return m;
}

} // namespace

LoopHamiltonian build_from_config(const Config& cfg) {
    ModelSpec spec;
    const std::string kind = cfg.get_str("model.kind");
    if (kind == "spin-cone")
        spec.kind = ModelKind::SpinCone;
    else if (kind == "three-level")
        spec.kind = ModelKind::ThreeLevel;
    else if (kind == "matrix-path")
        spec.kind = ModelKind::MatrixPath;
    else
        throw ConfigError("unknown model.kind '" + kind + "'");

    const std::string dmode = cfg.get_str("model.derivative", "analytic");
    if (dmode == "analytic")
        spec.derivative = DerivativeMode::Analytic;
    else if (dmode == "fd")
        spec.derivative = DerivativeMode::FiniteDifference;
    else
        throw ConfigError("model.derivative must be \"analytic\" or \"fd\"");
    spec.fd_step = cfg.get_num("model.fd_step", 1e-5);

    for (const std::string& key : cfg.keys_under("model.params")) {
        const std::string short_key = key.substr(std::string("model.params.").size());
        spec.params[short_key] = cfg.get_num(key);
    }

    if (spec.kind == ModelKind::MatrixPath) {
        const int dim = static_cast<int>(cfg.get_num("model.params.dim"));
        if (dim < 2 || dim > 32) throw ConfigError("matrix-path dim must lie in [2, 32]");
        spec.fourier_const = parse_matrix(cfg.get("model.matrices.const"), dim, "const");
        for (int k = 1;; ++k) {
            const std::string ck = "model.matrices.cos" + std::to_string(k);
            const std::string sk = "model.matrices.sin" + std::to_string(k);
            if (!cfg.has(ck) && !cfg.has(sk)) break;
            spec.cos_coeff.push_back(cfg.has(ck) ? parse_matrix(cfg.get(ck), dim, ck)
                                                 : Mat::Zero(dim, dim));
            spec.sin_coeff.push_back(cfg.has(sk) ? parse_matrix(cfg.get(sk), dim, sk)
                                                 : Mat::Zero(dim, dim));
        }
    }
    return build_model(spec);
}

LoopHamiltonian build_from_config(const std::string& path) {
    return build_from_config(Config::parse_file(path));
}

LoopHamiltonian shift_spectrum(const LoopHamiltonian& model, double shift) {
    LoopHamiltonian m = model;
    m.name = model.name + "+shift";
    m.params["shift"] = shift;
    auto base = model.eval_into;
    const int dim = model.dim;
    m.eval_into = [base, shift, dim](double s, Mat& out) {
        base(s, out);
        for (int i = 0; i < dim; ++i) out(i, i) += shift;
    };
    m.h_max = model.h_max + std::abs(shift);
    return m;
}

} // namespace berry
