#include "berry/measure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include <json.hpp>

#include "berry/csvio.hpp"
#include "berry/errors.hpp"

namespace berry {

UnitarySpectrum unitary_spectrum(const Mat& u, const Vec& psi0) {
    Eigen::ComplexEigenSolver<Mat> es(u);
    if (es.info() != Eigen::Success) throw NumericalError("eigensolve of the final unitary failed");
    const int dim = static_cast<int>(u.rows());
    UnitarySpectrum sp;
    sp.phases.resize(dim);
    sp.amps.resize(dim);
    for (int j = 0; j < dim; ++j) {
        sp.phases(j) = wrap_2pi(std::arg(es.eigenvalues()(j)));
        sp.amps(j) = es.eigenvectors().col(j).dot(psi0);
    }
    return sp;
}

double qpe_register_prob(double theta, int m_bits, long k) {
    const long size = 1L << m_bits;
    const double delta = theta / kTwoPi - static_cast<double>(k) / static_cast<double>(size);
    const double d = delta - std::round(delta); // wrap to [-1/2, 1/2]
    if (std::abs(d) < 1e-15) return 1.0;
    const double num = std::sin(kPi * static_cast<double>(size) * d);
    const double den = std::sin(kPi * d);
    const double amp = num / (static_cast<double>(size) * den);
    return amp * amp;
}

long qpe_sample_register(double theta, int m_bits, Rng& rng) {
    const long size = 1L << m_bits;
    const long nearest =
        ((std::lround(theta / kTwoPi * static_cast<double>(size))) % size + size) % size;
    const double u = rng.uniform();
    // The distribution concentrates at the nearest register value and decays
    // as 1/d^2; summing outward reaches u after O(1/(1-u)) terms on average.
    double acc = 0.0;
    for (long d = 0; d <= size / 2; ++d) {
        for (long sgn : {1L, -1L}) {
            if (d == 0 && sgn < 0) continue;
            if (2 * d == size && sgn < 0) continue; // antipode counted once
            const long k = ((nearest + sgn * d) % size + size) % size;
            acc += qpe_register_prob(theta, m_bits, k);
            if (acc >= u) return k;
        }
    }
    return nearest; // round-off: total mass fell epsilon short of u
}

double qpe_sample(const UnitarySpectrum& spectrum, const QpeConfig& cfg, Rng& rng) {
    if (cfg.m_bits < 1 || cfg.m_bits > 24) throw ConfigError("qpe m_bits must lie in [1, 24]");
    if (cfg.reps < 1) throw ConfigError("qpe reps must be >= 1");
    const int dim = static_cast<int>(spectrum.phases.size());
    const long size = 1L << cfg.m_bits;
    const int vote_bits = std::min(cfg.vote_bits < 1 ? cfg.m_bits : cfg.vote_bits, cfg.m_bits);
    const int shift = cfg.m_bits - vote_bits;

    std::vector<long> ks(static_cast<std::size_t>(cfg.reps));
    std::map<long, int> votes;
    for (int r = 0; r < cfg.reps; ++r) {
        // Born-rule branch pick; leakage shows up as the non-ground branches.
        const double u = rng.uniform();
        double acc = 0.0;
        int branch = dim - 1;
        for (int j = 0; j < dim; ++j) {
            acc += std::norm(spectrum.amps(j));
            if (u < acc) {
                branch = j;
                break;
            }
        }
        const long k = qpe_sample_register(spectrum.phases(branch), cfg.m_bits, rng);
        ks[static_cast<std::size_t>(r)] = k;
        votes[k >> shift] += 1;
    }
    long best_bucket = 0;
    int best_count = -1;
    for (const auto& kv : votes)
        if (kv.second > best_count) {
            best_bucket = kv.first;
            best_count = kv.second;
        }
    // Circular mean of the winning bucket's full-resolution phases.
    Complex phasor(0.0, 0.0);
    for (long k : ks)
        if ((k >> shift) == best_bucket)
            phasor += std::polar(1.0, kTwoPi * static_cast<double>(k) / static_cast<double>(size));
    return wrap_2pi(std::arg(phasor));
}

EigenphaseFn qpe_eigenphase_fn(const LoopHamiltonian& model, const QpeConfig& cfg,
                               std::uint64_t seed, CostLedger* ledger,
                               const PropagateOptions& opts,
                               std::shared_ptr<SpectrumCache> cache) {
    if (!cache) cache = std::make_shared<SpectrumCache>();
    auto calls = std::make_shared<std::uint64_t>(0);
    const Vec psi0 = [&model] {
        Eigen::SelfAdjointEigenSolver<Mat> es(model.evaluate(0.0));
        return Vec(es.eigenvectors().col(0));
    }();
    return [&model, cfg, seed, ledger, opts, cache, calls, psi0](double runtime, Direction dir) {
        const auto key = std::make_pair(runtime, static_cast<int>(dir));
        auto it = cache->entries.find(key);
        if (it == cache->entries.end()) {
            const Mat u = final_unitary(model, runtime, dir, opts);
            it = cache->entries.emplace(key, unitary_spectrum(u, psi0)).first;
        }
        if (ledger) {
            const double powers = static_cast<double>((1L << cfg.m_bits) - 1);
            ledger->total_evolved_time += cfg.reps * powers * runtime;
            ledger->evolutions += cfg.reps;
        }
        Rng rng = substream(seed, (*calls)++);
        return qpe_sample(it->second, cfg, rng);
    };
}

double hadamard_sample(Complex overlap, HadamardBasis basis, long shots, Rng& rng) {
    if (std::abs(overlap) > 1.0 + 1e-10)
        throw ConfigError("hadamard_sample: |overlap| exceeds 1");
    if (shots < 1) throw ConfigError("hadamard_sample: shots >= 1");
    const double part = basis == HadamardBasis::Real ? overlap.real() : overlap.imag();
    const double p = 0.5 * (1.0 + std::clamp(part, -1.0, 1.0));
    long zeros = 0;
    for (long i = 0; i < shots; ++i) zeros += rng.bernoulli(p) ? 1 : 0;
    return static_cast<double>(zeros) / static_cast<double>(shots);
}

EigenphaseFn hadamard_eigenphase_fn(const LoopHamiltonian& model, long shots_per_basis,
                                    std::uint64_t seed, CostLedger* ledger,
                                    const PropagateOptions& opts) {
    auto calls = std::make_shared<std::uint64_t>(0);
    return [&model, shots_per_basis, seed, ledger, opts, calls](double runtime, Direction dir) {
        const Complex g = final_overlap(model, runtime, dir, opts);
        Rng rng = substream(seed, (*calls)++);
        const double fr = hadamard_sample(g, HadamardBasis::Real, shots_per_basis, rng);
        const double fi = hadamard_sample(g, HadamardBasis::Imag, shots_per_basis, rng);
        if (ledger) {
            ledger->total_evolved_time += 2.0 * shots_per_basis * runtime;
            ledger->evolutions += 2 * shots_per_basis;
        }
        return wrap_2pi(std::arg(Complex(2.0 * fr - 1.0, 2.0 * fi - 1.0)));
    };
}

namespace {

// One-shot +-1 estimate of Re/Im of the overlap.
double one_shot(Complex overlap, HadamardBasis basis, Rng& rng) {
    const double part = basis == HadamardBasis::Real ? overlap.real() : overlap.imag();
    const double p = 0.5 * (1.0 + std::clamp(part, -1.0, 1.0));
    return rng.bernoulli(p) ? 1.0 : -1.0;
}

} // namespace

HadamardResult hadamard_pipeline(const LoopHamiltonian& model, const SpectralFrame& frame,
                                 const HadamardPipelineConfig& cfg) {
    HadamardResult r;
    r.theta_oracle = berry_phase_oracle(frame, 0);

    const double hdot0 = herm_norm(model.derivative(0.0));
    const double hdot1 = herm_norm(model.derivative(1.0));
    const double scale =
        hdot0 * hdot1 / (std::pow(frame.gap0, 4) * std::max(frame.gap_min, 1e-12));
    r.runtime = cfg.runtime > 0.0 ? cfg.runtime
                                  : cfg.t_constant * std::cbrt(scale / cfg.eps_b);
    r.n_samples = cfg.n_samples > 0
                      ? cfg.n_samples
                      : static_cast<long>(std::ceil(cfg.shot_constant / (cfg.eps_b * cfg.eps_b)));

    CostLedger ledger;

    // Step 1: coarse branch resolution from Hadamard-sampled eigenphases.
    const EigenphaseFn coarse_fn =
        hadamard_eigenphase_fn(model, cfg.coarse_shots, cfg.seed ^ 0xC0A5E5ULL, &ledger, cfg.prop);
    const BranchResult branch = branch_resolve(model, frame, coarse_fn, cfg.branch);
    r.coarse = branch.coarse;

    // Step 2: uniform runtime randomization.
    const RuntimeDistribution dist = RuntimeDistribution::uniform(cfg.lambda);
    const std::vector<double> t_j = sample_runtimes(dist, r.runtime, r.n_samples, cfg.seed);

    std::unique_ptr<CsvWriter> shot_log;
    if (cfg.shot_csv)
        shot_log = std::make_unique<CsvWriter>(*cfg.shot_csv, "hadamard one-shot outcomes",
                                               std::vector<std::string>{"j", "tag", "basis",
                                                                        "t", "outcome"});

    // Steps 3-4: one-shot interference samples at T_j and alpha T_j,
    // aggregated as phasors; forward x reverse cancels theta_D per sample.
    Complex acc_t(0.0, 0.0), acc_at(0.0, 0.0);
    const Complex overlap_center = final_overlap(model, r.runtime, Direction::Forward, cfg.prop);
    r.p_leak_center = std::max(0.0, 1.0 - std::norm(overlap_center));
    for (long j = 0; j < r.n_samples; ++j) {
        Rng rng = substream(cfg.seed ^ 0x5AD0ULL, static_cast<std::uint64_t>(j));
        const double tj = t_j[static_cast<std::size_t>(j)];
        for (int stage = 0; stage < 2; ++stage) {
            const double t = stage == 0 ? tj : cfg.alpha * tj;
            const Complex gf = final_overlap(model, t, Direction::Forward, cfg.prop);
            const Complex gr = final_overlap(model, t, Direction::Reverse, cfg.prop);
            Complex est_f, est_r;
            if (cfg.exact_overlaps) {
                est_f = gf;
                est_r = gr;
                ledger.total_evolved_time += 2.0 * t;
                ledger.evolutions += 2;
            } else {
                const double xfr = one_shot(gf, HadamardBasis::Real, rng);
                const double xfi = one_shot(gf, HadamardBasis::Imag, rng);
                const double xrr = one_shot(gr, HadamardBasis::Real, rng);
                const double xri = one_shot(gr, HadamardBasis::Imag, rng);
                est_f = Complex(xfr, xfi);
                est_r = Complex(xrr, xri);
                ledger.total_evolved_time += 4.0 * t;
                ledger.evolutions += 4;
                if (shot_log) {
                    const std::string tag = stage == 0 ? "T" : "alphaT";
                    const ShotRecord recs[4] = {
                        {tag, HadamardBasis::Real, t, xfr > 0 ? 0 : 1, j},
                        {tag, HadamardBasis::Imag, t, xfi > 0 ? 0 : 1, j},
                        {tag + "-rev", HadamardBasis::Real, t, xrr > 0 ? 0 : 1, j},
                        {tag + "-rev", HadamardBasis::Imag, t, xri > 0 ? 0 : 1, j},
                    };
                    for (const ShotRecord& r : recs)
                        shot_log->row({std::to_string(r.index), r.tag,
                                       r.basis == HadamardBasis::Real ? "real" : "imag",
                                       fmt_double(r.runtime), std::to_string(r.outcome)});
                }
            }
            const Complex interference = est_f * est_r; // phase 2 theta_B + phi + phi_hat
            (stage == 0 ? acc_t : acc_at) += interference;
        }
    }
    r.signal_t = acc_t / static_cast<double>(r.n_samples);
    r.signal_alpha_t = acc_at / static_cast<double>(r.n_samples);

    // Step 4 continued: mod-pi reconstruction and lifting.
    const double mod_pi_t = wrap_pi(0.5 * wrap_2pi(std::arg(r.signal_t)));
    const double mod_pi_at = wrap_pi(0.5 * wrap_2pi(std::arg(r.signal_alpha_t)));
    std::vector<LiftedEstimate> lifted(2);
    lifted[0].coarse = lifted[1].coarse = branch.coarse;
    lifted[0].value = lift(mod_pi_t, branch.coarse);
    lifted[1].value = lift(mod_pi_at, branch.coarse);

    // Step 5: Richardson extrapolation and final output.
    const RichardsonScheme scheme = RichardsonScheme::make(cfg.alpha, 1);
    r.theta_hat = wrap_2pi(richardson(scheme, lifted));
    if (circ_dist(r.theta_hat, branch.coarse) > kPi / 2.0)
        throw NumericalError("hadamard pipeline: final estimate left the lift interval");
    r.abs_err = circ_dist(r.theta_hat, r.theta_oracle);
    r.cost_total_t = ledger.total_evolved_time;
    return r;
}

std::string hadamard_result_json(const HadamardResult& r) {
    nlohmann::ordered_json j;
    j["theta_hat"] = r.theta_hat;
    j["theta_oracle"] = r.theta_oracle;
    j["abs_err"] = r.abs_err;
    j["T"] = r.runtime;
    j["N"] = r.n_samples;
    j["coarse"] = r.coarse;
    j["p_leak_center"] = r.p_leak_center;
    j["cost_total_T"] = r.cost_total_t;
    return j.dump(2);
}

} // namespace berry
