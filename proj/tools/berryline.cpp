// berryline: runtime sweeps, estimator pipelines and report generation for
// adiabatic Berry-phase estimation experiments.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "berry/apt.hpp"
#include "berry/errors.hpp"
#include "berry/harness.hpp"
#include "berry/measure.hpp"

namespace {

struct GlobalFlags {
    std::uint64_t seed = 0;
    bool seed_set = false;
    double tol_prop = -1.0;
    int grid = 0;
};

berry::SpectralFrame make_frame(const berry::LoopHamiltonian& model, const berry::Config& cfg,
                                const GlobalFlags& g) {
    int grid = g.grid > 0 ? g.grid : static_cast<int>(cfg.get_int("spectral.grid", 4096));
    return berry::decompose(model, grid);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw berry::ConfigError("cannot write " + path);
    out << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"adiabatic Berry-phase estimation workbench"};
    app.require_subcommand(1);

    GlobalFlags g;
    app.add_option("--seed", g.seed, "master seed override")->each([&g](const std::string&) {
        g.seed_set = true;
    });
    app.add_option("--tol-prop", g.tol_prop, "propagator tolerance override");
    app.add_option("--grid", g.grid, "spectral grid override");

    std::string cfg_path, outdir = "out", out_json, kind_str = "error-vs-T", shot_csv;
    double eps_b = 0.0;
    std::string mode = "";
    bool exact_overlaps = false;
    std::vector<std::string> compare_dirs;

    auto* sweep_cmd = app.add_subcommand("sweep", "run an estimator stack over a runtime grid");
    sweep_cmd->add_option("-c,--config", cfg_path, "config file")->required();
    sweep_cmd->add_option("-o,--out", outdir, "output directory");

    auto* est_cmd = app.add_subcommand("estimate", "full QPE-protocol Berry phase estimate");
    est_cmd->add_option("-c,--config", cfg_path, "config file")->required();
    est_cmd->add_option("-o,--out", out_json, "result JSON path (stdout by default)");
    est_cmd->add_option("--eps-b", eps_b, "target accuracy override");
    est_cmd->add_option("--mode", mode, "exact | qpe");

    auto* had_cmd = app.add_subcommand("hadamard-run", "randomized Hadamard-test pipeline");
    had_cmd->add_option("-c,--config", cfg_path, "config file")->required();
    had_cmd->add_option("-o,--out", out_json, "result JSON path (stdout by default)");
    had_cmd->add_option("--eps-b", eps_b, "target accuracy override");
    had_cmd->add_flag("--exact-overlaps", exact_overlaps, "bias mode without shot noise");
    had_cmd->add_option("--shot-csv", shot_csv, "stream one-shot outcomes to CSV");

    auto* cmp_cmd = app.add_subcommand("compare", "tabulate sweeps into a comparison report");
    cmp_cmd->add_option("dirs", compare_dirs, "sweep output directories")->required();
    cmp_cmd->add_option("-o,--out", outdir, "output directory");

    auto* plot_cmd = app.add_subcommand("plotdata", "emit tidy CSVs from a persisted sweep");
    plot_cmd->add_option("dir", cfg_path, "sweep output directory")->required();
    plot_cmd->add_option("--kind", kind_str, "error-vs-T | bias-vs-T | residual-spectrum");
    plot_cmd->add_option("-o,--out", out_json, "output CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep_cmd->parsed()) {
            const berry::Config cfg = berry::Config::parse_file(cfg_path);
            const berry::LoopHamiltonian model = berry::build_from_config(cfg);
            const berry::SpectralFrame frame = make_frame(model, cfg, g);
            berry::SweepOptions opts = berry::sweep_options_from_config(cfg);
            if (g.seed_set) opts.seed = g.seed;
            if (g.tol_prop > 0.0) opts.prop.tol = g.tol_prop;
            const berry::SweepResult res = berry::sweep(model, frame, opts);
            berry::save_sweep(res, outdir);
            std::cout << "sweep " << res.stack_tag << ": exponent " << res.fit.exponent
                      << (res.fit.reliable ? "" : " (unreliable)") << ", series in " << outdir
                      << "\n";
        } else if (est_cmd->parsed()) {
            const berry::Config cfg = berry::Config::parse_file(cfg_path);
            const berry::LoopHamiltonian model = berry::build_from_config(cfg);
            const berry::SpectralFrame frame = make_frame(model, cfg, g);
            berry::QpePipelineConfig qc;
            qc.eps_b = eps_b > 0.0 ? eps_b : cfg.get_num("estimate.eps_b", 1e-3);
            qc.alpha = cfg.get_num("estimate.alpha", 2.0);
            qc.order = static_cast<int>(cfg.get_int("estimate.m", 1));
            qc.t0_constant = cfg.get_num("estimate.t0_constant", 4.0);
            qc.seed = g.seed_set ? g.seed : static_cast<std::uint64_t>(cfg.get_int("estimate.seed", 1));
            if (g.tol_prop > 0.0) qc.prop.tol = g.tol_prop;
            const std::string m = mode.empty() ? cfg.get_str("estimate.mode", "exact") : mode;
            berry::QpeResult res;
            if (m == "exact") {
                qc.mode = berry::PhaseSource::ExactPropagator;
                res = berry::full_qpe_pipeline(model, frame, qc);
            } else if (m == "qpe") {
                qc.mode = berry::PhaseSource::QpeSampled;
                berry::QpeConfig mc;
                mc.m_bits = static_cast<int>(cfg.get_int("estimate.m_bits", 14));
                mc.reps = static_cast<int>(cfg.get_int("estimate.reps", 15));
                mc.vote_bits = static_cast<int>(cfg.get_int("estimate.vote_bits", 8));
                berry::CostLedger ledger;
                const berry::EigenphaseFn fn =
                    berry::qpe_eigenphase_fn(model, mc, qc.seed, &ledger, qc.prop);
                res = berry::full_qpe_pipeline(model, frame, qc, fn, &ledger);
            } else {
                throw berry::ConfigError("estimate mode must be exact or qpe");
            }
            const std::string json = berry::qpe_result_json(res);
            if (out_json.empty())
                std::cout << json << "\n";
            else
                write_text(out_json, json + "\n");
        } else if (had_cmd->parsed()) {
            const berry::Config cfg = berry::Config::parse_file(cfg_path);
            const berry::LoopHamiltonian model = berry::build_from_config(cfg);
            const berry::SpectralFrame frame = make_frame(model, cfg, g);
            berry::HadamardPipelineConfig hc;
            hc.eps_b = eps_b > 0.0 ? eps_b : cfg.get_num("hadamard.eps_b", 3e-2);
            hc.alpha = cfg.get_num("hadamard.alpha", 2.0);
            hc.lambda = cfg.get_num("hadamard.lambda", 0.2);
            hc.n_samples = cfg.get_int("hadamard.n", -1);
            hc.shot_constant = cfg.get_num("hadamard.shot_constant", 9.0);
            hc.t_constant = cfg.get_num("hadamard.t_constant", 2.0);
            hc.coarse_shots = cfg.get_int("hadamard.coarse_shots", 4096);
            hc.seed = g.seed_set ? g.seed : static_cast<std::uint64_t>(cfg.get_int("hadamard.seed", 1));
            hc.exact_overlaps = exact_overlaps || cfg.get_bool("hadamard.exact_overlaps", false);
            if (g.tol_prop > 0.0) hc.prop.tol = g.tol_prop;
            if (!shot_csv.empty()) hc.shot_csv = shot_csv;
            const berry::HadamardResult res = berry::hadamard_pipeline(model, frame, hc);
            const std::string json = berry::hadamard_result_json(res);
            if (out_json.empty())
                std::cout << json << "\n";
            else
                write_text(out_json, json + "\n");
        } else if (cmp_cmd->parsed()) {
            std::vector<berry::SweepResult> sweeps;
            for (const auto& d : compare_dirs) sweeps.push_back(berry::load_sweep(d));
            const berry::CompareReport rep = berry::compare_report(sweeps);
            std::filesystem::create_directories(outdir);
            write_text(outdir + "/compare.txt", rep.text);
            std::string csv;
            for (const auto& line : rep.csv_lines) csv += line + "\n";
            write_text(outdir + "/compare.csv", csv);
            std::cout << rep.text;
        } else if (plot_cmd->parsed()) {
            const berry::SweepResult res = berry::load_sweep(cfg_path);
            berry::emit_plotdata(res, berry::plot_kind_from_string(kind_str), out_json);
            std::cout << "wrote " << out_json << "\n";
        }
    } catch (const berry::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const berry::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
