// tpca: command-line front end.
//
//   tpca generate    build an instance and write a snapshot
//   tpca run         one algorithm on one instance
//   tpca sweep       Monte Carlo sweep from a JSON config
//   tpca analyze     threshold fit, R fit, scatter export
//   tpca complexity  landscape formulas and reference constants
//
// Exit codes: 0 success, 2 configuration or argument error, 3 resource
// refusal, 1 anything else.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tpca/analytics.hpp"
#include "tpca/harness.hpp"
#include "tpca/optimizers.hpp"
#include "tpca/problem.hpp"

using json = nlohmann::json;
using namespace tpca;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitResource = 3;

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    return in;
}

void emit(const json& doc, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << doc.dump(2) << "\n";
    } else {
        open_out(path) << doc.dump(2) << "\n";
    }
}

// Instance options shared by generate and run.
struct InstanceArgs {
    int k = 3;
    std::size_t n = 100;
    double snr = 1.0;
    std::uint64_t seed = 1;
    std::string precision = "float64";
    std::string convention = "symmetrized";
    double noise_scale = 1.0;
    double memory_budget_mb = 0.0;

    void add_to(CLI::App* app) {
        app->add_option("-k,--order", k, "tensor order")->check(CLI::Range(2, kMaxOrder));
        app->add_option("-n,--dim", n, "dimension");
        app->add_option("--snr,--lambda", snr, "signal-to-noise ratio");
        app->add_option("--seed", seed, "instance seed");
        app->add_option("--precision", precision, "float64 or float32");
        app->add_option("--noise-convention", convention, "symmetrized or uniform");
        app->add_option("--noise-scale", noise_scale, "noise multiplier (0 for the pure signal)");
        app->add_option("--memory-budget-mb", memory_budget_mb, "refuse instances larger than this (0 = no limit)");
    }

    std::uint64_t budget_bytes() const { return static_cast<std::uint64_t>(memory_budget_mb * 1024.0 * 1024.0); }

    SpikedTensorProblem build() const {
        GenerateOptions opt;
        opt.precision = parse_precision(precision);
        opt.convention = parse_noise_convention(convention);
        opt.noise_scale = noise_scale;
        opt.memory_budget_bytes = budget_bytes();
        return generate(k, n, snr, seed, opt);
    }
};

json describe(const SpikedTensorProblem& p) {
    return {{"k", p.order()},
            {"n", p.dim()},
            {"snr", p.snr()},
            {"seed", p.seed()},
            {"precision", to_string(p.precision())},
            {"noise_convention", to_string(p.convention())},
            {"noise_scale", p.noise_scale()},
            {"packed_entries", p.packed_size()},
            {"bytes", required_bytes(p.order(), p.dim(), p.precision())}};
}

json flags_json(std::uint32_t flags) {
    json out = json::array();
    if (flags & kFlagMaxIters) out.push_back("max_iters");
    if (flags & kFlagStationary) out.push_back("stationary");
    if (flags & kFlagTwoCycle) out.push_back("two_cycle");
    if (flags & kFlagSpectralNotConverged) out.push_back("spectral_not_converged");
    if (flags & kFlagRegime1Stalled) out.push_back("regime1_stalled");
    return out;
}

void write_trajectory(const RunResult& r, const std::string& path) {
    auto out = open_out(path);
    out << "t,r,m,energy_per_site\n";
    out.precision(17);
    for (const auto& p : r.trajectory) out << p.t << "," << p.r << "," << p.m << "," << p.energy_per_site << "\n";
}

json lambda_c_json(const LambdaCEstimate& e) {
    json crossings = json::array();
    for (const auto& c : e.crossings) crossings.push_back({{"n", c.n}, {"lambda", optional_json(c.lambda)}});
    return {{"prefactor", e.prefactor},
            {"ci_low", e.ci_low},
            {"ci_high", e.ci_high},
            {"crossings", crossings},
            {"exponent", optional_json(e.exponent)},
            {"exponent_defined", e.exponent_defined}};
}

json r_fit_json(const RFit& f) {
    return {{"p_inf", f.p_inf},           {"amplitude", f.amplitude},       {"rate", f.rate},
            {"se_p_inf", f.se_p_inf},     {"se_amplitude", f.se_amplitude}, {"se_rate", f.se_rate},
            {"chi2", f.chi2},             {"dof", f.dof},                   {"residuals", f.residuals},
            {"flagged", f.flagged},       {"reference", optional_json(f.reference)}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spiked tensor recovery experiments"};
    app.require_subcommand(1);

    // generate ---------------------------------------------------------------
    auto* gen = app.add_subcommand("generate", "build an instance and write a snapshot");
    InstanceArgs gen_args;
    gen_args.add_to(gen);
    std::string gen_out;
    gen->add_option("-o,--output", gen_out, "snapshot path")->required();

    // run --------------------------------------------------------------------
    auto* run_cmd = app.add_subcommand("run", "run one algorithm on one instance");
    InstanceArgs run_args;
    run_args.add_to(run_cmd);
    std::string run_snapshot;
    std::string run_algorithm = "iAGD";
    RunConfig run_cfg;
    double run_stop_eps = 1e-8;
    std::string run_trajectory;
    std::string run_out;
    run_cmd->add_option("--snapshot", run_snapshot, "load the instance from a snapshot instead");
    run_cmd->add_option("-a,--algorithm", run_algorithm, "GD, AGD, AGD-auto, iAGD, SiAGD, PowerMethod");
    run_cmd->add_option("-R,--replicas", run_cfg.replicas, "replicas for AGD");
    run_cmd->add_option("--learning-rate", run_cfg.learning_rate, "GD and AGD step");
    run_cmd->add_option("--euler-step", run_cfg.euler_step, "iAGD step");
    run_cmd->add_option("--stop-eps", run_stop_eps, "stop when |x(t+1) - x(t)| < stop_eps * sqrt(n)");
    run_cmd->add_option("--max-iters", run_cfg.max_iters, "iteration cap per regime");
    run_cmd->add_option("--rng-seed", run_cfg.rng_seed, "seed for starts and replicas");
    run_cmd->add_option("--detection-threshold", run_cfg.detection_threshold, "final overlap counted as detection");
    run_cmd->add_option("--trajectory", run_trajectory, "write (t, r, m, H/n) CSV here");
    run_cmd->add_option("--trajectory-stride", run_cfg.trajectory_stride, "record every this many iterations");
    run_cmd->add_option("-o,--output", run_out, "result JSON path (default stdout)");

    // sweep ------------------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep from a JSON config");
    std::string sweep_config;
    std::string sweep_out;
    std::string sweep_meta;
    std::string sweep_samples;
    std::string sweep_scatter;
    std::string sweep_traj;
    unsigned sweep_workers = 0;
    bool sweep_quiet = false;
    sweep->add_option("config", sweep_config, "sweep config (JSON)")->required();
    sweep->add_option("-o,--output", sweep_out, "aggregated table CSV")->required();
    sweep->add_option("--metadata", sweep_meta, "metadata sidecar (default <output>.json)");
    sweep->add_option("--samples", sweep_samples, "per-sample CSV");
    sweep->add_option("--scatter", sweep_scatter, "(lambda m_I, m_II) CSV");
    sweep->add_option("--trajectories", sweep_traj, "trajectory CSV (needs \"trajectories\": true)");
    sweep->add_option("--workers", sweep_workers, "override the worker count");
    sweep->add_flag("-q,--quiet", sweep_quiet, "no progress on stderr");

    // analyze ----------------------------------------------------------------
    auto* analyze = app.add_subcommand("analyze", "fits on sweep output");
    analyze->require_subcommand(1);

    auto* lc = analyze->add_subcommand("lambda-c", "50% detection threshold fit");
    std::string lc_table;
    std::string lc_algorithm;
    std::optional<std::uint32_t> lc_replicas;
    LambdaCOptions lc_opt;
    std::string lc_collapse;
    std::string lc_out;
    lc->add_option("table", lc_table, "table CSV")->required();
    lc->add_option("-k,--order", lc_opt.k, "tensor order");
    lc->add_option("-a,--algorithm", lc_algorithm, "restrict to one algorithm");
    lc->add_option("-R,--replicas", lc_replicas, "restrict to one replica count (0 = inf)");
    lc->add_option("--bootstrap", lc_opt.bootstrap, "bootstrap resamples");
    lc->add_option("--confidence", lc_opt.confidence, "interval level");
    lc->add_option("--seed", lc_opt.seed, "bootstrap seed");
    lc->add_option("--collapse", lc_collapse, "write collapse points CSV here");
    lc->add_option("-o,--output", lc_out, "JSON path (default stdout)");

    auto* rf = analyze->add_subcommand("r-fit", "p(R) = p_inf - A exp(-R / c)");
    std::string rf_table;
    std::size_t rf_n = 0;
    double rf_lambda = 0.0;
    std::string rf_algorithm = "AGD";
    std::optional<double> rf_reference;
    std::string rf_out;
    rf->add_option("table", rf_table, "table CSV")->required();
    rf->add_option("-n,--dim", rf_n, "dimension")->required();
    rf->add_option("--lambda", rf_lambda, "lambda of the series")->required();
    rf->add_option("-a,--algorithm", rf_algorithm, "AGD or AGD-auto");
    rf->add_option("--reference", rf_reference, "infinite-R success probability to report alongside");
    rf->add_option("-o,--output", rf_out, "JSON path (default stdout)");

    auto* sc = analyze->add_subcommand("scatter", "(lambda m_I, m_II) from a samples CSV");
    std::string sc_samples;
    std::string sc_out;
    sc->add_option("samples", sc_samples, "samples CSV")->required();
    sc->add_option("-o,--output", sc_out, "scatter CSV")->required();

    // complexity -------------------------------------------------------------
    auto* cx = app.add_subcommand("complexity", "landscape formulas and reference constants");
    int cx_k = 3;
    double cx_min = 1.0;
    double cx_max = 3.0;
    int cx_points = 41;
    std::string cx_out;
    std::string cx_constants;
    std::optional<double> cx_n;
    double cx_snr = 1.0;
    double cx_m = 0.5;
    double cx_r = 1.0;
    cx->add_option("-k,--order", cx_k, "tensor order");
    cx->add_option("--theta-min", cx_min, "table start");
    cx->add_option("--theta-max", cx_max, "table end");
    cx->add_option("--points", cx_points, "table rows");
    cx->add_option("-o,--output", cx_out, "Sigma(theta) CSV (default stdout)");
    cx->add_option("--constants", cx_constants, "write constants and predictors JSON here");
    cx->add_option("-n,--dim", cx_n, "dimension for the report (enables it)");
    cx->add_option("--snr", cx_snr, "lambda for the report");
    cx->add_option("--m", cx_m, "overlap for the report");
    cx->add_option("-R,--replicas", cx_r, "replicas for the report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*gen) {
            const auto p = gen_args.build();
            save_snapshot(p, gen_out);
            json doc = describe(p);
            doc["snapshot"] = gen_out;
            emit(doc, "");
        } else if (*run_cmd) {
            const auto p = run_snapshot.empty() ? run_args.build()
                                                : load_snapshot(run_snapshot, run_args.budget_bytes());
            run_cfg.algorithm = parse_algorithm(run_algorithm);
            run_cfg.stop_eps = run_stop_eps * std::sqrt(static_cast<double>(p.dim()));
            if (!run_trajectory.empty() && run_cfg.trajectory_stride == 0) run_cfg.trajectory_stride = 1;
            const auto r = run(p, run_cfg);
            if (!run_trajectory.empty()) write_trajectory(r, run_trajectory);
            json doc = {{"instance", describe(p)},
                        {"algorithm", to_string(run_cfg.algorithm)},
                        {"replicas", run_cfg.replicas},
                        {"m_I", r.m_I},
                        {"m_II", r.m_II},
                        {"energy_I", r.energy_I},
                        {"energy_final", r.energy_final},
                        {"iters_regime1", r.iters_regime1},
                        {"iters_regime2", r.iters_regime2},
                        {"detected", r.detected},
                        {"flags", flags_json(r.flags)}};
            if (run_cfg.algorithm == Algorithm::AGDAuto) {
                doc["spectral_steps"] = r.spectral_steps;
                doc["min_spectral_alignment"] = r.min_spectral_alignment;
            }
            emit(doc, run_out);
        } else if (*sweep) {
            std::string raw;
            SweepSpec spec = load_sweep_config(sweep_config, &raw);
            if (sweep_workers > 0) spec.workers = sweep_workers;
            if (!sweep_traj.empty() && !spec.record_trajectories) {
                throw ConfigError("--trajectories needs \"trajectories\": true in the config");
            }
            const auto progress = [&](std::size_t done, std::size_t total) {
                if (!sweep_quiet) std::cerr << "\r" << done << "/" << total << " problems" << std::flush;
            };
            const auto result = run_sweep(spec, progress);
            if (!sweep_quiet) std::cerr << "\n";
            {
                auto out = open_out(sweep_out);
                write_table_csv(result.table, out);
            }
            open_out(sweep_meta.empty() ? sweep_out + ".json" : sweep_meta)
                << sweep_metadata_json(spec, raw, result.table);
            if (!sweep_samples.empty()) {
                auto out = open_out(sweep_samples);
                write_samples_csv(result.samples, out);
            }
            if (!sweep_scatter.empty()) {
                auto out = open_out(sweep_scatter);
                write_scatter_csv(result.samples, out);
            }
            if (!sweep_traj.empty()) {
                auto out = open_out(sweep_traj);
                write_trajectories_csv(result.samples, out);
            }
        } else if (*lc) {
            auto in = open_in(lc_table);
            const auto table = read_table_csv(in);
            if (!lc_algorithm.empty()) lc_opt.algorithm = parse_algorithm(lc_algorithm);
            lc_opt.replicas = lc_replicas;
            const auto est = estimate_lambda_c(table, lc_opt);
            if (!lc_collapse.empty()) {
                auto out = open_out(lc_collapse);
                out << "N,lambda,shifted_lambda,detection_probability,standard_error\n";
                out.precision(17);
                for (const auto& c : est.collapse) {
                    out << c.n << "," << c.lambda << "," << c.shifted_lambda << "," << c.probability << ","
                        << c.standard_error << "\n";
                }
            }
            emit(lambda_c_json(est), lc_out);
        } else if (*rf) {
            auto in = open_in(rf_table);
            const auto table = read_table_csv(in);
            const auto pts = r_series(table, rf_n, rf_lambda, parse_algorithm(rf_algorithm));
            json doc = r_fit_json(fit_success_vs_r(pts, rf_reference));
            json points = json::array();
            for (const auto& p : pts) {
                points.push_back({{"R", p.replicas}, {"probability", p.probability}, {"samples", p.samples}});
            }
            doc["points"] = points;
            emit(doc, rf_out);
        } else if (*sc) {
            auto in = open_in(sc_samples);
            const auto samples = read_samples_csv(in);
            auto out = open_out(sc_out);
            write_scatter_csv(samples, out);
        } else if (*cx) {
            const auto rows = complexity_table(cx_k, cx_min, cx_max, cx_points);
            std::ofstream file;
            std::ostream& out = cx_out.empty() || cx_out == "-" ? std::cout : (file = open_out(cx_out), file);
            out << "theta,sigma\n";
            out.precision(17);
            for (const auto& r : rows) {
                out << r.theta << ",";
                if (r.sigma) out << *r.sigma;
                out << "\n";
            }
            if (!cx_constants.empty() || cx_n) {
                json doc;
                doc["k"] = cx_k;
                doc["theta_star"] = theta_star(cx_k);
                doc["criterion_constant"] = criterion_constant(cx_k);
                json consts = json::array();
                for (const auto& c : reference_constants().entries()) {
                    consts.push_back({{"name", c.name}, {"value", c.value}, {"description", c.description}});
                }
                doc["reference_constants"] = consts;
                if (cx_n) {
                    const auto r = complexity_report(cx_k, *cx_n, cx_snr, cx_m, cx_r);
                    doc["report"] = {{"n", r.n},
                                     {"snr", r.snr},
                                     {"m", r.m},
                                     {"replicas", r.replicas},
                                     {"theta", r.theta},
                                     {"sigma", optional_json(r.sigma)},
                                     {"bbp_lambda", r.bbp_lambda},
                                     {"scaling",
                                      {{"lambda_gd", r.scaling.lambda_gd},
                                       {"lambda_sagd", r.scaling.lambda_sagd},
                                       {"lambda_sagd_best", r.scaling.lambda_sagd_best},
                                       {"r_opt", r.scaling.r_opt},
                                       {"up_to_constants", r.scaling.up_to_constants}}}};
                }
                emit(doc, cx_constants.empty() ? "-" : cx_constants);
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ResourceError& e) {
        std::cerr << "resource refusal: " << e.what() << "\n";
        return kExitResource;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
