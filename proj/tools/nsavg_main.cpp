#include "nsavg/config.hpp"
#include "nsavg/report_io.hpp"
#include "nsavg/snapshot.hpp"
#include "nsavg/studies.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using nlohmann::json;
using namespace nsavg;

std::atomic<bool> g_interrupted{false};

void handle_signal(int) { g_interrupted.store(true); }

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;  // dotted-path assignments
    std::vector<double> eps;
    int samples = -1;
    long long seed = -1;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "JSON experiment config")->required();
    cmd->add_option("--set", args.overrides, "dotted-path config override, e.g. mc.samples=8");
    cmd->add_option("--eps", args.eps, "override the epsilon list");
    cmd->add_option("--samples", args.samples, "override mc.samples");
    cmd->add_option("--seed", args.seed, "override mc.seed");
    cmd->add_option("--out", args.out_dir, "override output.dir");
}

struct LoadedConfig {
    ExperimentConfig cfg;
    std::string file_hash;  // hash of the raw config bytes
    json effective;         // config document after overrides
};

LoadedConfig load_effective(const CommonArgs& args) {
    std::ifstream in(args.config_path, std::ios::binary);
    if (!in) throw config_error("cannot open config file " + args.config_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string raw = ss.str();

    json doc;
    try {
        doc = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw config_error(std::string("config parse error in ") + args.config_path + ": " +
                           e.what());
    }
    if (!args.eps.empty()) doc["epsilons"] = args.eps;
    if (args.samples >= 0) doc["mc"]["samples"] = args.samples;
    if (args.seed >= 0) doc["mc"]["seed"] = args.seed;
    if (!args.out_dir.empty()) doc["output"]["dir"] = args.out_dir;
    for (const auto& ov : args.overrides) apply_override(doc, ov);

    LoadedConfig out{parse_config(doc.dump()), fnv1a_hex(raw), doc};
    return out;
}

std::string out_path(const ExperimentConfig& cfg, const std::string& suffix) {
    return (std::filesystem::path(cfg.out_dir) / (cfg.prefix + suffix)).string();
}

json base_meta(const LoadedConfig& lc, const std::string& command) {
    return json{{"command", command},
                {"code_version", kCodeVersion},
                {"config_hash", lc.cfg.config_hash},
                {"config_file_hash", lc.file_hash},
                {"seed", lc.cfg.seed},
                {"config", lc.effective}};
}

// Seeds appear verbatim in every output row (reproducibility contract).
std::string seed_column(const ExperimentConfig& cfg) { return std::to_string(cfg.seed); }

// ---------------------------------------------------------------------------
// converge

int cmd_converge(const CommonArgs& args) {
    const LoadedConfig lc = load_effective(args);
    const ConvergenceReport report = run_convergence_study(lc.cfg);

    std::vector<std::vector<std::string>> rows;
    for (const auto& r : report.rows) {
        rows.push_back({format_double(r.eps), format_double(r.delta), std::to_string(r.samples),
                        std::to_string(r.attrition), format_double(r.err), format_double(r.se),
                        format_double(r.err_p2), format_double(r.se_p2),
                        r.usable ? "1" : "0", seed_column(lc.cfg)});
    }
    const std::string csv = out_path(lc.cfg, "_convergence.csv");
    write_csv(csv,
              {"eps", "delta", "samples", "attrition", "err", "stderr", "err_p2", "stderr_p2",
               "usable", "seed"},
              rows);

    json meta = base_meta(lc, "converge");
    meta["coefficient_set"] = report.coefficient_set;
    if (report.slope) {
        meta["slope"] = report.slope->slope;
        meta["slope_residual"] = report.slope->residual;
    }
    if (report.slope_p2) meta["slope_p2"] = report.slope_p2->slope;
    bool decreasing = true;
    for (size_t i = 1; i < report.rows.size(); ++i) {
        const auto& a = report.rows[i - 1];
        const auto& b = report.rows[i];
        if (!(b.err < a.err - 2.0 * (a.se + b.se))) decreasing = false;
    }
    meta["strictly_decreasing_beyond_2se"] = decreasing;
    meta["slope_positive"] = report.slope ? report.slope->slope > 0 : false;
    const std::string meta_path = out_path(lc.cfg, "_convergence.json");
    write_json(meta_path, meta);

    std::cout << "wrote " << csv << " and " << meta_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    long checkpoint_every = 0;
    std::string resume_prefix;
};

int cmd_simulate(const CommonArgs& args, const SimulateArgs& sim) {
    const LoadedConfig lc = load_effective(args);
    const ExperimentConfig& cfg = lc.cfg;
    const RuntimeSetup setup(cfg);

    const double eps = cfg.epsilons.front();
    const double dt = dt_rule(eps, setup.params);
    const long steps = std::lround(cfg.horizon / dt);

    SpectralField X = setup.x0, Y = setup.y0;
    NoiseStream slow(cfg.seed, 0, StreamRole::Slow);
    NoiseStream fast(cfg.seed, 0, StreamRole::Fast);
    long start_step = 0;

    if (!sim.resume_prefix.empty()) {
        const std::string meta_path = sim.resume_prefix + "_ckpt.json";
        std::ifstream in(meta_path);
        if (!in) throw resume_mismatch_error("cannot open checkpoint " + meta_path);
        json ck;
        try {
            ck = json::parse(in);
        } catch (const json::parse_error& e) {
            throw resume_mismatch_error(std::string("corrupt checkpoint metadata: ") + e.what());
        }
        if (ck.value("config_hash", "") != cfg.config_hash) {
            throw resume_mismatch_error("checkpoint was produced by a different config (hash " +
                                        ck.value("config_hash", std::string("?")) + " vs " +
                                        cfg.config_hash + ")");
        }
        if (ck.value("modes_per_axis", 0) != cfg.modes_per_axis) {
            throw resume_mismatch_error("checkpoint grid size mismatch");
        }
        std::vector<SpectralField> fields;
        try {
            fields = read_snapshot(sim.resume_prefix + "_ckpt.nsef", setup.space);
        } catch (const std::exception& e) {
            throw resume_mismatch_error(e.what());
        }
        if (fields.size() != 2) throw resume_mismatch_error("checkpoint must hold X and Y");
        X = fields[0];
        Y = fields[1];
        start_step = ck.value("step", 0l);
        slow.set_counter(ck.value("slow_counter", 0ull));
        fast.set_counter(ck.value("fast_counter", 0ull));
    }

    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);

    const auto write_ckpt = [&](long step) {
        write_snapshot(out_path(cfg, "_ckpt.nsef"), {X, Y});
        json ck{{"version", 1},
                {"config_hash", cfg.config_hash},
                {"modes_per_axis", cfg.modes_per_axis},
                {"eps", eps},
                {"step", step},
                {"t", static_cast<double>(step) * dt},
                {"slow_counter", slow.counter()},
                {"fast_counter", fast.counter()}};
        write_json(out_path(cfg, "_ckpt.json"), ck);
    };

    std::vector<std::vector<std::string>> series;
    const auto record = [&](long step) {
        series.push_back({format_double(static_cast<double>(step) * dt), format_double(X.norm()),
                          format_double(sobolev_norm(X, 1.0)), format_double(Y.norm()),
                          seed_column(cfg)});
    };

    bool interrupted = false;
    for (long i = start_step; i < steps; ++i) {
        const double t = static_cast<double>(i) * dt;
        const SpectralField dW1 = sample_increment(setup.q1, dt, slow);
        const SpectralField dW2 = sample_increment(setup.q2, dt, fast);
        step_slow_fast_with_increments(X, Y, t, dt, eps, setup.coeffs, dW1, dW2, setup.params);
        if ((i + 1) % cfg.record_every == 0 || i + 1 == steps) record(i + 1);
        if (sim.checkpoint_every > 0 && (i + 1) % sim.checkpoint_every == 0) write_ckpt(i + 1);
        if (g_interrupted.load() && sim.checkpoint_every > 0) {
            write_ckpt(i + 1);
            interrupted = true;
            break;
        }
    }

    write_csv(out_path(cfg, "_series.csv"), {"t", "x_l2", "x_h1", "y_l2", "seed"}, series);
    write_snapshot(out_path(cfg, "_final.nsef"), {X, Y});
    json meta = base_meta(lc, "simulate");
    meta["eps"] = eps;
    meta["dt"] = dt;
    meta["steps"] = steps;
    meta["interrupted"] = interrupted;
    write_json(out_path(cfg, "_simulate.json"), meta);
    std::cout << "wrote " << out_path(cfg, "_final.nsef") << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// fbar

int cmd_fbar(const CommonArgs& args) {
    const LoadedConfig lc = load_effective(args);
    const RuntimeSetup setup(lc.cfg);
    FbarEstimator est = make_configured_estimator(lc.cfg, setup, 0);
    const SpectralField fbar = est.estimate(setup.x0, setup.coeffs, setup.q2, setup.params);
    write_snapshot(out_path(lc.cfg, "_fbar.nsef"), {fbar});
    json meta = base_meta(lc, "fbar");
    meta["mode"] = est.mode() == FbarEstimator::Mode::ClosedForm      ? "closed_form"
                   : est.mode() == FbarEstimator::Mode::TimeAverage   ? "time_average"
                                                                      : "warm_start";
    meta["fbar_l2"] = fbar.norm();
    write_json(out_path(lc.cfg, "_fbar.json"), meta);
    std::cout << "wrote " << out_path(lc.cfg, "_fbar.nsef") << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// ergodicity

int cmd_ergodicity(const CommonArgs& args) {
    const LoadedConfig lc = load_effective(args);
    const ErgodicityProbe probe = probe_ergodicity(lc.cfg);

    std::vector<std::vector<std::string>> rows;
    for (size_t i = 0; i < probe.times.size(); ++i) {
        rows.push_back({format_double(probe.times[i]), format_double(probe.gap[i]),
                        seed_column(lc.cfg)});
    }
    write_csv(out_path(lc.cfg, "_ergodicity.csv"), {"t", "gap", "seed"}, rows);
    json meta = base_meta(lc, "ergodicity");
    meta["rate"] = probe.rate;
    meta["prefactor"] = probe.prefactor;
    write_json(out_path(lc.cfg, "_ergodicity.json"), meta);
    std::cout << "fitted rate " << probe.rate << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// diag

std::vector<double> snapped_default_increments(const ExperimentConfig& cfg, double dt) {
    std::vector<double> out;
    for (int k = 4; k <= 8; ++k) {
        const double raw = cfg.horizon * std::pow(2.0, -k);
        const long m = std::max(1l, std::lround(raw / dt));
        const double snapped = static_cast<double>(m) * dt;
        if (out.empty() || std::abs(out.back() - snapped) > 1e-12) out.push_back(snapped);
    }
    return out;
}

int cmd_diag_increments(const CommonArgs& args, std::vector<double> deltas) {
    const LoadedConfig lc = load_effective(args);
    const RuntimeSetup setup(lc.cfg);
    const double dt = dt_rule(lc.cfg.epsilons.front(), setup.params);
    if (deltas.empty()) {
        deltas = lc.cfg.delta_rule == "explicit" ? lc.cfg.delta_values
                                                 : snapped_default_increments(lc.cfg, dt);
    }
    const SweepTable table = measure_time_increments(lc.cfg, deltas);

    std::vector<std::vector<std::string>> rows;
    for (const auto& r : table.rows) {
        rows.push_back({format_double(r.param), format_double(r.mean), format_double(r.se),
                        std::to_string(r.samples), std::to_string(r.attrition),
                        seed_column(lc.cfg)});
    }
    write_csv(out_path(lc.cfg, "_increments.csv"),
              {"delta", "mean", "stderr", "samples", "attrition", "seed"}, rows);
    json meta = base_meta(lc, "diag increments");
    if (table.slope) meta["slope"] = table.slope->slope;
    write_json(out_path(lc.cfg, "_increments.json"), meta);
    std::cout << "wrote " << out_path(lc.cfg, "_increments.csv") << "\n";
    return 0;
}

int cmd_diag_auxgap(const CommonArgs& args, std::vector<double> deltas) {
    const LoadedConfig lc = load_effective(args);
    const RuntimeSetup setup(lc.cfg);
    const double dt = dt_rule(lc.cfg.epsilons.front(), setup.params);
    if (deltas.empty()) {
        if (lc.cfg.delta_rule == "explicit") {
            deltas = lc.cfg.delta_values;
        } else {
            long m = std::lround(default_delta(lc.cfg.epsilons.front(), dt) / dt);
            m = std::max(4l, 4 * (m / 4));
            deltas = {static_cast<double>(m) * dt, static_cast<double>(m / 2) * dt,
                      static_cast<double>(m / 4) * dt};
        }
    }
    const SweepTable table = measure_auxiliary_gap(lc.cfg, deltas);

    std::vector<std::vector<std::string>> rows;
    for (const auto& r : table.rows) {
        rows.push_back({format_double(r.param), format_double(r.mean), format_double(r.se),
                        format_double(r.mean2), format_double(r.se2), std::to_string(r.samples),
                        std::to_string(r.attrition), seed_column(lc.cfg)});
    }
    write_csv(out_path(lc.cfg, "_auxgap.csv"),
              {"delta", "y_gap_mean", "y_gap_stderr", "x_gap_mean", "x_gap_stderr", "samples",
               "attrition", "seed"},
              rows);
    json meta = base_meta(lc, "diag auxgap");
    if (table.slope) meta["slope"] = table.slope->slope;
    write_json(out_path(lc.cfg, "_auxgap.json"), meta);
    std::cout << "wrote " << out_path(lc.cfg, "_auxgap.csv") << "\n";
    return 0;
}

int cmd_diag_moments(const CommonArgs& args) {
    const LoadedConfig lc = load_effective(args);
    std::vector<int> p_list;
    for (int p = 1; p <= lc.cfg.moment_p_max; ++p) p_list.push_back(p);
    const MomentTable table = measure_moment_bounds(lc.cfg, p_list);

    std::vector<std::vector<std::string>> rows;
    for (const auto& r : table.rows) {
        rows.push_back({format_double(r.eps), std::to_string(r.p), format_double(r.e_sup_x),
                        format_double(r.e_int_x), format_double(r.sup_e_y),
                        format_double(r.e_sup_xbar), format_double(r.e_sup_xhat),
                        format_double(r.sup_e_yhat), std::to_string(r.attrition),
                        seed_column(lc.cfg)});
    }
    write_csv(out_path(lc.cfg, "_moments.csv"),
              {"eps", "p", "e_sup_x", "e_int_x", "sup_e_y", "e_sup_xbar", "e_sup_xhat",
               "sup_e_yhat", "attrition", "seed"},
              rows);

    // Uniform-in-eps boundedness: max/min ratio <= 3 per (p, statistic).
    double worst_ratio = 0.0;
    json meta = base_meta(lc, "diag moments");
    for (int p : p_list) {
        std::vector<double> sup_x, sup_ey;
        for (const auto& r : table.rows) {
            if (r.p == p) {
                sup_x.push_back(r.e_sup_x);
                sup_ey.push_back(r.sup_e_y);
            }
        }
        const auto ratio = [](const std::vector<double>& v) {
            const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
            return *lo > 0 ? *hi / *lo : 0.0;
        };
        meta["ratio_sup_x_p" + std::to_string(p)] = ratio(sup_x);
        meta["ratio_sup_e_y_p" + std::to_string(p)] = ratio(sup_ey);
        worst_ratio = std::max({worst_ratio, ratio(sup_x), ratio(sup_ey)});
    }
    meta["worst_ratio"] = worst_ratio;
    write_json(out_path(lc.cfg, "_moments.json"), meta);
    if (worst_ratio > 3.0) {
        throw diagnostic_error("moment bounds grow across the eps sweep (worst ratio " +
                               std::to_string(worst_ratio) + " > 3)");
    }
    std::cout << "wrote " << out_path(lc.cfg, "_moments.csv") << "\n";
    return 0;
}

int cmd_diag_inequalities(const CommonArgs& args, bool fault_inject) {
    const LoadedConfig lc = load_effective(args);
    const InequalityReport report =
        verify_appendix_inequalities(lc.cfg, lc.cfg.inequality_samples, fault_inject);

    std::vector<std::vector<std::string>> rows;
    for (const auto& r : report.rungs) {
        rows.push_back({format_double(r.amplitude), format_double(r.coercivity_c),
                        format_double(r.monotonicity_c), seed_column(lc.cfg)});
    }
    write_csv(out_path(lc.cfg, "_inequalities.csv"),
              {"amplitude", "coercivity_c", "monotonicity_c", "seed"}, rows);
    json meta = base_meta(lc, "diag inequalities");
    meta["eps"] = report.eps;
    meta["c_eps"] = report.c_eps;
    meta["violations"] = report.violations;
    meta["fault_injected"] = fault_inject;
    write_json(out_path(lc.cfg, "_inequalities.json"), meta);
    if (report.violations > 0) {
        throw diagnostic_error("inequality check found " + std::to_string(report.violations) +
                               " violation(s)");
    }
    std::cout << "wrote " << out_path(lc.cfg, "_inequalities.csv") << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int dispatch(const std::string& name, const std::function<int()>& body,
             const CommonArgs& args) {
    RunManifest manifest;
    manifest.command = name;
    manifest.config_path = args.config_path;
    manifest.started_at = timestamp_utc();

    int status = 0;
    std::string out_dir, prefix = "run";
    try {
        const LoadedConfig lc = load_effective(args);
        manifest.config_hash = lc.file_hash;
        out_dir = lc.cfg.out_dir;
        prefix = lc.cfg.prefix;
    } catch (...) {
        // handled again below through body()
    }

    try {
        status = body();
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        status = 2;
    } catch (const admissibility_error& e) {
        std::cerr << "admissibility error: " << e.what() << "\n";
        status = 3;
    } catch (const resume_mismatch_error& e) {
        std::cerr << "resume error: " << e.what() << "\n";
        status = 4;
    } catch (const diagnostic_error& e) {
        std::cerr << "diagnostic failure: " << e.what() << "\n";
        status = 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        status = 1;
    }

    manifest.finished_at = timestamp_utc();
    manifest.exit_status = status;
    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        std::error_code ec;
        for (const auto& entry : fs::directory_iterator(
                 fs::path(out_dir), fs::directory_options::skip_permission_denied, ec)) {
            const std::string fn = entry.path().filename().string();
            if (fn.rfind(prefix + "_", 0) == 0 && fn.find("manifest") == std::string::npos &&
                fn.find(".tmp") == std::string::npos) {
                manifest.outputs.push_back(entry.path().string());
            }
        }
        std::sort(manifest.outputs.begin(), manifest.outputs.end());
        write_manifest((fs::path(out_dir) / (prefix + "_manifest.json")).string(), manifest);
    }
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"slow-fast stochastic 2D Navier-Stokes simulator and averaging harness"};
    app.require_subcommand(1);

    CommonArgs conv_args, sim_args_c, fbar_args, erg_args, inc_args, aux_args, mom_args,
        ineq_args;
    SimulateArgs sim_extra;
    std::vector<double> inc_deltas, aux_deltas;
    bool fault_inject = false;

    auto* converge = app.add_subcommand("converge", "strong-convergence study across epsilon");
    add_common(converge, conv_args);

    auto* simulate = app.add_subcommand("simulate", "single slow-fast path with checkpointing");
    add_common(simulate, sim_args_c);
    simulate->add_option("--checkpoint-every", sim_extra.checkpoint_every,
                         "write a checkpoint every k steps");
    simulate->add_option("--resume", sim_extra.resume_prefix,
                         "resume from <prefix>_ckpt.{nsef,json}");

    auto* fbar = app.add_subcommand("fbar", "evaluate the averaged drift at the initial state");
    add_common(fbar, fbar_args);

    auto* ergodicity = app.add_subcommand("ergodicity", "frozen-equation mixing-rate probe");
    add_common(ergodicity, erg_args);

    auto* diag = app.add_subcommand("diag", "measurable-lemma diagnostics");
    diag->require_subcommand(1);
    auto* increments = diag->add_subcommand("increments", "time-increment bound");
    add_common(increments, inc_args);
    increments->add_option("--delta", inc_deltas, "delta sweep values");
    auto* auxgap = diag->add_subcommand("auxgap", "auxiliary-process gaps");
    add_common(auxgap, aux_args);
    auxgap->add_option("--delta", aux_deltas, "delta sweep values");
    auto* moments = diag->add_subcommand("moments", "uniform moment bounds");
    add_common(moments, mom_args);
    auto* inequalities = diag->add_subcommand("inequalities", "coercivity and local monotonicity");
    add_common(inequalities, ineq_args);
    inequalities->add_flag("--fault-inject-b", fault_inject,
                           "use the deliberately corrupted nonlinearity (detector test fixture)");

    CLI11_PARSE(app, argc, argv);

    if (converge->parsed()) {
        return dispatch("converge", [&] { return cmd_converge(conv_args); }, conv_args);
    }
    if (simulate->parsed()) {
        return dispatch("simulate", [&] { return cmd_simulate(sim_args_c, sim_extra); },
                        sim_args_c);
    }
    if (fbar->parsed()) {
        return dispatch("fbar", [&] { return cmd_fbar(fbar_args); }, fbar_args);
    }
    if (ergodicity->parsed()) {
        return dispatch("ergodicity", [&] { return cmd_ergodicity(erg_args); }, erg_args);
    }
    if (diag->parsed()) {
        if (increments->parsed()) {
            return dispatch("diag increments",
                            [&] { return cmd_diag_increments(inc_args, inc_deltas); }, inc_args);
        }
        if (auxgap->parsed()) {
            return dispatch("diag auxgap", [&] { return cmd_diag_auxgap(aux_args, aux_deltas); },
                            aux_args);
        }
        if (moments->parsed()) {
            return dispatch("diag moments", [&] { return cmd_diag_moments(mom_args); }, mom_args);
        }
        if (inequalities->parsed()) {
            return dispatch("diag inequalities",
                            [&] { return cmd_diag_inequalities(ineq_args, fault_inject); },
                            ineq_args);
        }
    }
    return 1;
}
