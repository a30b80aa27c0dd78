// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

// arbor: batch driver for the tree-aware KV cache simulator.

#include "arbor/config_io.hpp"
#include "arbor/episode.hpp"
#include "arbor/oracles.hpp"
#include "arbor/report.hpp"
#include "arbor/trace_io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace arbor;

namespace {

enum ExitCode : int { kOk = 0, kConfig = 2, kInfeasible = 3, kInvariant = 4, kIo = 5 };

struct Flags {
    std::string config;
    std::string preset;
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
    std::string out_dir;
    std::string policy;
    std::vector<double> rho;
    // replay
    std::string trace;
    std::string truth;
    // verify
    std::string fault;
    int cases = 200;
};

RunConfig resolve_config(const Flags& f) {
    if (!f.config.empty() && !f.preset.empty()) throw ConfigError("arbor: --config and --preset are exclusive");
    RunConfig cfg = !f.config.empty() ? load_config(f.config) : preset(f.preset.empty() ? "config-s" : f.preset);
    if (f.seed) cfg.workload.seed = *f.seed;
    if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
    if (!f.policy.empty()) {
        cfg.policy = f.policy;
        cfg.policies = {f.policy};
    }
    if (!f.rho.empty()) cfg.rhos = f.rho;
    // Round-trip through the validator so flag overrides are checked too.
    cfg = parse_config(serialize_config(cfg));
    if (f.deterministic) cfg.cost.instrumented = false;
    return cfg;
}

ControllerOptions controller_options(const RunConfig& cfg) {
    ControllerOptions o;
    o.sink_count = cfg.workload.sink_count;
    o.cost = cfg.cost;
    return o;
}

// Buffers a file and writes it in one go, so a failed run leaves nothing behind.
struct Output {
    std::string name;
    std::ostringstream body;
};

void commit(const fs::path& dir, std::vector<Output>& files) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("arbor: cannot create " + dir.string() + ": " + ec.message());
    for (auto& f : files) {
        const auto path = dir / f.name;
        std::ofstream out(path, std::ios::binary);
        out << f.body.str();
        if (!out) throw IoError("arbor: cannot write " + path.string());
    }
}

ReportOptions report_options(const Flags& f, const RunConfig& cfg) {
    return {f.deterministic, cfg.workload.seed};
}

int cmd_simulate(const Flags& flags) {
    const auto cfg = resolve_config(flags);
    SweepOptions so;
    so.episodes = cfg.episodes;
    so.threads = cfg.threads;
    so.controller = controller_options(cfg);
    so.controller.record_series = true;
    so.controller.record_audit = true;
    so.keep_episodes = true;
    const auto res = sweep({cfg.policy}, cfg.rhos, cfg.workload, cfg.params, so);

    std::vector<Output> files;
    std::vector<EpisodeRow> rows;
    bool any_oom = false;
    for (const auto& cell : res.cells) {
        for (std::size_t e = 0; e < cell.episodes.size(); ++e) {
            const auto& m = cell.episodes[e].metrics;
            rows.push_back({cell.policy, cell.rho, cfg.workload.seed + e, m});
            any_oom = any_oom || m.oom;
        }
    }
    write_episode_csv(files.emplace_back(Output{"episodes.csv", {}}).body, rows, report_options(flags, cfg));
    write_sweep_csv(files.emplace_back(Output{"summary.csv", {}}).body, res.rows, report_options(flags, cfg));

    // Trace, audit log and memory series of the first episode at the first ρ.
    const auto wl = generate_workload(cfg.workload);
    write_trace(files.emplace_back(Output{"trace.jsonl", {}}).body, wl.trace);
    files.emplace_back(Output{"trace.jsonl.gt.json", {}}).body << ground_truth_to_json(wl.truth) << '\n';
    const auto& first = res.cells.front().episodes.front();
    write_audit(files.emplace_back(Output{"audit.jsonl", {}}).body, first.audit);
    write_series(files.emplace_back(Output{"series.csv", {}}).body, first.series);
    files.emplace_back(Output{"config.json", {}}).body << serialize_config(cfg);
    commit(cfg.out_dir, files);

    for (const auto& r : res.rows) {
        std::cout << r.policy << " rho=" << r.rho << " success=" << r.success_rate
                  << " peak_ratio=" << r.mean_peak_ratio << " rehydrations=" << r.mean_rehydrations
                  << " oom=" << r.oom_rate << '\n';
    }
    if (any_oom) {
        const auto& m = rows.front().metrics;
        std::cerr << "arbor: budget infeasible for policy " << cfg.policy;
        if (m.oom) std::cerr << " (needs at least " << m.oom_minimal_budget << " tokens, have " << m.budget << ")";
        std::cerr << '\n';
        return kInfeasible;
    }
    return kOk;
}

int cmd_sweep(const Flags& flags) {
    const auto cfg = resolve_config(flags);
    SweepOptions so;
    so.episodes = cfg.episodes;
    so.threads = cfg.threads;
    so.controller = controller_options(cfg);
    so.keep_episodes = true;
    const auto res = sweep(cfg.policies, cfg.rhos, cfg.workload, cfg.params, so);

    std::vector<Output> files;
    std::vector<EpisodeRow> rows;
    for (const auto& cell : res.cells) {
        for (std::size_t e = 0; e < cell.episodes.size(); ++e) {
            rows.push_back({cell.policy, cell.rho, cfg.workload.seed + e, cell.episodes[e].metrics});
        }
    }
    write_sweep_csv(files.emplace_back(Output{"summary.csv", {}}).body, res.rows, report_options(flags, cfg));
    write_episode_csv(files.emplace_back(Output{"episodes.csv", {}}).body, rows, report_options(flags, cfg));
    files.emplace_back(Output{"config.json", {}}).body << serialize_config(cfg);
    commit(cfg.out_dir, files);

    write_sweep_csv(std::cout, res.rows, {true, cfg.workload.seed});
    return kOk;
}

int cmd_calibrate(const Flags& flags) {
    const auto cfg = resolve_config(flags);
    const auto& cal = cfg.calibration;
    const auto examples = collect_calibration_examples(cfg.workload, cal.episodes, cfg.params);
    if (examples.empty()) throw ConfigError("arbor: calibration produced no examples");
    const auto fit = calibrate(examples, cal.options);
    for (int i = 0; i < 4; ++i) {
        if (!std::isfinite(fit.weights.theta(i))) throw InvariantViolation("arbor: calibration diverged");
    }

    double rho_s = 0.0;
    if (cal.holdout_episodes > 0) {
        auto held = cfg.workload;
        held.seed = cal.holdout_seed;
        const auto scored = score_blocks(held, cal.holdout_episodes, fit.weights, cfg.params);
        rho_s = scored.score.size() >= 2 ? spearman(scored.score, scored.utility) : 0.0;
    }

    std::vector<Output> files;
    files.emplace_back(Output{"theta.json", {}}).body << weights_to_json(fit.weights, rho_s);
    auto& csv = files.emplace_back(Output{"calibration_examples.csv", {}}).body;
    csv << "v,u,a,target\n";
    for (const auto& ex : examples) {
        csv << ex.features(0) << ',' << ex.features(1) << ',' << ex.features(2) << ',' << ex.target << '\n';
    }
    commit(cfg.out_dir, files);

    std::cout << "theta = [" << fit.weights.theta(0) << ", " << fit.weights.theta(1) << ", "
              << fit.weights.theta(2) << ", " << fit.weights.theta(3) << "]\n"
              << "examples = " << examples.size() << ", loss " << fit.loss_history.front() << " -> "
              << fit.loss_history.back() << "\n"
              << "held-out spearman = " << rho_s << '\n';
    return kOk;
}

int cmd_verify(const Flags& flags) {
    std::optional<std::string> fault;
    if (!flags.fault.empty()) fault = flags.fault;
    const auto results = run_verify_suites(flags.seed.value_or(0), flags.cases, fault);
    int failed = 0;
    for (const auto& r : results) {
        std::cout << (r.passed() ? "[PASS] " : "[FAIL] ") << r.name << "  " << (r.cases - r.failures) << "/"
                  << r.cases << '\n';
        if (!r.passed()) {
            std::cout << "       first failure: " << r.first_failure << '\n';
            ++failed;
        }
    }
    return failed;
}

int cmd_replay(const Flags& flags) {
    auto f = flags;
    const auto cfg = resolve_config(f);
    const std::string trace_path = !flags.trace.empty() ? flags.trace : cfg.trace;
    if (trace_path.empty()) throw ConfigError("arbor: replay needs --trace or a 'trace' config key");
    const auto trace = read_trace_file(trace_path);

    GroundTruth gt;
    const std::string truth_path = !flags.truth.empty() ? flags.truth : trace_path + ".gt.json";
    if (std::ifstream in(truth_path); in) {
        std::stringstream ss;
        ss << in.rdbuf();
        gt = ground_truth_from_json(ss.str());
    } else if (!flags.truth.empty()) {
        throw IoError("arbor: cannot open ground truth " + truth_path);
    }

    auto options = controller_options(cfg);
    options.record_series = true;
    options.record_audit = true;
    std::vector<EpisodeRow> rows;
    std::vector<Output> files;
    bool oom = false;
    const auto peak = full_kv_peak(trace);
    for (std::size_t i = 0; i < cfg.rhos.size(); ++i) {
        auto params = cfg.params;
        // An empty trace has no peak to scale; nothing to constrain either.
        if (peak == 0) params.budget = kUnlimitedBudget;
        else params.budget = cfg.rhos[i] >= 1.0 ? peak : budget_for_ratio(cfg.rhos[i], peak);
        const auto r = run_episode(cfg.policy, trace, gt, params, options);
        rows.push_back({cfg.policy, cfg.rhos[i], cfg.workload.seed, r.metrics});
        oom = oom || r.metrics.oom;
        if (i == 0) {
            write_audit(files.emplace_back(Output{"audit.jsonl", {}}).body, r.audit);
            write_series(files.emplace_back(Output{"series.csv", {}}).body, r.series);
        }
    }
    write_episode_csv(files.emplace_back(Output{"episodes.csv", {}}).body, rows, report_options(flags, cfg));
    commit(cfg.out_dir, files);
    for (const auto& r : rows) {
        std::cout << r.policy << " rho=" << r.rho << " tokens=" << r.metrics.tokens
                  << " peak=" << r.metrics.peak_retained_tokens << " rehydrations=" << r.metrics.rehydration_count
                  << " success=" << r.metrics.success << '\n';
    }
    return oom ? kInfeasible : kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"arbor: tree-aware KV cache simulator"};
    app.require_subcommand(1);
    app.fallthrough();
    Flags f;
    std::uint64_t seed = 0;
    app.add_option("--config", f.config, "JSON run configuration");
    app.add_option("--preset", f.preset, "Built-in configuration")->check(CLI::IsMember(preset_names()));
    auto* seed_opt = app.add_option("--seed", seed, "Workload seed");
    app.add_flag("--deterministic", f.deterministic, "Byte-stable reports (no timestamp, modeled policy time)");
    app.add_option("--out-dir", f.out_dir, "Output directory");
    app.add_option("--policy", f.policy, "Policy name")->check(CLI::IsMember(policy_names()));
    app.add_option("--rho", f.rho, "Budget ratio(s) relative to the full-retention peak")->delimiter(',');

    auto* simulate = app.add_subcommand("simulate", "Run one policy and write per-episode reports");
    auto* sweep_cmd = app.add_subcommand("sweep", "Policy x budget grid");
    auto* calibrate_cmd = app.add_subcommand("calibrate", "Fit MSVE weights on full-retention episodes");
    auto* verify = app.add_subcommand("verify", "Cross-check fast paths against slow oracles");
    verify->add_option("--fault", f.fault, "Corrupt one suite's result")->check(CLI::IsMember(verify_suite_names()));
    verify->add_option("--cases", f.cases, "Random instances per suite")->check(CLI::PositiveNumber);
    auto* replay = app.add_subcommand("replay", "Run the controller over a recorded JSONL trace");
    replay->add_option("--trace", f.trace, "Trace file");
    replay->add_option("--truth", f.truth, "Ground-truth sidecar (default <trace>.gt.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }
    if (*seed_opt) f.seed = seed;

    try {
        if (*simulate) return cmd_simulate(f);
        if (*sweep_cmd) return cmd_sweep(f);
        if (*calibrate_cmd) return cmd_calibrate(f);
        if (*verify) return cmd_verify(f);
        if (*replay) return cmd_replay(f);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kConfig;
    } catch (const ParseError& e) {
        std::cerr << e.what() << '\n';
        return kIo;
    } catch (const IoError& e) {
        std::cerr << e.what() << '\n';
        return kIo;
    } catch (const InfeasibleBudget& e) {
        std::cerr << e.what() << '\n';
        return kInfeasible;
    } catch (const InvariantViolation& e) {
        std::cerr << e.what() << '\n';
        return kInvariant;
    } catch (const std::exception& e) {
        // Any other library error is a broken internal contract.
        std::cerr << e.what() << '\n';
        return kInvariant;
    }
    return kOk;
}
