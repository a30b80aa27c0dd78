// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/config_io.hpp"

#include "arbor/policies.hpp"
#include "arbor/trace_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace arbor {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object, rejecting anything not consumed.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError("arbor: config section '" + name_ + "' must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.emplace_back(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("arbor: bad value for '" + name_ + "." + key + "': " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.emplace_back(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) {
                throw ConfigError("arbor: unknown config key '" + name_ + "." + k + "'");
            }
        }
    }

private:
    const json& j_;
    std::string name_;
    std::vector<std::string> seen_;
};

json params_to_json(const PolicyParams& p) {
    json j;
    j["alpha"] = p.alpha;
    j["gamma"] = p.gamma;
    j["lambda_d"] = p.lambda_d;
    j["lambda_delta"] = p.lambda_delta;
    j["eta"] = p.eta;
    j["r_min"] = p.r_min;
    j["k_min"] = p.k_min;
    j["l_tail"] = p.l_tail;
    j["delta"] = p.delta;
    if (p.budget != kUnlimitedBudget) j["budget"] = p.budget;
    j["theta"] = std::vector<double>(p.theta.theta.begin(), p.theta.theta.end());
    j["feature_mean"] = std::vector<double>(p.theta.feature_mean.begin(), p.theta.feature_mean.end());
    j["allocation"] = std::string(to_string(p.allocation_mode));
    return j;
}

void params_from_json(const json& j, PolicyParams& p) {
    Section s(j, "params");
    s.get("alpha", p.alpha);
    s.get("gamma", p.gamma);
    s.get("lambda_d", p.lambda_d);
    s.get("lambda_delta", p.lambda_delta);
    s.get("eta", p.eta);
    s.get("r_min", p.r_min);
    s.get("k_min", p.k_min);
    s.get("l_tail", p.l_tail);
    s.get("delta", p.delta);
    s.get("budget", p.budget);
    std::vector<double> theta(p.theta.theta.begin(), p.theta.theta.end());
    std::vector<double> mean(p.theta.feature_mean.begin(), p.theta.feature_mean.end());
    s.get("theta", theta);
    s.get("feature_mean", mean);
    if (theta.size() != 4) throw ConfigError("arbor: params.theta must have 4 entries [bias, v, u, a]");
    if (mean.size() != 3) throw ConfigError("arbor: params.feature_mean must have 3 entries [v, u, a]");
    for (int i = 0; i < 4; ++i) p.theta.theta(i) = theta[static_cast<std::size_t>(i)];
    for (int i = 0; i < 3; ++i) p.theta.feature_mean(i) = mean[static_cast<std::size_t>(i)];
    std::string mode(to_string(p.allocation_mode));
    s.get("allocation", mode);
    try {
        p.allocation_mode = allocation_mode_from_string(mode);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    s.finish();
}

json workload_to_json(const WorkloadConfig& w) {
    json j;
    j["branching"] = w.branching;
    j["depth"] = w.depth;
    j["expand_count"] = w.expand_count;
    j["tokens_per_node"] = w.tokens_per_node;
    j["backtrack_prob"] = w.backtrack_prob;
    j["critical_fraction"] = w.critical_fraction;
    j["sink_bias"] = w.sink_bias;
    j["recency_decay"] = w.recency_decay;
    j["hh_count"] = w.hh_count;
    j["recent_window"] = w.recent_window;
    j["hh_boost"] = w.hh_boost;
    j["tau_mean"] = w.tau_mean;
    j["tau_jitter"] = w.tau_jitter;
    j["value_noise"] = w.value_noise;
    j["select_noise"] = w.select_noise;
    j["locality"] = w.locality;
    j["entropy_noise"] = w.entropy_noise;
    j["vocab_size"] = w.vocab_size;
    j["top_k"] = w.top_k;
    j["sink_count"] = w.sink_count;
    j["rows"] = w.rows;
    j["seed"] = w.seed;
    return j;
}

void workload_from_json(const json& j, WorkloadConfig& w) {
    Section s(j, "workload");
    s.get("branching", w.branching);
    s.get("depth", w.depth);
    s.get("expand_count", w.expand_count);
    s.get("tokens_per_node", w.tokens_per_node);
    s.get("backtrack_prob", w.backtrack_prob);
    s.get("critical_fraction", w.critical_fraction);
    s.get("sink_bias", w.sink_bias);
    s.get("recency_decay", w.recency_decay);
    s.get("hh_count", w.hh_count);
    s.get("recent_window", w.recent_window);
    s.get("hh_boost", w.hh_boost);
    s.get("tau_mean", w.tau_mean);
    s.get("tau_jitter", w.tau_jitter);
    s.get("value_noise", w.value_noise);
    s.get("select_noise", w.select_noise);
    s.get("locality", w.locality);
    s.get("entropy_noise", w.entropy_noise);
    s.get("vocab_size", w.vocab_size);
    s.get("top_k", w.top_k);
    s.get("sink_count", w.sink_count);
    s.get("rows", w.rows);
    s.get("seed", w.seed);
    s.finish();
}

} // namespace

std::string serialize_config(const RunConfig& cfg) {
    json j;
    j["policy"] = cfg.policy;
    j["policies"] = cfg.policies;
    j["rho"] = cfg.rhos;
    j["episodes"] = cfg.episodes;
    j["threads"] = cfg.threads;
    j["out_dir"] = cfg.out_dir;
    if (!cfg.trace.empty()) j["trace"] = cfg.trace;
    j["params"] = params_to_json(cfg.params);
    j["workload"] = workload_to_json(cfg.workload);
    j["cost"] = {{"decode_seconds_per_token", cfg.cost.decode_seconds_per_token},
                 {"prefill_ratio", cfg.cost.prefill_ratio},
                 {"policy_seconds_per_op", cfg.cost.policy_seconds_per_op},
                 {"instrumented", cfg.cost.instrumented}};
    const auto& c = cfg.calibration;
    j["calibration"] = {{"episodes", c.episodes},
                        {"holdout_seed", c.holdout_seed},
                        {"holdout_episodes", c.holdout_episodes},
                        {"epochs", c.options.epochs},
                        {"learning_rate", c.options.learning_rate},
                        {"seed", c.options.seed},
                        {"max_halvings", c.options.max_halvings}};
    return j.dump(2) + "\n";
}

RunConfig parse_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("arbor: config is not valid JSON: ") + e.what());
    }
    RunConfig cfg;
    Section s(j, "config");
    s.get("policy", cfg.policy);
    s.get("policies", cfg.policies);
    if (const auto* rho = s.child("rho")) {
        try {
            cfg.rhos = rho->is_array() ? rho->get<std::vector<double>>() : std::vector<double>{rho->get<double>()};
        } catch (const json::exception& e) {
            throw ConfigError(std::string("arbor: bad value for 'rho': ") + e.what());
        }
    }
    s.get("episodes", cfg.episodes);
    s.get("threads", cfg.threads);
    s.get("out_dir", cfg.out_dir);
    s.get("trace", cfg.trace);
    if (const auto* p = s.child("params")) params_from_json(*p, cfg.params);
    if (const auto* w = s.child("workload")) workload_from_json(*w, cfg.workload);
    if (const auto* c = s.child("cost")) {
        Section cs(*c, "cost");
        cs.get("decode_seconds_per_token", cfg.cost.decode_seconds_per_token);
        cs.get("prefill_ratio", cfg.cost.prefill_ratio);
        cs.get("policy_seconds_per_op", cfg.cost.policy_seconds_per_op);
        cs.get("instrumented", cfg.cost.instrumented);
        cs.finish();
    }
    if (const auto* c = s.child("calibration")) {
        Section cs(*c, "calibration");
        auto& cal = cfg.calibration;
        cs.get("episodes", cal.episodes);
        cs.get("holdout_seed", cal.holdout_seed);
        cs.get("holdout_episodes", cal.holdout_episodes);
        cs.get("epochs", cal.options.epochs);
        cs.get("learning_rate", cal.options.learning_rate);
        cs.get("seed", cal.options.seed);
        cs.get("max_halvings", cal.options.max_halvings);
        cs.finish();
    }
    s.finish();

    try {
        cfg.params.validate();
        cfg.workload.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (cfg.rhos.empty()) throw ConfigError("arbor: rho list is empty");
    for (double r : cfg.rhos) {
        if (!(r > 0.0 && r <= 1.0)) throw ConfigError("arbor: rho must lie in (0, 1]");
    }
    if (cfg.episodes < 1) throw ConfigError("arbor: episodes must be at least 1");
    if (cfg.threads < 0) throw ConfigError("arbor: threads must be non-negative");
    if (cfg.calibration.episodes < 1 || cfg.calibration.holdout_episodes < 0) {
        throw ConfigError("arbor: calibration episode counts out of range");
    }
    if (cfg.cost.decode_seconds_per_token <= 0 || cfg.cost.prefill_ratio < 0 || cfg.cost.policy_seconds_per_op < 0) {
        throw ConfigError("arbor: cost model entries must be non-negative (decode cost positive)");
    }
    const auto known = policy_names();
    auto check_policy = [&](const std::string& name) {
        if (std::find(known.begin(), known.end(), name) == known.end()) {
            throw ConfigError("arbor: unknown policy '" + name + "'");
        }
    };
    check_policy(cfg.policy);
    for (const auto& p : cfg.policies) check_policy(p);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("arbor: cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::vector<std::string> preset_names() { return {"config-s", "config-l", "ablation"}; }

RunConfig preset(std::string_view name) {
    RunConfig cfg;
    if (name == "config-s") {
        cfg.workload = config_s();
    } else if (name == "config-l") {
        cfg.workload = config_l();
        cfg.rhos = {0.4};
    } else if (name == "ablation") {
        cfg.workload = config_s();
        cfg.policies = ablation_policy_names();
        cfg.episodes = 100;
    } else {
        throw ConfigError("arbor: unknown preset '" + std::string(name) + "'");
    }
    return cfg;
}

} // namespace arbor
