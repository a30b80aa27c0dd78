// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/trace_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

namespace arbor {

using nlohmann::json;

namespace {

json dist_to_json(const NextTokenDistribution& d) {
    json top = json::array();
    for (const auto& [id, p] : d.top_entries) top.push_back({id, p});
    return {{"top", top}, {"other", d.other_mass}, {"vocab", d.vocab_size}};
}

NextTokenDistribution dist_from_json(const json& j) {
    NextTokenDistribution d;
    for (const auto& e : j.at("top")) {
        if (!e.is_array() || e.size() != 2) throw Error("next_dist.top entries must be [token_id, p]");
        d.top_entries.emplace_back(e[0].get<std::int64_t>(), e[1].get<double>());
    }
    d.other_mass = j.at("other").get<double>();
    d.vocab_size = j.at("vocab").get<std::int64_t>();
    return d;
}

void require_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
    for (const auto& [k, v] : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }) == allowed.end()) {
            throw Error(std::string("unknown key '") + k + "' in " + what);
        }
    }
}

} // namespace

std::string event_to_json(const TraceEvent& e) {
    json j;
    j["type"] = std::string(to_string(e.type));
    j["ts"] = e.ts;
    switch (e.type) {
    case EventKind::OpenBlock:
        j["node"] = e.node;
        if (e.parent != kNoNode) j["parent"] = e.parent;
        break;
    case EventKind::Token: {
        j["node"] = e.node;
        json rows = json::array();
        for (const auto& r : e.attn_rows) {
            json w = json::object();
            for (const auto& [p, x] : r.weights) w[std::to_string(p)] = x;
            rows.push_back({{"layer", r.layer}, {"head", r.head}, {"weights", w}});
        }
        j["attn_rows"] = rows;
        if (e.next_dist) j["next_dist"] = dist_to_json(*e.next_dist);
        break;
    }
    case EventKind::CloseBlock: j["node"] = e.node; break;
    case EventKind::Transition: j["target"] = e.target; break;
    case EventKind::SetSearchValue:
        j["node"] = e.node;
        j["value"] = e.value;
        break;
    }
    return j.dump();
}

TraceEvent event_from_json(std::string_view text, std::size_t line) {
    const auto where = " (line " + std::to_string(line) + ")";
    try {
        const json j = json::parse(text);
        if (!j.is_object()) throw Error("event must be a JSON object");
        TraceEvent e;
        e.type = event_kind_from_string(j.at("type").get<std::string>());
        e.ts = j.at("ts").get<std::int64_t>();
        switch (e.type) {
        case EventKind::OpenBlock:
            require_keys(j, {"type", "ts", "node", "parent"}, "open_block");
            e.node = j.at("node").get<NodeId>();
            if (j.contains("parent") && !j["parent"].is_null()) e.parent = j["parent"].get<NodeId>();
            break;
        case EventKind::Token:
            require_keys(j, {"type", "ts", "node", "attn_rows", "next_dist"}, "token");
            e.node = j.at("node").get<NodeId>();
            if (j.contains("attn_rows")) {
                for (const auto& r : j["attn_rows"]) {
                    AttentionRow row;
                    row.layer = r.at("layer").get<int>();
                    row.head = r.at("head").get<int>();
                    for (const auto& [k, v] : r.at("weights").items()) {
                        std::size_t used = 0;
                        const auto pos = std::stoll(k, &used);
                        if (used != k.size()) throw Error("attention position '" + k + "' is not an integer");
                        row.weights.emplace_back(pos, v.get<double>());
                    }
                    std::sort(row.weights.begin(), row.weights.end());
                    e.attn_rows.push_back(std::move(row));
                }
            }
            if (j.contains("next_dist") && !j["next_dist"].is_null()) e.next_dist = dist_from_json(j["next_dist"]);
            break;
        case EventKind::CloseBlock:
            require_keys(j, {"type", "ts", "node"}, "close_block");
            e.node = j.at("node").get<NodeId>();
            break;
        case EventKind::Transition:
            require_keys(j, {"type", "ts", "target"}, "transition");
            e.target = j.at("target").get<NodeId>();
            break;
        case EventKind::SetSearchValue:
            require_keys(j, {"type", "ts", "node", "value"}, "set_search_value");
            e.node = j.at("node").get<NodeId>();
            e.value = j.at("value").get<double>();
            break;
        }
        return e;
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& ex) {
        throw ParseError(std::string("arbor: malformed trace event") + where + ": " + ex.what(), line);
    }
}

void write_trace(std::ostream& out, const EpisodeTrace& trace) {
    for (const auto& e : trace) out << event_to_json(e) << '\n';
}

EpisodeTrace read_trace(std::istream& in) {
    EpisodeTrace trace;
    std::string text;
    std::size_t line = 0;
    std::int64_t last_ts = 0;
    while (std::getline(in, text)) {
        ++line;
        if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) continue;
        auto e = event_from_json(text, line);
        if (!trace.empty() && e.ts <= last_ts) {
            throw ParseError("arbor: timestamps must be strictly increasing (line " + std::to_string(line) + ")", line);
        }
        last_ts = e.ts;
        trace.push_back(std::move(e));
    }
    return trace;
}

void write_trace_file(const std::string& path, const EpisodeTrace& trace) {
    std::ofstream out(path);
    if (!out) throw IoError("arbor: cannot write " + path);
    write_trace(out, trace);
    if (!out) throw IoError("arbor: write failed for " + path);
}

EpisodeTrace read_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("arbor: cannot open trace " + path);
    return read_trace(in);
}

std::string ground_truth_to_json(const GroundTruth& gt) {
    json j;
    j["critical_blocks"] = gt.critical_blocks;
    j["solution_leaf"] = gt.solution_leaf;
    j["on_solution_path"] = gt.on_solution_path;
    j["utility"] = gt.utility;
    j["tau"] = gt.tau;
    j["heavy_hitters"] = gt.heavy_hitters;
    return j.dump();
}

GroundTruth ground_truth_from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        GroundTruth gt;
        gt.critical_blocks = j.at("critical_blocks").get<std::vector<NodeId>>();
        gt.solution_leaf = j.at("solution_leaf").get<NodeId>();
        gt.on_solution_path = j.at("on_solution_path").get<std::vector<bool>>();
        gt.utility = j.at("utility").get<std::vector<double>>();
        gt.tau = j.at("tau").get<std::vector<double>>();
        gt.heavy_hitters = j.at("heavy_hitters").get<std::vector<std::vector<TokenPos>>>();
        return gt;
    } catch (const std::exception& ex) {
        throw IoError(std::string("arbor: malformed ground truth: ") + ex.what());
    }
}

void write_audit(std::ostream& out, const std::vector<AuditRecord>& audit) {
    for (const auto& r : audit) {
        json j{{"ts", r.ts}, {"op", r.op}, {"node", r.node}};
        if (r.op == "transition") {
            j["path"] = r.path;
            j["path_full"] = r.path_full;
        } else {
            j["before"] = r.before;
            j["after"] = r.after;
            j["n"] = r.n;
            j["span"] = {r.span_start, r.span_end};
            j["range"] = {r.min_pos, r.max_pos};
        }
        out << j.dump() << '\n';
    }
}

std::vector<AuditRecord> read_audit(std::istream& in) {
    std::vector<AuditRecord> out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        try {
            const json j = json::parse(text);
            AuditRecord r;
            r.ts = j.at("ts").get<std::int64_t>();
            r.op = j.at("op").get<std::string>();
            r.node = j.at("node").get<NodeId>();
            if (r.op == "transition") {
                r.path = j.at("path").get<std::vector<NodeId>>();
                r.path_full = j.at("path_full").get<bool>();
            } else {
                r.before = j.at("before").get<std::int64_t>();
                r.after = j.at("after").get<std::int64_t>();
                r.n = j.at("n").get<std::int64_t>();
                r.span_start = j.at("span")[0].get<TokenPos>();
                r.span_end = j.at("span")[1].get<TokenPos>();
                r.min_pos = j.at("range")[0].get<TokenPos>();
                r.max_pos = j.at("range")[1].get<TokenPos>();
            }
            out.push_back(std::move(r));
        } catch (const std::exception& ex) {
            throw ParseError("arbor: malformed audit record (line " + std::to_string(line) + "): " + ex.what(), line);
        }
    }
    return out;
}

void write_series(std::ostream& out, const std::vector<MemorySample>& series) {
    out << "step,ts,total,label\n";
    for (const auto& s : series) out << s.step << ',' << s.ts << ',' << s.total << ',' << s.label << '\n';
}

} // namespace arbor
