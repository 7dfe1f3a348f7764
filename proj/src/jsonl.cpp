#include "biasprobe/jsonl.hpp"

#include "biasprobe/errors.hpp"

#include <filesystem>
#include <fstream>

namespace biasprobe {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

Strategy strategy_from(const json& j, const char* key) {
    const auto s = parse_strategy(j.at(key).get<std::string>());
    if (!s) throw ConfigError("invalid strategy: " + j.at(key).get<std::string>());
    return *s;
}

} // namespace

ordered_json probe_to_json(const ProbeInput& p, const std::string& config_hash) {
    ordered_json j;
    j["id"] = p.id;
    j["strategy"] = to_string(p.strategy);
    j["text"] = p.text;
    ordered_json meta = ordered_json::object();
    switch (p.strategy) {
    case Strategy::Template:
        meta["category"] = p.category;
        meta["target_word"] = p.target_word;
        break;
    case Strategy::Natural:
        meta["source_row"] = p.source_row;
        meta["source_col"] = p.source_col;
        break;
    case Strategy::LlmGenerated:
        meta["generation_round"] = p.generation_round;
        break;
    }
    j["meta"] = meta;
    j["config_hash"] = config_hash;
    return j;
}

ProbeInput probe_from_json(const json& j) {
    ProbeInput p;
    p.id = j.at("id").get<std::string>();
    p.strategy = strategy_from(j, "strategy");
    p.text = j.at("text").get<std::string>();
    if (j.contains("meta")) {
        const auto& meta = j.at("meta");
        p.category = meta.value("category", std::string());
        p.target_word = meta.value("target_word", std::string());
        p.source_row = meta.value("source_row", 0);
        p.source_col = meta.value("source_col", std::string());
        p.generation_round = meta.value("generation_round", 0);
    }
    return p;
}

ordered_json record_to_json(const GenerationRecord& r, const std::string& config_hash) {
    ordered_json j;
    j["probe_id"] = r.probe_id;
    j["strategy"] = to_string(r.strategy);
    if (!r.category.empty()) j["category"] = r.category;
    if (!r.target_word.empty()) j["target_word"] = r.target_word;
    j["prompt"] = r.prompt;
    j["continuation"] = r.continuation;
    ordered_json params;
    params["max_new_tokens"] = r.params.max_new_tokens;
    params["temperature"] = r.params.temperature;
    params["top_p"] = r.params.top_p;
    if (r.params.seed)
        params["seed"] = *r.params.seed;
    else
        params["seed"] = nullptr;
    j["params"] = params;
    j["backend"] = r.backend;
    j["wall_ms"] = r.wall_ms;
    j["raw"] = r.raw;
    j["config_hash"] = config_hash;
    return j;
}

GenerationRecord record_from_json(const json& j) {
    GenerationRecord r;
    r.probe_id = j.at("probe_id").get<std::string>();
    r.strategy = strategy_from(j, "strategy");
    r.category = j.value("category", std::string());
    r.target_word = j.value("target_word", std::string());
    r.prompt = j.at("prompt").get<std::string>();
    r.continuation = j.at("continuation").get<std::string>();
    if (j.contains("params")) {
        const auto& p = j.at("params");
        r.params.max_new_tokens = p.value("max_new_tokens", 50);
        r.params.temperature = p.value("temperature", 0.0);
        r.params.top_p = p.value("top_p", 1.0);
        if (p.contains("seed") && !p.at("seed").is_null())
            r.params.seed = p.at("seed").get<std::int64_t>();
    }
    r.backend = j.value("backend", std::string());
    r.wall_ms = j.value("wall_ms", 0.0);
    r.raw = j.value("raw", std::string());
    return r;
}

ordered_json dist_to_json(const CandidateDistribution& d, const std::string& config_hash) {
    ordered_json j;
    j["probe_id"] = d.probe_id;
    j["probs_f"] = d.probs_f;
    j["probs_m"] = d.probs_m;
    j["scoring_mode"] = to_string(d.scoring_mode);
    j["missing"] = d.missing;
    j["warnings"] = d.warnings;
    j["config_hash"] = config_hash;
    return j;
}

CandidateDistribution dist_from_json(const json& j) {
    CandidateDistribution d;
    d.probe_id = j.at("probe_id").get<std::string>();
    d.probs_f = j.at("probs_f").get<std::vector<double>>();
    d.probs_m = j.at("probs_m").get<std::vector<double>>();
    const auto mode = parse_scoring_mode(j.at("scoring_mode").get<std::string>());
    if (!mode) throw ConfigError("invalid scoring_mode in distribution artifact");
    d.scoring_mode = *mode;
    d.missing = j.value("missing", false);
    if (j.contains("warnings")) d.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (d.probs_f.size() != d.probs_m.size())
        throw ConfigError("distribution sides differ in length for probe " + d.probe_id);
    return d;
}

ordered_json label_to_json(const SentenceLabel& l, const std::string& config_hash) {
    ordered_json j;
    j["probe_id"] = l.probe_id;
    j["label"] = to_string(l.label);
    j["auto"] = l.auto_assigned;
    j["evidence"] = l.evidence;
    j["config_hash"] = config_hash;
    return j;
}

SentenceLabel label_from_json(const json& j) {
    SentenceLabel l;
    l.probe_id = j.at("probe_id").get<std::string>();
    const auto kind = parse_label(j.at("label").get<std::string>());
    if (!kind) throw ConfigError("invalid label in labels artifact: " + j.at("label").get<std::string>());
    l.label = *kind;
    l.auto_assigned = j.value("auto", true);
    if (j.contains("evidence")) l.evidence = j.at("evidence").get<std::vector<std::string>>();
    return l;
}

void write_jsonl_atomic(const std::string& path, const std::vector<ordered_json>& lines) {
    std::vector<std::string> raw;
    raw.reserve(lines.size());
    for (const auto& line : lines) raw.push_back(line.dump());
    write_raw_lines_atomic(path, raw);
}

void write_raw_lines_atomic(const std::string& path, const std::vector<std::string>& lines) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot write artifact: " + tmp);
        for (const auto& line : lines) out << line << "\n";
    }
    std::filesystem::rename(tmp, path);
}

JsonlFile read_jsonl(const std::string& path, const std::string& expect_hash) {
    std::ifstream in(path);
    if (!in) throw ConfigError("missing artifact: " + path);
    JsonlFile file;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        const std::string hash = j.value("config_hash", std::string());
        if (file.lines.empty())
            file.config_hash = hash;
        else if (hash != file.config_hash)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": mixed config_hash values");
        file.lines.push_back(std::move(j));
        file.raw.push_back(line);
    }
    if (!expect_hash.empty() && !file.lines.empty() && file.config_hash != expect_hash)
        throw ConfigError(path + ": artifact was produced by a different configuration (hash " +
                          file.config_hash + ", current " + expect_hash + ")");
    return file;
}

bool file_exists(const std::string& path) {
    std::error_code ec;
    return std::filesystem::exists(path, ec);
}

} // namespace biasprobe
