#include "biasprobe/config.hpp"

#include "biasprobe/errors.hpp"
#include "biasprobe/mock_backend.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace biasprobe {

namespace {

using nlohmann::json;

// Maps a nlohmann parse_error byte position to line:column.
std::string locate(const std::string& content, std::size_t byte_pos) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte_pos && i < content.size(); ++i) {
        if (content[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

void reject_unknown_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (!known.count(key))
            throw ConfigError(where + ": unknown key \"" + key + "\"");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return j.at(key).get<T>();
}

} // namespace

std::string config_fingerprint(const json& canonical) {
    const std::string bytes = canonical.dump();
    std::uint64_t h = 1469598103934665603ull; // FNV-1a 64
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string content = buffer.str();
    json j;
    try {
        j = json::parse(content);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": JSON parse error at " + locate(content, e.byte) + ": " + e.what());
    }
    return parse_run_config(j, path);
}

RunConfig parse_run_config(const json& j, const std::string& origin) {
    if (!j.is_object()) throw ConfigError(origin + ": config must be a JSON object");
    reject_unknown_keys(j, {"backend", "instruction", "prompt_separator", "decoding", "lexicon",
                            "strategies", "scoring_mode", "out_dir", "report"},
                        origin);
    RunConfig cfg;
    try {
        if (j.contains("backend")) {
            const json& b = j.at("backend");
            reject_unknown_keys(b,
                                {"kind", "mock_file", "base_url", "completions_path", "model",
                                 "auth_env", "connect_timeout_s", "read_timeout_s", "retries",
                                 "retry_backoff_ms", "logprobs_top_k", "parallelism", "rate_limit_per_s"},
                                origin + ": backend");
            cfg.backend.kind = get_or<std::string>(b, "kind", "mock");
            cfg.backend.mock_file = get_or<std::string>(b, "mock_file", "");
            cfg.backend.http.base_url = get_or<std::string>(b, "base_url", "");
            cfg.backend.http.completions_path =
                get_or<std::string>(b, "completions_path", "/v1/completions");
            cfg.backend.http.model = get_or<std::string>(b, "model", "");
            cfg.backend.http.auth_env = get_or<std::string>(b, "auth_env", "");
            cfg.backend.http.connect_timeout_s = get_or<double>(b, "connect_timeout_s", 5.0);
            cfg.backend.http.read_timeout_s = get_or<double>(b, "read_timeout_s", 120.0);
            cfg.backend.http.retries = get_or<int>(b, "retries", 3);
            cfg.backend.http.retry_backoff_ms = get_or<int>(b, "retry_backoff_ms", 250);
            cfg.backend.http.logprobs_top_k = get_or<int>(b, "logprobs_top_k", 20);
            cfg.backend.parallelism = get_or<int>(b, "parallelism", 1);
            cfg.backend.rate_limit_per_s = get_or<double>(b, "rate_limit_per_s", 0.0);
        }
        cfg.instruction = get_or<std::string>(j, "instruction", cfg.instruction);
        cfg.prompt_separator = get_or<std::string>(j, "prompt_separator", cfg.prompt_separator);
        if (j.contains("decoding")) {
            const json& d = j.at("decoding");
            reject_unknown_keys(d, {"max_new_tokens", "temperature", "top_p", "seed"},
                                origin + ": decoding");
            cfg.decoding.max_new_tokens = get_or<int>(d, "max_new_tokens", 50);
            cfg.decoding.temperature = get_or<double>(d, "temperature", 0.0);
            cfg.decoding.top_p = get_or<double>(d, "top_p", 1.0);
            if (d.contains("seed") && !d.at("seed").is_null())
                cfg.decoding.seed = d.at("seed").get<std::int64_t>();
        }
        cfg.lexicon = get_or<std::string>(j, "lexicon", cfg.lexicon);
        if (j.contains("strategies")) {
            const json& s = j.at("strategies");
            reject_unknown_keys(s, {"template", "llm_generated", "natural"}, origin + ": strategies");
            if (s.contains("template")) {
                const json& t = s.at("template");
                reject_unknown_keys(t, {"enabled", "targets"}, origin + ": strategies.template");
                cfg.template_strategy.enabled = get_or<bool>(t, "enabled", true);
                if (t.contains("targets"))
                    cfg.template_strategy.targets = t.at("targets").get<std::vector<std::string>>();
            }
            if (s.contains("llm_generated")) {
                const json& l = s.at("llm_generated");
                reject_unknown_keys(l,
                                    {"enabled", "seed_statement", "count", "near_dup_threshold",
                                     "rng_seed", "max_new_tokens", "round_cap_factor"},
                                    origin + ": strategies.llm_generated");
                cfg.llm_strategy.enabled = get_or<bool>(l, "enabled", false);
                cfg.llm_strategy.opts.seed_statement =
                    get_or<std::string>(l, "seed_statement", cfg.llm_strategy.opts.seed_statement);
                cfg.llm_strategy.opts.count = get_or<int>(l, "count", 200);
                cfg.llm_strategy.opts.near_dup_threshold = get_or<double>(l, "near_dup_threshold", 0.8);
                cfg.llm_strategy.opts.rng_seed = get_or<std::uint64_t>(l, "rng_seed", 0);
                cfg.llm_strategy.opts.max_new_tokens = get_or<int>(l, "max_new_tokens", 256);
                cfg.llm_strategy.opts.round_cap_factor = get_or<int>(l, "round_cap_factor", 50);
            }
            if (s.contains("natural")) {
                const json& n = s.at("natural");
                reject_unknown_keys(n, {"enabled", "corpus_path", "person_terms"},
                                    origin + ": strategies.natural");
                cfg.natural_strategy.enabled = get_or<bool>(n, "enabled", false);
                cfg.natural_strategy.corpus_path = get_or<std::string>(n, "corpus_path", "");
                if (n.contains("person_terms"))
                    cfg.natural_strategy.person_terms =
                        n.at("person_terms").get<std::vector<std::string>>();
            }
        }
        if (j.contains("scoring_mode")) {
            const auto mode = parse_scoring_mode(j.at("scoring_mode").get<std::string>());
            if (!mode)
                throw ConfigError(origin + ": scoring_mode must be \"full-word\" or \"first-token\"");
            cfg.scoring_mode = *mode;
        }
        cfg.out_dir = get_or<std::string>(j, "out_dir", cfg.out_dir);
        if (j.contains("report")) {
            const json& r = j.at("report");
            reject_unknown_keys(r, {"case_study_k", "include_nonsense_in_review", "pooled_co_occurrence"},
                                origin + ": report");
            cfg.report.case_study_k = get_or<int>(r, "case_study_k", 6);
            cfg.report.include_nonsense_in_review = get_or<bool>(r, "include_nonsense_in_review", false);
            cfg.report.pooled_co_occurrence = get_or<bool>(r, "pooled_co_occurrence", false);
        }
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }

    // semantic validation
    if (cfg.backend.kind != "mock" && cfg.backend.kind != "http")
        throw ConfigError(origin + ": backend.kind must be \"mock\" or \"http\"");
    if (cfg.backend.kind == "mock" && cfg.backend.mock_file.empty())
        throw ConfigError(origin + ": backend.mock_file required for kind \"mock\"");
    if (cfg.backend.kind == "http" && cfg.backend.http.base_url.empty())
        throw ConfigError(origin + ": backend.base_url required for kind \"http\"");
    if (cfg.backend.parallelism < 1) throw ConfigError(origin + ": backend.parallelism must be >= 1");
    if (cfg.backend.rate_limit_per_s < 0)
        throw ConfigError(origin + ": backend.rate_limit_per_s must be >= 0");
    if (cfg.instruction.empty()) throw ConfigError(origin + ": instruction must be non-empty");
    if (cfg.decoding.max_new_tokens < 1)
        throw ConfigError(origin + ": decoding.max_new_tokens must be >= 1");
    if (cfg.decoding.temperature < 0)
        throw ConfigError(origin + ": decoding.temperature must be >= 0");
    if (cfg.decoding.top_p <= 0 || cfg.decoding.top_p > 1)
        throw ConfigError(origin + ": decoding.top_p must be in (0,1]");
    if (cfg.lexicon.empty()) throw ConfigError(origin + ": lexicon must be non-empty");
    if (cfg.llm_strategy.enabled && cfg.llm_strategy.opts.count < 1)
        throw ConfigError(origin + ": strategies.llm_generated.count must be >= 1");
    if (cfg.llm_strategy.opts.near_dup_threshold < 0 || cfg.llm_strategy.opts.near_dup_threshold > 1)
        throw ConfigError(origin + ": strategies.llm_generated.near_dup_threshold must be in [0,1]");
    if (cfg.natural_strategy.enabled && cfg.natural_strategy.corpus_path.empty())
        throw ConfigError(origin + ": strategies.natural.corpus_path required when enabled");
    if (cfg.natural_strategy.enabled && cfg.natural_strategy.person_terms.empty())
        throw ConfigError(origin + ": strategies.natural.person_terms must be non-empty");
    if (cfg.report.case_study_k < 0)
        throw ConfigError(origin + ": report.case_study_k must be >= 0");

    // out_dir is a runtime location, not run semantics; keep it out of the hash
    json canonical = j;
    canonical.erase("out_dir");
    cfg.canonical = canonical;
    cfg.config_hash = config_fingerprint(canonical);
    return cfg;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
    if (cfg.kind == "mock")
        return std::make_unique<MockBackend>(MockBackend::from_file(cfg.mock_file));
    return std::make_unique<HttpBackend>(cfg.http);
}

} // namespace biasprobe
