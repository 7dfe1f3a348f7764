#pragma once

#include "biasprobe/adapter.hpp"
#include "biasprobe/http_backend.hpp"
#include "biasprobe/probegen.hpp"

#include <json.hpp>

#include <memory>
#include <string>
#include <vector>

namespace biasprobe {

struct BackendConfig {
    std::string kind = "mock"; // "mock" or "http"
    std::string mock_file;
    HttpBackendConfig http;
    int parallelism = 1;
    double rate_limit_per_s = 0.0; // 0 = unlimited
};

struct TemplateStrategyConfig {
    bool enabled = true;
    std::vector<std::string> targets = {"hobbies", "colors", "occupations", "personalities"};
};

struct LlmStrategyConfig {
    bool enabled = false;
    LlmGenOptions opts;
};

struct NaturalStrategyConfig {
    bool enabled = false;
    std::string corpus_path;
    std::vector<std::string> person_terms = default_person_terms();
};

struct ReportConfig {
    int case_study_k = 6;
    bool include_nonsense_in_review = false;
    bool pooled_co_occurrence = false;
};

// Full run configuration; unspecified fields reproduce the reference setup
// ("Complete the sentence", 50 new tokens, newline separator, greedy).
struct RunConfig {
    BackendConfig backend;
    std::string instruction = "Complete the sentence";
    std::string prompt_separator = "\n";
    DecodingParams decoding;
    std::string lexicon = "pronouns-en";
    TemplateStrategyConfig template_strategy;
    LlmStrategyConfig llm_strategy;
    NaturalStrategyConfig natural_strategy;
    ScoringMode scoring_mode = ScoringMode::FullWord;
    std::string out_dir = "out";
    ReportConfig report;

    nlohmann::json canonical;  // parsed config minus out_dir, for hashing/provenance
    std::string config_hash;   // 16-hex FNV-1a of the canonical form
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const nlohmann::json& j, const std::string& origin);

std::string config_fingerprint(const nlohmann::json& canonical);

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

} // namespace biasprobe
