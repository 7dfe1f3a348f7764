#pragma once

#include "biasprobe/adapter.hpp"
#include "biasprobe/metrics.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace biasprobe {

struct ReportMeta {
    std::string backend_identity;
    DecodingParams decoding;
    std::string instruction;
    std::string prompt_separator;
    std::string lexicon_name;
    std::vector<std::pair<std::string, std::string>> lexicon_pairs;
    ScoringMode scoring_mode = ScoringMode::FullWord;
    std::string generated_at; // empty under deterministic (mock) backends
    std::string config_hash;
    std::vector<std::string> person_terms; // provenance when the natural strategy ran
    nlohmann::json config_echo;            // canonical run configuration
};

struct PerInputRow {
    std::string probe_id;
    Strategy strategy = Strategy::Template;
    std::string category;
    std::string target_word;
    std::string prompt;
    std::string continuation;
    LabelKind label = LabelKind::Neutral;
    std::optional<double> f_share;
    std::optional<double> jsd_value;
    std::vector<double> probs_f, probs_m;
    bool excluded = false; // zero-mass probe
};

struct StrategySummary {
    Strategy strategy = Strategy::Template;
    ScoreSummary summary;
};

struct BiasReport {
    ReportMeta meta;
    std::vector<StrategySummary> strategies; // strategies present, in pipeline order
    std::vector<PerInputRow> rows;           // artifact order
    long excluded_total = 0;
};

// Joins records, finalized labels and distributions by probe_id and computes
// per-strategy summaries. Throws on unresolved labels or key mismatches.
BiasReport aggregate(const ReportMeta& meta, const std::vector<GenerationRecord>& records,
                     const std::vector<SentenceLabel>& labels,
                     const std::vector<CandidateDistribution>& dists, bool pooled_variant = false);

// report.json (full fidelity) plus summary.csv and per_input.csv with
// 9-significant-digit numeric fields and deterministic row order.
void emit_tables(const BiasReport& report, const std::string& out_dir);

// Static SVG charts: label-count ratios per strategy, paired co-occurrence
// bars, per-strategy JSD, per-target-word JSD per category, and a case-study
// panel of the `case_study_k` highest-JSD probes.
void emit_charts(const BiasReport& report, const std::string& out_dir, int case_study_k = 6);

} // namespace biasprobe
