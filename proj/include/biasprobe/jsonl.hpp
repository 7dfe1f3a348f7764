#pragma once

#include "biasprobe/adapter.hpp"
#include "biasprobe/metrics.hpp"
#include "biasprobe/probegen.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace biasprobe {

// JSON-lines artifact IO. Every line carries the producing run's config
// hash; stages refuse mixed-hash inputs at read time when `expect_hash` is
// non-empty.

nlohmann::ordered_json probe_to_json(const ProbeInput& p, const std::string& config_hash);
ProbeInput probe_from_json(const nlohmann::json& j);

nlohmann::ordered_json record_to_json(const GenerationRecord& r, const std::string& config_hash);
GenerationRecord record_from_json(const nlohmann::json& j);

nlohmann::ordered_json dist_to_json(const CandidateDistribution& d, const std::string& config_hash);
CandidateDistribution dist_from_json(const nlohmann::json& j);

nlohmann::ordered_json label_to_json(const SentenceLabel& l, const std::string& config_hash);
SentenceLabel label_from_json(const nlohmann::json& j);

void write_jsonl_atomic(const std::string& path, const std::vector<nlohmann::ordered_json>& lines);

// Writes pre-serialized JSON lines verbatim; reused lines keep their exact
// original bytes so re-runs stay byte-identical.
void write_raw_lines_atomic(const std::string& path, const std::vector<std::string>& lines);

struct JsonlFile {
    std::vector<nlohmann::json> lines;
    std::vector<std::string> raw;  // original line text, index-aligned with lines
    std::string config_hash;       // shared hash of all lines
};

// Reads a JSON-lines artifact; requires a uniform config_hash across lines
// and, when `expect_hash` is non-empty, a match with it.
JsonlFile read_jsonl(const std::string& path, const std::string& expect_hash = "");

bool file_exists(const std::string& path);

} // namespace biasprobe
