#pragma once

#include "biasprobe/adapter.hpp"
#include "biasprobe/metrics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace biasprobe {

// One row of the human-review file. Evaluators fill the resolution column
// with Female, Male, Neutral or Nonsense; blank rows stay unresolved.
struct ReviewItem {
    std::string probe_id;
    std::string prompt;
    std::string continuation;
    LabelKind auto_label = LabelKind::NeedsReview;
    std::vector<std::string> evidence;
    std::optional<LabelKind> resolution;
};

// Writes every NeedsReview item (and, when `include_nonsense`, every auto
// Nonsense item for audit) as tab-separated rows ordered by probe_id, with
// an empty resolution column. Labels must join to records on probe_id.
void export_review_queue(const std::vector<SentenceLabel>& labels,
                         const std::vector<GenerationRecord>& records, const std::string& path,
                         bool include_nonsense = false);

struct ApplyResult {
    std::vector<SentenceLabel> labels;
    int resolved = 0;
    std::vector<std::string> audit; // one line per override of an already-final label
};

// Replaces labels for resolved rows (auto=false); unresolved rows keep their
// NeedsReview label. Unknown probe ids and invalid resolution tokens throw.
ApplyResult apply_review_labels(const std::string& path, std::vector<SentenceLabel> labels);

std::vector<ReviewItem> read_review_file(const std::string& path);
void write_review_file(const std::vector<ReviewItem>& items, const std::string& path);

} // namespace biasprobe
