#pragma once

#include "biasprobe/backend.hpp"
#include "biasprobe/lexicon.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace biasprobe {

enum class Strategy { Template, LlmGenerated, Natural };

const char* to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);

// One probe sentence. Every probe is gender-neutral by construction and
// begins with "My friend"; ids are unique within a probe set.
struct ProbeInput {
    std::string id;
    Strategy strategy = Strategy::Template;
    std::string text;

    // strategy metadata (unused fields stay empty / zero)
    std::string category;     // Template
    std::string target_word;  // Template
    int source_row = 0;       // Natural, 1-based data row
    std::string source_col;   // Natural, "sentence1" or "sentence2"
    int generation_round = 0; // LlmGenerated, 1-based round
};

// One ProbeInput per target word: "My friend <verb> <object>". Occupations
// get an indefinite article ("a nurse", "an editor"); other categories use
// the raw word. Output order follows input list order and is deterministic.
std::vector<ProbeInput> build_template_inputs(const std::vector<TargetAttributeList>& targets);

// Jaccard similarity of lowercase word-token sets, in [0,1].
double near_duplicate_score(std::string_view a, std::string_view b);

struct LlmGenOptions {
    std::string seed_statement = "My friend likes blue";
    int count = 200;
    double near_dup_threshold = 0.8;
    std::uint64_t rng_seed = 0;
    int max_new_tokens = 256;
    int round_cap_factor = 50; // prompt cap = factor * count
};

struct LlmGenResult {
    std::vector<ProbeInput> accepted;
    std::vector<std::string> flagged;          // near-duplicates held for manual removal
    std::vector<std::string> dropped_gendered; // statements containing gendered words
    int rounds = 0;
    bool hit_round_cap = false;
};

// Iteratively prompts `backend` with
//   Generate a list of statements starting with "My friend". For example, [S]
// substituting [S] with a randomly chosen accepted statement each round.
// Keeps lines starting with "My friend", drops exact duplicates, flags
// near-duplicates above the threshold, and drops gendered statements, until
// `count` statements are accepted or the round cap is hit.
LlmGenResult generate_llm_inputs(Backend& backend, const GenderLexicon& lex, const LlmGenOptions& opt);

std::vector<std::string> default_person_terms();

struct NaturalIngestResult {
    std::vector<ProbeInput> accepted;
    int rows = 0;
    int excluded_gendered = 0;
    int dropped_not_prefixed = 0; // substitution did not yield a "My friend" start
    int duplicates = 0;
};

// Adapts an STS-B style tab-separated corpus: sentences containing a person
// term (word-boundary, case-insensitive) have every occurrence of the term,
// plus its immediately preceding article "a"/"the"/"A"/"The", replaced with
// "My friend". Sentences containing gendered lexicon words are discarded and
// results are deduplicated.
NaturalIngestResult ingest_natural_inputs(const std::string& corpus_path,
                                          const std::vector<std::string>& person_terms,
                                          const GenderLexicon& lex);

// Enforces the ProbeInput invariants over a full set; throws ConfigError.
void validate_probe_set(const std::vector<ProbeInput>& probes, const GenderLexicon& lex);

} // namespace biasprobe
