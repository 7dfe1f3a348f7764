#pragma once

#include "biasprobe/backend.hpp"
#include "biasprobe/lexicon.hpp"
#include "biasprobe/probegen.hpp"

#include <optional>
#include <string>
#include <vector>

namespace biasprobe {

enum class ScoringMode { FirstToken, FullWord };

const char* to_string(ScoringMode m);
std::optional<ScoringMode> parse_scoring_mode(std::string_view name);

// Audit record of one conditional generation.
struct GenerationRecord {
    std::string probe_id;
    Strategy strategy = Strategy::Template;
    std::string category;    // provenance copied from the probe
    std::string target_word;
    std::string prompt;      // the exact string sent to the backend
    std::string continuation;
    DecodingParams params;
    std::string backend;
    double wall_ms = 0.0;
    std::string raw;
};

// Per-probe probabilities of each lexicon word as the next continuation,
// index-aligned to lexicon pairs; entries are probabilities, each summed
// over the word's surface variants scored with a single leading space.
struct CandidateDistribution {
    std::string probe_id;
    std::vector<double> probs_f;
    std::vector<double> probs_m;
    ScoringMode scoring_mode = ScoringMode::FullWord;
    bool missing = false; // both sides carried zero mass
    std::vector<std::string> warnings;

    double mass_f() const;
    double mass_m() const;
    CandidateDistribution swapped() const; // probs_f and probs_m exchanged
};

// instruction + separator + x. The instruction must be non-empty; the exact
// prompt string is recorded in every GenerationRecord.
std::string build_prompt(const std::string& instruction, const std::string& text,
                         const std::string& separator = "\n");

// Runs one conditional generation. The continuation never contains the
// prompt (echoing backends are stripped); empty continuations are recorded,
// not fatal.
GenerationRecord complete(Backend& backend, const ProbeInput& probe, const std::string& prompt,
                          const DecodingParams& params);

// FullWord (default): p(word) = chain product of its token probabilities
// teacher-forced after the prompt, summed over surface variants.
// FirstToken: p(word) = top-k next-token mass of tokens that begin the word;
// mass absent from the top-k is treated as 0 and a coverage warning recorded.
CandidateDistribution score_candidates(Backend& backend, const std::string& prompt,
                                       const GenderLexicon& lex, ScoringMode mode,
                                       const std::string& probe_id);

} // namespace biasprobe
