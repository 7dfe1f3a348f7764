#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace biasprobe {

struct DecodingParams {
    int max_new_tokens = 50;
    double temperature = 0.0;
    double top_p = 1.0;
    std::optional<std::int64_t> seed;
};

struct CompletionResult {
    std::string text;    // newly generated tokens only
    std::string raw;     // raw response body for audit (empty for mock)
    double wall_ms = 0.0;
};

// One token of an echo-scored text. `logprob` is a natural-log probability,
// `offset` the byte offset of the token within the scored text.
struct ScoredToken {
    std::string token;
    double logprob = 0.0;
    int offset = 0;
};

struct EchoScoreResult {
    std::vector<ScoredToken> tokens;
    std::string raw;
};

struct TopKResult {
    std::vector<std::pair<std::string, double>> entries; // token -> natural-log prob, descending
    bool truncated = false;                              // k limit was reached
    std::string raw;
};

struct BackendCaps {
    bool echo_logprobs = false; // required for FullWord scoring
    bool topk_logprobs = false; // required for FirstToken scoring
};

// Uniform interface to a text-generation backend: conditional continuation
// plus the two log-probability views the scoring modes need.
class Backend {
public:
    virtual ~Backend() = default;

    virtual std::string identity() const = 0;
    virtual BackendCaps capabilities() const = 0;

    virtual CompletionResult complete(const std::string& prompt, const DecodingParams& params) = 0;

    // Teacher forcing: per-token logprobs of `text` with byte offsets.
    virtual EchoScoreResult echo_score(const std::string& text) = 0;

    // Top-k next-token logprobs after `prompt`.
    virtual TopKResult next_token_topk(const std::string& prompt, int k) = 0;
};

} // namespace biasprobe
