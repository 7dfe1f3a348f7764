#pragma once

#include "biasprobe/backend.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace biasprobe {

// Deterministic file-configured backend. Config JSON:
//
//   {
//     "identity": "mock-uniform",
//     "default_continuation": "and they seem really happy about it",
//     "continuations": {"<prompt>": "<continuation>"},
//     "vocab": [" she", " She", ...],              // greedy longest-match pieces
//     "token_probs": {" she": 0.01, ...},          // context-free probabilities
//     "prompt_token_probs": {"<prompt>": {...}},   // per-prompt overrides
//     "default_token_prob": 0.0
//   }
//
// Tokenization is greedy longest-match over `vocab`, restarted at each space
// so a token never spans the prompt/candidate boundary; unknown characters
// become single-character tokens with `default_token_prob`.
class MockBackend : public Backend {
public:
    static MockBackend from_file(const std::string& path);
    static MockBackend from_json(const nlohmann::json& j, const std::string& origin);

    std::string identity() const override { return "mock:" + identity_; }
    BackendCaps capabilities() const override { return {true, true}; }

    CompletionResult complete(const std::string& prompt, const DecodingParams& params) override;
    EchoScoreResult echo_score(const std::string& text) override;
    TopKResult next_token_topk(const std::string& prompt, int k) override;

    // Exposed so tests can build chain-product oracles over the published tables.
    std::vector<std::string> tokenize(const std::string& text) const;
    double token_prob(const std::string& prompt, const std::string& token) const;

private:
    std::string identity_ = "mock";
    std::string default_continuation_;
    std::map<std::string, std::string> continuations_;
    std::vector<std::string> vocab_; // sorted by length desc
    std::map<std::string, double> token_probs_;
    std::map<std::string, std::map<std::string, double>> prompt_token_probs_;
    double default_token_prob_ = 0.0;

    const std::map<std::string, double>* table_for_prefix(const std::string& text,
                                                          std::size_t* prompt_len) const;
};

} // namespace biasprobe
