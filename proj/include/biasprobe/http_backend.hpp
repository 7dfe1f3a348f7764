#pragma once

#include "biasprobe/backend.hpp"

#include <string>

namespace biasprobe {

struct HttpBackendConfig {
    std::string base_url;                          // e.g. "http://127.0.0.1:8080"
    std::string completions_path = "/v1/completions";
    std::string model;
    std::string auth_env;                          // env var holding a bearer token; "" = none
    double connect_timeout_s = 5.0;
    double read_timeout_s = 120.0;
    int retries = 3;                               // attempts per request
    int retry_backoff_ms = 250;                    // doubles per attempt
    int logprobs_top_k = 20;                       // FirstToken scoring
};

// Client for the de-facto open completions convention:
// POST {model, prompt, max_tokens, temperature, logprobs, echo} ->
// {choices:[{text, logprobs:{tokens, token_logprobs, text_offset, top_logprobs}}]}.
// Transport failures and 5xx responses are retried with exponential backoff.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig cfg);

    std::string identity() const override;
    BackendCaps capabilities() const override { return {true, true}; }

    CompletionResult complete(const std::string& prompt, const DecodingParams& params) override;
    EchoScoreResult echo_score(const std::string& text) override;
    TopKResult next_token_topk(const std::string& prompt, int k) override;

private:
    HttpBackendConfig cfg_;
    std::string auth_token_;

    std::string post_json(const std::string& body);
};

} // namespace biasprobe
