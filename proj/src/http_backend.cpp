#include "biasprobe/http_backend.hpp"

#include "biasprobe/errors.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <thread>

namespace biasprobe {

namespace {

using nlohmann::json;

json decoding_body(const std::string& model, const std::string& prompt, const DecodingParams& params) {
    json body = {
        {"model", model},
        {"prompt", prompt},
        {"max_tokens", params.max_new_tokens},
        {"temperature", params.temperature},
        {"top_p", params.top_p},
        {"stream", false},
    };
    if (params.seed) body["seed"] = *params.seed;
    return body;
}

const json& first_choice(const json& response, const std::string& context) {
    const auto it = response.find("choices");
    if (it == response.end() || !it->is_array() || it->empty())
        throw BackendError(context + ": response has no choices");
    return it->front();
}

} // namespace

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) throw ConfigError("backend base_url must be set for kind \"http\"");
    if (!cfg_.auth_env.empty()) {
        const char* v = std::getenv(cfg_.auth_env.c_str());
        if (v == nullptr || *v == '\0')
            throw ConfigError("auth environment variable '" + cfg_.auth_env + "' is not set");
        auth_token_ = v;
    }
}

std::string HttpBackend::identity() const {
    return "http:" + cfg_.base_url + cfg_.completions_path + ":" + cfg_.model;
}

std::string HttpBackend::post_json(const std::string& body) {
    std::string last_error;
    int delay_ms = cfg_.retry_backoff_ms;
    const int attempts = std::max(1, cfg_.retries);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms *= 2;
        }
        httplib::Client client(cfg_.base_url);
        client.set_connection_timeout(std::chrono::duration<double>(cfg_.connect_timeout_s));
        client.set_read_timeout(std::chrono::duration<double>(cfg_.read_timeout_s));
        if (!auth_token_.empty()) client.set_default_headers({{"Authorization", "Bearer " + auth_token_}});

        auto res = client.Post(cfg_.completions_path, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "server error: HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw BackendError("backend returned HTTP " + std::to_string(res->status) + ": " + res->body);
        return res->body;
    }
    throw BackendError("backend unreachable after " + std::to_string(attempts) + " attempts (" +
                       last_error + ")");
}

CompletionResult HttpBackend::complete(const std::string& prompt, const DecodingParams& params) {
    const json body = decoding_body(cfg_.model, prompt, params);
    const auto t0 = std::chrono::steady_clock::now();
    const std::string raw = post_json(body.dump());
    const auto t1 = std::chrono::steady_clock::now();

    json response;
    try {
        response = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw BackendError(std::string("unparseable completion response: ") + e.what());
    }
    const json& choice = first_choice(response, "complete");
    CompletionResult r;
    r.text = choice.value("text", std::string());
    r.raw = raw;
    r.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    return r;
}

EchoScoreResult HttpBackend::echo_score(const std::string& text) {
    json body = decoding_body(cfg_.model, text, DecodingParams{});
    body["max_tokens"] = 0;
    body["temperature"] = 0.0;
    body["echo"] = true;
    body["logprobs"] = 1;
    const std::string raw = post_json(body.dump());

    json response;
    try {
        response = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw BackendError(std::string("unparseable echo response: ") + e.what());
    }
    const json& choice = first_choice(response, "echo_score");
    const auto lp = choice.find("logprobs");
    if (lp == choice.end() || lp->is_null())
        throw BackendError("backend does not return logprobs for echo scoring");
    const auto& tokens = lp->at("tokens");
    const auto& logprobs = lp->at("token_logprobs");
    const auto& offsets = lp->at("text_offset");
    if (tokens.size() != logprobs.size() || tokens.size() != offsets.size())
        throw BackendError("echo response arrays have mismatched lengths");

    EchoScoreResult r;
    r.raw = raw;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        ScoredToken t;
        t.token = tokens[i].get<std::string>();
        // the first prompt token's logprob is conventionally null
        t.logprob = logprobs[i].is_null() ? 0.0 : logprobs[i].get<double>();
        t.offset = offsets[i].get<int>();
        r.tokens.push_back(std::move(t));
    }
    return r;
}

TopKResult HttpBackend::next_token_topk(const std::string& prompt, int k) {
    json body = decoding_body(cfg_.model, prompt, DecodingParams{});
    body["max_tokens"] = 1;
    body["temperature"] = 0.0;
    body["logprobs"] = k;
    const std::string raw = post_json(body.dump());

    json response;
    try {
        response = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw BackendError(std::string("unparseable logprobs response: ") + e.what());
    }
    const json& choice = first_choice(response, "next_token_topk");
    const auto lp = choice.find("logprobs");
    if (lp == choice.end() || lp->is_null() || !lp->contains("top_logprobs") ||
        lp->at("top_logprobs").empty())
        throw BackendError("backend does not return top_logprobs");

    TopKResult r;
    r.raw = raw;
    for (const auto& [tok, v] : lp->at("top_logprobs").front().items())
        r.entries.emplace_back(tok, v.get<double>());
    std::sort(r.entries.begin(), r.entries.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    r.truncated = static_cast<int>(r.entries.size()) >= k;
    return r;
}

} // namespace biasprobe
