#include "biasprobe/mock_backend.hpp"

#include "biasprobe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace biasprobe {

namespace {

double safe_log(double p) {
    return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

} // namespace

MockBackend MockBackend::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mock backend config: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return from_json(j, path);
}

MockBackend MockBackend::from_json(const nlohmann::json& j, const std::string& origin) {
    if (!j.is_object()) throw ConfigError(origin + ": mock config must be a JSON object");
    MockBackend b;
    if (j.contains("identity")) b.identity_ = j.at("identity").get<std::string>();
    if (j.contains("default_continuation")) b.default_continuation_ = j.at("default_continuation").get<std::string>();
    if (j.contains("continuations"))
        for (const auto& [k, v] : j.at("continuations").items()) b.continuations_[k] = v.get<std::string>();
    if (j.contains("vocab"))
        for (const auto& v : j.at("vocab")) b.vocab_.push_back(v.get<std::string>());
    if (j.contains("token_probs"))
        for (const auto& [k, v] : j.at("token_probs").items()) b.token_probs_[k] = v.get<double>();
    if (j.contains("prompt_token_probs"))
        for (const auto& [prompt, table] : j.at("prompt_token_probs").items())
            for (const auto& [tok, p] : table.items()) b.prompt_token_probs_[prompt][tok] = p.get<double>();
    if (j.contains("default_token_prob")) b.default_token_prob_ = j.at("default_token_prob").get<double>();

    // Table keys are implicitly vocabulary too.
    for (const auto& [k, _] : b.token_probs_)
        if (std::find(b.vocab_.begin(), b.vocab_.end(), k) == b.vocab_.end()) b.vocab_.push_back(k);
    for (const auto& [_, table] : b.prompt_token_probs_)
        for (const auto& [k, __] : table)
            if (std::find(b.vocab_.begin(), b.vocab_.end(), k) == b.vocab_.end()) b.vocab_.push_back(k);
    // Pieces are (leading spaces)(non-space run); anything else could span a
    // word boundary and break offset-based candidate scoring.
    for (const auto& piece : b.vocab_) {
        const std::size_t first = piece.find_first_not_of(' ');
        if (piece.empty() || (first != std::string::npos && piece.find(' ', first) != std::string::npos))
            throw ConfigError(origin + ": vocab piece may not contain interior spaces: '" + piece + "'");
    }
    std::sort(b.vocab_.begin(), b.vocab_.end(),
              [](const std::string& a, const std::string& c) {
                  return a.size() != c.size() ? a.size() > c.size() : a < c;
              });
    return b;
}

CompletionResult MockBackend::complete(const std::string& prompt, const DecodingParams&) {
    CompletionResult r;
    const auto it = continuations_.find(prompt);
    r.text = it != continuations_.end() ? it->second : default_continuation_;
    r.wall_ms = 0.0; // fixed clock keeps mock runs bit-deterministic
    return r;
}

std::vector<std::string> MockBackend::tokenize(const std::string& text) const {
    std::vector<std::string> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        std::size_t best = 0;
        for (const auto& piece : vocab_) {
            if (piece.size() <= best) continue;
            if (text.compare(i, piece.size(), piece) == 0) best = piece.size();
        }
        if (best == 0) best = 1; // single-character fallback
        out.push_back(text.substr(i, best));
        i += best;
    }
    return out;
}

const std::map<std::string, double>* MockBackend::table_for_prefix(const std::string& text,
                                                                   std::size_t* prompt_len) const {
    const std::map<std::string, double>* best = nullptr;
    std::size_t best_len = 0;
    for (const auto& [prompt, table] : prompt_token_probs_) {
        if (prompt.size() >= best_len && text.compare(0, prompt.size(), prompt) == 0) {
            best = &table;
            best_len = prompt.size();
        }
    }
    if (prompt_len) *prompt_len = best_len;
    return best;
}

double MockBackend::token_prob(const std::string& prompt, const std::string& token) const {
    if (const auto pit = prompt_token_probs_.find(prompt); pit != prompt_token_probs_.end()) {
        if (const auto it = pit->second.find(token); it != pit->second.end()) return it->second;
    } else if (const auto* table = table_for_prefix(prompt, nullptr)) {
        if (const auto it = table->find(token); it != table->end()) return it->second;
    }
    if (const auto it = token_probs_.find(token); it != token_probs_.end()) return it->second;
    return default_token_prob_;
}

EchoScoreResult MockBackend::echo_score(const std::string& text) {
    std::size_t prefix_len = 0;
    const auto* override_table = table_for_prefix(text, &prefix_len);
    EchoScoreResult r;
    int offset = 0;
    for (const auto& tok : tokenize(text)) {
        double p;
        if (override_table != nullptr && static_cast<std::size_t>(offset) >= prefix_len) {
            const auto it = override_table->find(tok);
            p = it != override_table->end()
                    ? it->second
                    : (token_probs_.count(tok) ? token_probs_.at(tok) : default_token_prob_);
        } else {
            const auto it = token_probs_.find(tok);
            p = it != token_probs_.end() ? it->second : default_token_prob_;
        }
        r.tokens.push_back({tok, safe_log(p), offset});
        offset += static_cast<int>(tok.size());
    }
    return r;
}

TopKResult MockBackend::next_token_topk(const std::string& prompt, int k) {
    std::vector<std::pair<std::string, double>> entries;
    const auto pit = prompt_token_probs_.find(prompt);
    const auto& table = pit != prompt_token_probs_.end() ? pit->second : token_probs_;
    for (const auto& [tok, p] : table) entries.emplace_back(tok, p);
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    TopKResult r;
    r.truncated = static_cast<int>(entries.size()) > k;
    if (r.truncated) entries.resize(static_cast<std::size_t>(k));
    for (auto& [tok, p] : entries) r.entries.emplace_back(tok, safe_log(p));
    return r;
}

} // namespace biasprobe
