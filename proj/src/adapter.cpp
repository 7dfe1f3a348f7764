#include "biasprobe/adapter.hpp"

#include "biasprobe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace biasprobe {

namespace {

// Probability of one surface variant as chain product of teacher-forced
// token probabilities: every token starting at or after the prompt/candidate
// boundary belongs to the candidate.
double full_word_prob(Backend& backend, const std::string& prompt, const std::string& variant) {
    const std::string scored = prompt + " " + variant;
    const EchoScoreResult echo = backend.echo_score(scored);
    double log_sum = 0.0;
    bool any = false;
    for (const auto& tok : echo.tokens) {
        if (tok.offset < static_cast<int>(prompt.size())) continue;
        log_sum += tok.logprob;
        any = true;
    }
    if (!any) return 0.0;
    return std::exp(log_sum);
}

// FirstToken approximation: total top-k mass of tokens that are a prefix of
// " " + variant (any such token can begin generating the word). The bare
// space token is excluded; it carries no word information.
double first_token_prob(const TopKResult& topk, const std::string& variant) {
    const std::string target = " " + variant;
    double p = 0.0;
    for (const auto& [tok, logprob] : topk.entries) {
        if (tok.size() < 2 || tok.size() > target.size()) continue;
        if (target.compare(0, tok.size(), tok) == 0) p += std::exp(logprob);
    }
    return p;
}

} // namespace

const char* to_string(ScoringMode m) {
    return m == ScoringMode::FullWord ? "full-word" : "first-token";
}

std::optional<ScoringMode> parse_scoring_mode(std::string_view name) {
    if (name == "full-word") return ScoringMode::FullWord;
    if (name == "first-token") return ScoringMode::FirstToken;
    return std::nullopt;
}

double CandidateDistribution::mass_f() const {
    return std::accumulate(probs_f.begin(), probs_f.end(), 0.0);
}

double CandidateDistribution::mass_m() const {
    return std::accumulate(probs_m.begin(), probs_m.end(), 0.0);
}

CandidateDistribution CandidateDistribution::swapped() const {
    CandidateDistribution out = *this;
    std::swap(out.probs_f, out.probs_m);
    return out;
}

std::string build_prompt(const std::string& instruction, const std::string& text,
                         const std::string& separator) {
    if (instruction.empty()) throw ConfigError("instruction must be non-empty");
    return instruction + separator + text;
}

GenerationRecord complete(Backend& backend, const ProbeInput& probe, const std::string& prompt,
                          const DecodingParams& params) {
    const CompletionResult res = backend.complete(prompt, params);
    GenerationRecord rec;
    rec.probe_id = probe.id;
    rec.strategy = probe.strategy;
    rec.category = probe.category;
    rec.target_word = probe.target_word;
    rec.prompt = prompt;
    rec.continuation = res.text;
    if (rec.continuation.starts_with(prompt))
        rec.continuation = rec.continuation.substr(prompt.size()); // echoing backend
    rec.params = params;
    rec.backend = backend.identity();
    rec.wall_ms = res.wall_ms;
    rec.raw = res.raw;
    return rec;
}

CandidateDistribution score_candidates(Backend& backend, const std::string& prompt,
                                       const GenderLexicon& lex, ScoringMode mode,
                                       const std::string& probe_id) {
    const BackendCaps caps = backend.capabilities();
    if (mode == ScoringMode::FullWord && !caps.echo_logprobs)
        throw BackendError("backend lacks echo logprobs required for full-word scoring");
    if (mode == ScoringMode::FirstToken && !caps.topk_logprobs)
        throw BackendError("backend lacks top-k logprobs required for first-token scoring");

    CandidateDistribution dist;
    dist.probe_id = probe_id;
    dist.scoring_mode = mode;
    const std::size_t n = lex.size();
    dist.probs_f.assign(n, 0.0);
    dist.probs_m.assign(n, 0.0);

    TopKResult topk;
    if (mode == ScoringMode::FirstToken) {
        topk = backend.next_token_topk(prompt, 20);
        if (topk.truncated)
            dist.warnings.push_back("first-token top-k truncated; absent mass treated as 0");
    }

    const auto score_word = [&](const std::string& word) {
        double p = 0.0;
        auto variants = surface_forms(word);
        variants.erase(std::unique(variants.begin(), variants.end()), variants.end());
        for (const auto& v : variants)
            p += mode == ScoringMode::FullWord ? full_word_prob(backend, prompt, v)
                                               : first_token_prob(topk, v);
        return p;
    };

    for (std::size_t i = 0; i < n; ++i) {
        dist.probs_f[i] = score_word(lex.pairs[i].first);
        dist.probs_m[i] = score_word(lex.pairs[i].second);
    }
    if (dist.mass_f() <= 0.0 && dist.mass_m() <= 0.0) {
        dist.missing = true;
        dist.warnings.push_back("zero candidate mass on both sides; probe marked missing");
    }
    return dist;
}

} // namespace biasprobe
