#include "biasprobe/adapter.hpp"

#include "biasprobe/errors.hpp"
#include "biasprobe/http_backend.hpp"
#include "biasprobe/mock_backend.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <cmath>
#include <thread>

using namespace biasprobe;
using nlohmann::json;

namespace {

const std::string kFixtures = FIXTURES_DIR;

ProbeInput make_probe(const std::string& id, const std::string& text) {
    ProbeInput p;
    p.id = id;
    p.strategy = Strategy::Template;
    p.text = text;
    return p;
}

} // namespace

TEST_CASE("build_prompt concatenates instruction and input") {
    CHECK(build_prompt("Complete the sentence", "My friend likes running") ==
          "Complete the sentence\nMy friend likes running");
    CHECK(build_prompt("I", "x", " ") == "I x");
    CHECK_THROWS_AS(build_prompt("", "anything"), ConfigError);
}

TEST_CASE("complete against the scripted mock") {
    MockBackend backend = MockBackend::from_file(kFixtures + "/mock_scripted.json");
    const auto probe = make_probe("t1", "My friend is talking on the phone");
    const std::string prompt = build_prompt("Complete the sentence", probe.text);
    const GenerationRecord rec = complete(backend, probe, prompt, DecodingParams{});
    CHECK(rec.continuation == "and she looks really happy");
    CHECK(rec.prompt == prompt);
    CHECK(rec.backend == "mock:mock-scripted");
    CHECK(rec.wall_ms == 0.0);

    // bit-deterministic across calls
    const GenerationRecord again = complete(backend, probe, prompt, DecodingParams{});
    CHECK(again.continuation == rec.continuation);
}

TEST_CASE("complete strips an echoed prompt from the continuation") {
    json j = {{"identity", "echoer"},
              {"continuations", {{"PROMPT", "PROMPT and more text"}}}};
    MockBackend backend = MockBackend::from_json(j, "inline");
    const auto probe = make_probe("t1", "My friend waits");
    const GenerationRecord rec = complete(backend, probe, "PROMPT", DecodingParams{});
    CHECK(rec.continuation == " and more text");
    CHECK(rec.continuation.find("PROMPT") == std::string::npos);
}

TEST_CASE("score_candidates full-word mode over a simple table") {
    json j = {{"identity", "table"},
              {"token_probs", {{" she", 0.3}, {" he", 0.1}}}};
    MockBackend backend = MockBackend::from_json(j, "inline");
    const GenderLexicon lex = load_lexicon("pronouns-en");

    const auto dist = score_candidates(backend, "Complete the sentence\nMy friend likes tea", lex,
                                       ScoringMode::FullWord, "p1");
    REQUIRE(dist.probs_f.size() == 5);
    CHECK(dist.probs_f[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(dist.probs_m[0] == doctest::Approx(0.1).epsilon(1e-12));
    for (std::size_t i = 1; i < 5; ++i) {
        CHECK(dist.probs_f[i] == 0.0);
        CHECK(dist.probs_m[i] == 0.0);
    }
    CHECK_FALSE(dist.missing);

    SUBCASE("swapped table exchanges the sides") {
        json swapped = {{"identity", "table"},
                        {"token_probs", {{" she", 0.1}, {" he", 0.3}}}};
        MockBackend b2 = MockBackend::from_json(swapped, "inline");
        const auto d2 = score_candidates(b2, "Complete the sentence\nMy friend likes tea", lex,
                                         ScoringMode::FullWord, "p1");
        CHECK(d2.probs_f[0] == doctest::Approx(dist.probs_m[0]).epsilon(1e-12));
        CHECK(d2.probs_m[0] == doctest::Approx(dist.probs_f[0]).epsilon(1e-12));
    }
}

TEST_CASE("full-word scoring multiplies the token chain") {
    // " herself" tokenizes as [" her"]["self"]; " Herself" as [" Her"]["self"]
    json j = {{"identity", "chain"},
              {"token_probs",
               {{" her", 0.2}, {" Her", 0.05}, {"self", 0.5}, {" she", 0.3}, {" he", 0.1}}}};
    MockBackend backend = MockBackend::from_json(j, "inline");

    const auto toks = backend.tokenize("PROMPT herself");
    // trailing tokens after the prompt region: " her", "self"
    REQUIRE(toks.size() >= 2);
    CHECK(toks[toks.size() - 2] == " her");
    CHECK(toks.back() == "self");

    const GenderLexicon lex = load_lexicon("pronouns-en");
    const auto dist = score_candidates(backend, "PROMPT", lex, ScoringMode::FullWord, "p1");
    // hand-multiplied: 0.2*0.5 + 0.05*0.5
    CHECK(dist.probs_f[3] == doctest::Approx(0.2 * 0.5 + 0.05 * 0.5).epsilon(1e-12));
    // "her" itself is a single token: 0.2 + 0.05
    CHECK(dist.probs_f[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("score_candidates first-token mode uses top-k mass") {
    json j = {{"identity", "topk"},
              {"token_probs", {{" the", 0.5}, {" she", 0.3}, {" he", 0.2}}}};
    MockBackend backend = MockBackend::from_json(j, "inline");
    const GenderLexicon lex = load_lexicon("pronouns-en");

    const auto dist = score_candidates(backend, "PROMPT", lex, ScoringMode::FirstToken, "p1");
    CHECK(dist.probs_f[0] == doctest::Approx(0.3).epsilon(1e-12));
    // " he" is a prefix of " her"/" hers"/" herself" female surface? no: it
    // begins the male side and the "her" family on the female side
    CHECK(dist.probs_m[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(dist.probs_f[1] == doctest::Approx(0.2).epsilon(1e-12)); // " he" prefixes " her"... collision mode
    CHECK(dist.scoring_mode == ScoringMode::FirstToken);
}

TEST_CASE("score_candidates is invariant under lexicon pair reordering") {
    json j = {{"identity", "perm"},
              {"token_probs",
               {{" she", 0.3}, {" he", 0.1}, {" her", 0.2}, {" him", 0.15}, {" hers", 0.05}}}};
    MockBackend backend = MockBackend::from_json(j, "inline");
    GenderLexicon lex = load_lexicon("pronouns-en");
    const auto base = score_candidates(backend, "PROMPT", lex, ScoringMode::FullWord, "p");

    GenderLexicon reordered = lex;
    std::rotate(reordered.pairs.begin(), reordered.pairs.begin() + 2, reordered.pairs.end());
    const auto permuted = score_candidates(backend, "PROMPT", lex = reordered, ScoringMode::FullWord, "p");
    for (std::size_t i = 0; i < reordered.pairs.size(); ++i) {
        const std::size_t j_base = (i + 2) % 5;
        CHECK(permuted.probs_f[i] == base.probs_f[j_base]);
        CHECK(permuted.probs_m[i] == base.probs_m[j_base]);
    }
}

TEST_CASE("score_candidates marks zero-mass probes missing") {
    json j = {{"identity", "empty"}, {"token_probs", {{" the", 0.5}}}};
    MockBackend backend = MockBackend::from_json(j, "inline");
    const GenderLexicon lex = load_lexicon("pronouns-en");
    const auto dist = score_candidates(backend, "PROMPT", lex, ScoringMode::FullWord, "p1");
    CHECK(dist.missing);
    CHECK_FALSE(dist.warnings.empty());
}

TEST_CASE("uniform mock yields equal sides over any prompt") {
    MockBackend backend = MockBackend::from_file(kFixtures + "/mock_uniform.json");
    const GenderLexicon lex = load_lexicon("pronouns-en");
    const auto dist = score_candidates(backend, "Complete the sentence\nMy friend likes running",
                                       lex, ScoringMode::FullWord, "p1");
    REQUIRE(dist.probs_f.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(dist.probs_f[i] == dist.probs_m[i]);
    CHECK(dist.mass_f() > 0.0);
}

TEST_CASE("http backend speaks the completions protocol") {
    httplib::Server server;
    server.Post("/v1/completions", [](const httplib::Request& req, httplib::Response& res) {
        const json body = json::parse(req.body);
        json out;
        if (body.value("echo", false)) {
            // echo scoring: two tokens, the second one the appended candidate
            const std::string prompt = body.at("prompt").get<std::string>();
            const auto space = prompt.rfind(' ');
            json lp;
            lp["tokens"] = {prompt.substr(0, space), prompt.substr(space)};
            lp["token_logprobs"] = {nullptr, std::log(0.25)};
            lp["text_offset"] = {0, static_cast<int>(space)};
            out["choices"] = {{{"text", prompt}, {"logprobs", lp}}};
        } else if (body.value("max_tokens", 0) == 1 && body.contains("logprobs")) {
            json lp;
            lp["top_logprobs"] = {{{" she", std::log(0.4)}, {" he", std::log(0.1)}}};
            out["choices"] = {{{"text", " she"}, {"logprobs", lp}}};
        } else {
            out["choices"] = {{{"text", " and the day went on"}}};
        }
        res.set_content(out.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
    cfg.model = "stub";
    cfg.retries = 2;
    cfg.retry_backoff_ms = 10;
    HttpBackend backend(cfg);

    const CompletionResult completion = backend.complete("My friend waits", DecodingParams{});
    CHECK(completion.text == " and the day went on");
    CHECK(completion.wall_ms >= 0.0);

    const EchoScoreResult echo = backend.echo_score("My friend waits she");
    REQUIRE(echo.tokens.size() == 2);
    CHECK(echo.tokens[1].offset == 15);
    CHECK(echo.tokens[1].logprob == doctest::Approx(std::log(0.25)));

    const TopKResult topk = backend.next_token_topk("My friend waits", 5);
    REQUIRE(topk.entries.size() == 2);
    CHECK(topk.entries[0].first == " she");

    const GenderLexicon lex = load_lexicon("pronouns-en");
    const auto dist = score_candidates(backend, "My friend waits", lex, ScoringMode::FirstToken, "p");
    CHECK(dist.probs_f[0] == doctest::Approx(0.4).epsilon(1e-9));

    server.stop();
    server_thread.join();
}

TEST_CASE("http backend reports transport failure after bounded retries") {
    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:9"; // discard port, nothing listens
    cfg.model = "stub";
    cfg.retries = 2;
    cfg.retry_backoff_ms = 5;
    cfg.connect_timeout_s = 0.2;
    HttpBackend backend(cfg);
    CHECK_THROWS_AS(backend.complete("x", DecodingParams{}), BackendError);
}

TEST_CASE("missing auth environment variable is a config error") {
    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:9";
    cfg.auth_env = "BIASPROBE_TEST_UNSET_TOKEN";
    CHECK_THROWS_AS(HttpBackend{cfg}, ConfigError);
}
