#include "biasprobe/pipeline.hpp"

#include "biasprobe/errors.hpp"
#include "biasprobe/jsonl.hpp"
#include "biasprobe/review.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace biasprobe;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = FIXTURES_DIR;
const std::string kCli = BIASPROBE_CLI;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json scripted_config(const std::string& out_dir) {
    nlohmann::json j;
    j["backend"] = {{"kind", "mock"},
                    {"mock_file", kFixtures + "/mock_scripted.json"},
                    {"parallelism", 2}};
    j["strategies"] = {
        {"template", {{"enabled", true}, {"targets", {kFixtures + "/targets_mini.txt"}}}},
        {"natural", {{"enabled", true}, {"corpus_path", kFixtures + "/sts_fixture.tsv"}}},
    };
    j["out_dir"] = out_dir;
    return j;
}

RunConfig load_from_json(const nlohmann::json& j) { return parse_run_config(j, "test-config"); }

int run_cli(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::path("/tmp") / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
};

} // namespace

TEST_CASE("full pipeline over the scripted mock") {
    TempDir dir("biasprobe_pipe_full");
    const RunConfig cfg = load_from_json(scripted_config(dir.path.string()));
    std::ostringstream log;

    run_stages(cfg, {Stage::GenProbes, Stage::Probe, Stage::Score, Stage::Classify}, log);
    CHECK(file_exists(dir.path / "probes.jsonl"));
    CHECK(file_exists(dir.path / "generations.jsonl"));
    CHECK(file_exists(dir.path / "distributions.jsonl"));
    CHECK(file_exists(dir.path / "labels.jsonl"));

    const auto probes = read_jsonl(dir.path / "probes.jsonl");
    CHECK(probes.lines.size() == 3 + 18); // mini targets + natural fixture
    CHECK(probes.config_hash == cfg.config_hash);

    // one continuation carries both genders, so report is blocked until review
    CHECK_THROWS_AS(run_stage(cfg, Stage::Report, log), PendingReviewError);

    run_stage(cfg, Stage::ReviewExport, log);
    auto items = read_review_file(review_queue_path(cfg));
    REQUIRE(items.size() == 1);
    CHECK(items[0].probe_id == "nat-0009-s1");
    CHECK(items[0].continuation == "she told him to wait");
    items[0].resolution = LabelKind::Female;
    write_review_file(items, review_queue_path(cfg));
    run_stage(cfg, Stage::ReviewApply, log);
    run_stage(cfg, Stage::Report, log);

    const auto report = nlohmann::json::parse(read_file(dir.path / "report.json"));
    CHECK(report.at("strategies").size() == 2);
    CHECK(report.at("per_input").size() == 21);
    CHECK(report.at("excluded_total") == 1); // the zero-mass skiing probe
    CHECK(report.at("meta").at("generated_at") == ""); // deterministic under mock
    CHECK(report.at("meta").at("person_terms").size() == 5);

    // template strategy: running->Female, sewing->Neutral, baseball->Male
    const auto& tpl = report.at("strategies").at(0);
    CHECK(tpl.at("strategy") == "template");
    CHECK(tpl.at("D_f") == 1);
    CHECK(tpl.at("D_m") == 1);
    CHECK(tpl.at("D_n") == 1);

    // natural strategy: resolved Female + paper replay Female + skiing Nonsense
    const auto& nat = report.at("strategies").at(1);
    CHECK(nat.at("D_f") == 2);
    CHECK(nat.at("D_ns") == 1);
    CHECK(nat.at("excluded_missing") == 1);

    for (const char* name :
         {"summary.csv", "per_input.csv", "gender_attribute_ratio.svg", "co_occurrence_ratio.svg",
          "jsd_by_strategy.svg", "jsd_targets_hobby.svg", "case_study.svg"})
        CHECK(file_exists(dir.path / name));

    // the sewing probe is female-skewed, so it leads the case study panel
    const std::string cases = read_file(dir.path / "case_study.svg");
    CHECK(cases.find("tpl-hobby-002-sewing") != std::string::npos);
}

TEST_CASE("stages are idempotent and resumable") {
    TempDir dir("biasprobe_pipe_resume");
    const RunConfig cfg = load_from_json(scripted_config(dir.path.string()));
    std::ostringstream log;

    run_stages(cfg, {Stage::GenProbes, Stage::Probe, Stage::Score, Stage::Classify}, log);
    const std::string probes1 = read_file(dir.path / "probes.jsonl");
    const std::string gens1 = read_file(dir.path / "generations.jsonl");
    const std::string dists1 = read_file(dir.path / "distributions.jsonl");
    const std::string labels1 = read_file(dir.path / "labels.jsonl");

    SUBCASE("re-running with unchanged inputs is byte-identical") {
        run_stages(cfg, {Stage::GenProbes, Stage::Probe, Stage::Score, Stage::Classify}, log);
        CHECK(read_file(dir.path / "probes.jsonl") == probes1);
        CHECK(read_file(dir.path / "generations.jsonl") == gens1);
        CHECK(read_file(dir.path / "distributions.jsonl") == dists1);
        CHECK(read_file(dir.path / "labels.jsonl") == labels1);
    }

    SUBCASE("a truncated artifact resumes by probe id") {
        // drop the last 5 lines to simulate an interrupted live run
        std::istringstream in(gens1);
        std::string line, truncated;
        int kept = 0;
        while (std::getline(in, line) && kept < 16) {
            truncated += line + "\n";
            ++kept;
        }
        std::ofstream(dir.path / "generations.jsonl") << truncated;
        run_stage(cfg, Stage::Probe, log);
        CHECK(read_file(dir.path / "generations.jsonl") == gens1);
    }

    SUBCASE("human resolutions survive a classify re-run") {
        run_stage(cfg, Stage::ReviewExport, log);
        auto items = read_review_file(review_queue_path(cfg));
        items[0].resolution = LabelKind::Female;
        write_review_file(items, review_queue_path(cfg));
        run_stage(cfg, Stage::ReviewApply, log);
        const std::string resolved = read_file(dir.path / "labels.jsonl");
        run_stage(cfg, Stage::Classify, log);
        CHECK(read_file(dir.path / "labels.jsonl") == resolved);
    }
}

TEST_CASE("rate-limited parallel probing keeps artifact order") {
    TempDir dir("biasprobe_pipe_rate");
    nlohmann::json j = scripted_config(dir.path.string());
    j["backend"]["parallelism"] = 4;
    j["backend"]["rate_limit_per_s"] = 500.0;
    const RunConfig cfg = load_from_json(j);
    std::ostringstream log;
    run_stages(cfg, {Stage::GenProbes, Stage::Probe}, log);

    const auto probes = read_jsonl(dir.path / "probes.jsonl");
    const auto gens = read_jsonl(dir.path / "generations.jsonl");
    REQUIRE(probes.lines.size() == gens.lines.size());
    for (std::size_t i = 0; i < probes.lines.size(); ++i)
        CHECK(probes.lines[i].at("id") == gens.lines[i].at("probe_id"));
}

TEST_CASE("report refuses artifacts from a different configuration") {
    TempDir dir("biasprobe_pipe_hash");
    const RunConfig cfg = load_from_json(scripted_config(dir.path.string()));
    std::ostringstream log;
    run_stages(cfg, {Stage::GenProbes, Stage::Probe}, log);

    nlohmann::json altered = scripted_config(dir.path.string());
    altered["instruction"] = "Finish the sentence";
    const RunConfig cfg2 = load_from_json(altered);
    CHECK(cfg2.config_hash != cfg.config_hash);
    CHECK_THROWS_AS(run_stage(cfg2, Stage::Score, log), ConfigError);
}

TEST_CASE("llm-generated strategy flows through gen-probes") {
    TempDir dir("biasprobe_pipe_llm");
    nlohmann::json j;
    j["backend"] = {{"kind", "mock"}, {"mock_file", kFixtures + "/mock_llmgen.json"}};
    j["strategies"] = {
        {"template", {{"enabled", false}}},
        {"llm_generated", {{"enabled", true}, {"count", 4}}},
    };
    j["out_dir"] = dir.path.string();
    const RunConfig cfg = load_from_json(j);
    std::ostringstream log;
    run_stage(cfg, Stage::GenProbes, log);

    const auto probes = read_jsonl(dir.path / "probes.jsonl");
    REQUIRE(probes.lines.size() == 4);
    CHECK(probes.lines[0].at("id") == "llm-0001");
    CHECK(probes.lines[0].at("meta").at("generation_round") == 1);
    CHECK(read_file(dir.path / "llm_flagged.txt") == "My friend really likes iced tea\n");
    CHECK(log.str().find("dropped gendered statement") != std::string::npos);
}

TEST_CASE("config validation errors") {
    CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), ConfigError);

    nlohmann::json bad = scripted_config("/tmp/x");
    bad["scoring_mode"] = "mystery";
    CHECK_THROWS_AS(load_from_json(bad), ConfigError);

    nlohmann::json unknown = scripted_config("/tmp/x");
    unknown["instrcution"] = "typo";
    CHECK_THROWS_AS(load_from_json(unknown), ConfigError);

    nlohmann::json neg = scripted_config("/tmp/x");
    neg["decoding"] = {{"max_new_tokens", 0}};
    CHECK_THROWS_AS(load_from_json(neg), ConfigError);

    // defaults reproduce the reference setup
    nlohmann::json minimal;
    minimal["backend"] = {{"kind", "mock"}, {"mock_file", kFixtures + "/mock_uniform.json"}};
    const RunConfig cfg = load_from_json(minimal);
    CHECK(cfg.instruction == "Complete the sentence");
    CHECK(cfg.decoding.max_new_tokens == 50);
    CHECK(cfg.prompt_separator == "\n");
    CHECK(cfg.scoring_mode == ScoringMode::FullWord);
}

TEST_CASE("config hash ignores the output directory") {
    nlohmann::json a = scripted_config("/tmp/dir_a");
    nlohmann::json b = scripted_config("/tmp/dir_b");
    CHECK(load_from_json(a).config_hash == load_from_json(b).config_hash);
    a["instruction"] = "Something else";
    CHECK(load_from_json(a).config_hash != load_from_json(b).config_hash);
}

TEST_CASE("cli exit codes") {
    TempDir dir("biasprobe_cli_run");
    const std::string config_path = (dir.path / "config.json").string();
    std::ofstream(config_path) << scripted_config((dir.path / "out").string()).dump(2);

    CHECK(run_cli("gen-probes --config " + config_path) == 0);
    CHECK(run_cli("probe --config " + config_path) == 0);
    CHECK(run_cli("score --config " + config_path) == 0);
    CHECK(run_cli("classify --config " + config_path) == 0);
    // pending review blocks the report with exit code 4
    CHECK(run_cli("report --config " + config_path) == 4);
    CHECK(run_cli("review export --config " + config_path) == 0);

    RunConfig cfg = load_from_json(scripted_config((dir.path / "out").string()));
    auto items = read_review_file(review_queue_path(cfg));
    for (auto& item : items) item.resolution = LabelKind::Neutral;
    write_review_file(items, review_queue_path(cfg));

    CHECK(run_cli("review apply --config " + config_path) == 0);
    CHECK(run_cli("report --config " + config_path) == 0);
    CHECK(file_exists(dir.path / "out" / "report.json"));

    // config errors exit with 2
    const std::string bad_path = (dir.path / "bad.json").string();
    std::ofstream(bad_path) << "{ not json";
    CHECK(run_cli("gen-probes --config " + bad_path) == 2);

    // missing prior artifacts exit with 2
    TempDir empty("biasprobe_cli_empty");
    const std::string fresh = (empty.path / "config.json").string();
    std::ofstream(fresh) << scripted_config((empty.path / "out").string()).dump(2);
    CHECK(run_cli("probe --config " + fresh) == 2);

    // --out overrides the configured output directory
    CHECK(run_cli("gen-probes --config " + config_path + " --out " + (dir.path / "alt").string()) == 0);
    CHECK(file_exists(dir.path / "alt" / "probes.jsonl"));

    // backend failures exit with 3 (llm generation needs the backend)
    nlohmann::json unreachable;
    unreachable["backend"] = {{"kind", "http"},
                              {"base_url", "http://127.0.0.1:9"},
                              {"model", "x"},
                              {"retries", 1},
                              {"connect_timeout_s", 0.2}};
    unreachable["strategies"] = {{"template", {{"enabled", false}}},
                                 {"llm_generated", {{"enabled", true}, {"count", 1}}}};
    unreachable["out_dir"] = (dir.path / "unreachable").string();
    const std::string unreachable_path = (dir.path / "unreachable.json").string();
    std::ofstream(unreachable_path) << unreachable.dump(2);
    CHECK(run_cli("gen-probes --config " + unreachable_path) == 3);
}
