#include "biasprobe/report.hpp"

#include "biasprobe/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace biasprobe;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

GenerationRecord rec(const std::string& id, Strategy s, const std::string& continuation) {
    GenerationRecord r;
    r.probe_id = id;
    r.strategy = s;
    r.prompt = "Complete the sentence\nMy friend waits";
    r.continuation = continuation;
    r.backend = "mock:test";
    return r;
}

SentenceLabel lab(const std::string& id, LabelKind k) {
    SentenceLabel l;
    l.probe_id = id;
    l.label = k;
    return l;
}

CandidateDistribution dist(const std::string& id, std::vector<double> f, std::vector<double> m) {
    CandidateDistribution d;
    d.probe_id = id;
    d.probs_f = std::move(f);
    d.probs_m = std::move(m);
    return d;
}

ReportMeta meta() {
    ReportMeta m;
    m.backend_identity = "mock:test";
    m.instruction = "Complete the sentence";
    m.prompt_separator = "\n";
    m.lexicon_name = "pronouns-en";
    m.lexicon_pairs = load_lexicon("pronouns-en").pairs;
    m.config_hash = "deadbeefdeadbeef";
    return m;
}

} // namespace

TEST_CASE("aggregate joins by probe id and partitions by strategy") {
    const std::vector<GenerationRecord> records = {
        rec("a", Strategy::Template, "and she looks really happy"),
        rec("b", Strategy::Template, "and he waved"),
        rec("c", Strategy::Natural, "and is very good at it"),
        rec("d", Strategy::Natural, ""),
    };
    const std::vector<SentenceLabel> labels = {
        lab("a", LabelKind::Female), lab("b", LabelKind::Male), lab("c", LabelKind::Neutral),
        lab("d", LabelKind::Nonsense)};
    const std::vector<CandidateDistribution> dists = {
        dist("a", {0.3}, {0.1}), dist("b", {0.1}, {0.3}), dist("c", {0.2}, {0.2}),
        dist("d", {0.0}, {0.0})};

    const BiasReport report = aggregate(meta(), records, labels, dists);
    REQUIRE(report.strategies.size() == 2);
    CHECK(report.strategies[0].strategy == Strategy::Template);
    CHECK(report.strategies[0].summary.counts.d_f == 1);
    CHECK(report.strategies[0].summary.counts.d_m == 1);
    CHECK(*report.strategies[0].summary.r_f == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(report.strategies[1].strategy == Strategy::Natural);
    CHECK(report.strategies[1].summary.counts.d_n == 1);
    CHECK(report.strategies[1].summary.counts.d_ns == 1);
    CHECK(report.strategies[1].summary.excluded_missing == 1);
    CHECK(report.excluded_total == 1);
    REQUIRE(report.rows.size() == 4);
    CHECK(report.rows[3].excluded);
    CHECK_FALSE(report.rows[3].f_share.has_value());

    // D_k sums equal the finalized label count per strategy
    for (const auto& s : report.strategies) {
        long rows = 0;
        for (const auto& r : report.rows)
            if (r.strategy == s.strategy) ++rows;
        CHECK(s.summary.counts.total() == rows);
    }
}

TEST_CASE("aggregate rejects unresolved and mismatched inputs") {
    const std::vector<GenerationRecord> records = {rec("a", Strategy::Template, "x")};
    SUBCASE("pending review") {
        CHECK_THROWS_AS(
            aggregate(meta(), records, {lab("a", LabelKind::NeedsReview)}, {dist("a", {1}, {1})}),
            PendingReviewError);
    }
    SUBCASE("missing label") {
        CHECK_THROWS_AS(aggregate(meta(), records, {}, {dist("a", {1}, {1})}), ConfigError);
    }
    SUBCASE("missing distribution") {
        CHECK_THROWS_AS(aggregate(meta(), records, {lab("a", LabelKind::Neutral)}, {}), ConfigError);
    }
    SUBCASE("empty run is fine") {
        const BiasReport report = aggregate(meta(), {}, {}, {});
        CHECK(report.strategies.empty());
        CHECK(report.rows.empty());
    }
}

TEST_CASE("emit_tables writes deterministic tables") {
    const std::string out_dir = "/tmp/biasprobe_report_test";
    std::filesystem::create_directories(out_dir);

    const std::vector<GenerationRecord> records = {
        rec("a", Strategy::Template, "and she looks really happy"),
        rec("b", Strategy::Template, "and is very good at it")};
    const std::vector<SentenceLabel> labels = {lab("a", LabelKind::Female),
                                               lab("b", LabelKind::Neutral)};
    const std::vector<CandidateDistribution> dists = {dist("a", {0.3}, {0.1}),
                                                      dist("b", {0.2}, {0.2})};
    const BiasReport report = aggregate(meta(), records, labels, dists);

    emit_tables(report, out_dir);
    const std::string summary1 = read_file(out_dir + "/summary.csv");
    const std::string per_input1 = read_file(out_dir + "/per_input.csv");
    const std::string json1 = read_file(out_dir + "/report.json");

    emit_tables(report, out_dir);
    CHECK(read_file(out_dir + "/summary.csv") == summary1);
    CHECK(read_file(out_dir + "/per_input.csv") == per_input1);
    CHECK(read_file(out_dir + "/report.json") == json1);

    CHECK(summary1.find("strategy,D_f,D_m,D_n,D_ns,R_f,R_m,jsd_mean,excluded") == 0);
    // shares: a = 0.3/0.4 = 0.75, b = 0.2/0.4 = 0.5; mean = 0.625
    CHECK(summary1.find("template,1,0,1,0,0.625,0.375,") != std::string::npos);
    CHECK(per_input1.find("probe_id,strategy,label,f_share,jsd") == 0);
    CHECK(per_input1.find("a,template,Female,0.75,") != std::string::npos);

    // report.json carries full provenance
    const auto j = nlohmann::json::parse(json1);
    CHECK(j.at("schema_version") == 1);
    CHECK(j.at("meta").at("config_hash") == "deadbeefdeadbeef");
    CHECK(j.at("per_input").size() == 2);
}

TEST_CASE("emit_charts renders the analog figures") {
    const std::string out_dir = "/tmp/biasprobe_chart_test";
    std::filesystem::create_directories(out_dir);

    std::vector<GenerationRecord> records = {
        rec("a", Strategy::Template, "and she looks really happy"),
        rec("b", Strategy::Template, "and is very good at it")};
    records[0].category = "Hobby";
    records[0].target_word = "sewing";
    records[1].category = "Hobby";
    records[1].target_word = "running";
    const std::vector<SentenceLabel> labels = {lab("a", LabelKind::Female),
                                               lab("b", LabelKind::Neutral)};
    const std::vector<CandidateDistribution> dists = {dist("a", {0.3, 0.1}, {0.1, 0.1}),
                                                      dist("b", {0.2, 0.2}, {0.2, 0.2})};
    BiasReport report = aggregate(meta(), records, labels, dists);
    emit_charts(report, out_dir, 6);

    const std::string fig1 = read_file(out_dir + "/gender_attribute_ratio.svg");
    CHECK(fig1.find("<svg") == 0);
    CHECK(fig1.find("data-series=\"D_f\"") != std::string::npos);

    const std::string fig2 = read_file(out_dir + "/co_occurrence_ratio.svg");
    CHECK(fig2.find("data-series=\"R_f\"") != std::string::npos);
    CHECK(fig2.find("data-series=\"R_m\"") != std::string::npos);

    const std::string fig3 = read_file(out_dir + "/jsd_by_strategy.svg");
    CHECK(fig3.find("data-series=\"jsd_mean\"") != std::string::npos);

    const std::string targets = read_file(out_dir + "/jsd_targets_hobby.svg");
    CHECK(targets.find("data-key=\"sewing\"") != std::string::npos);
    CHECK(targets.find("data-key=\"running\"") != std::string::npos);

    const std::string cases = read_file(out_dir + "/case_study.svg");
    CHECK(cases.find("data-series=\"prob_f\"") != std::string::npos);

    // single-strategy run renders charts for that strategy only
    CHECK(fig2.find("data-key=\"template\"") != std::string::npos);
    CHECK(fig2.find("data-key=\"natural\"") == std::string::npos);

    // stacked ratios sum to 1 per bar
    std::size_t pos = 0;
    double sum = 0.0;
    while ((pos = fig1.find("data-value=\"", pos)) != std::string::npos) {
        pos += 12;
        sum += std::stod(fig1.substr(pos, fig1.find('"', pos) - pos));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}
