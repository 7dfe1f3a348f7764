#include "biasprobe/report.hpp"

#include "biasprobe/charts.hpp"
#include "biasprobe/errors.hpp"
#include "biasprobe/text.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace biasprobe {

namespace {

using nlohmann::ordered_json;

const char* kColorFemale = "#d4679f";
const char* kColorMale = "#4a7fb5";
const char* kColorNeutral = "#9aa0a6";
const char* kColorNonsense = "#d9b44a";
const char* kColorJsd = "#7a5fa8";

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

std::string opt_g9(const std::optional<double>& v) { return v ? format_g9(*v) : std::string(); }

ordered_json summary_json(const StrategySummary& s) {
    ordered_json j;
    j["strategy"] = to_string(s.strategy);
    j["D_f"] = s.summary.counts.d_f;
    j["D_m"] = s.summary.counts.d_m;
    j["D_n"] = s.summary.counts.d_n;
    j["D_ns"] = s.summary.counts.d_ns;
    j["R_f"] = s.summary.r_f ? ordered_json(*s.summary.r_f) : ordered_json(nullptr);
    j["R_m"] = s.summary.r_m ? ordered_json(*s.summary.r_m) : ordered_json(nullptr);
    if (s.summary.r_f_pooled) {
        j["R_f_pooled"] = *s.summary.r_f_pooled;
        j["R_m_pooled"] = *s.summary.r_m_pooled;
    }
    j["jsd_mean"] = s.summary.jsd_mean ? ordered_json(*s.summary.jsd_mean) : ordered_json(nullptr);
    j["excluded_missing"] = s.summary.excluded_missing;
    j["excluded_jsd_only"] = s.summary.excluded_jsd_only;
    ordered_json per_input = ordered_json::array();
    for (const auto& [id, v] : s.summary.jsd_per_input) per_input.push_back({{"probe_id", id}, {"jsd", v}});
    j["jsd_per_input"] = per_input;
    return j;
}

struct CaseStudyRow {
    const PerInputRow* row;
    double jsd_value;
};

} // namespace

BiasReport aggregate(const ReportMeta& meta, const std::vector<GenerationRecord>& records,
                     const std::vector<SentenceLabel>& labels,
                     const std::vector<CandidateDistribution>& dists, bool pooled_variant) {
    std::map<std::string, const SentenceLabel*> label_by_id;
    for (const auto& l : labels) {
        if (!label_by_id.emplace(l.probe_id, &l).second)
            throw ConfigError("duplicate label for probe " + l.probe_id);
    }
    std::map<std::string, const CandidateDistribution*> dist_by_id;
    for (const auto& d : dists) {
        if (!dist_by_id.emplace(d.probe_id, &d).second)
            throw ConfigError("duplicate distribution for probe " + d.probe_id);
    }

    BiasReport report;
    report.meta = meta;

    std::map<Strategy, std::vector<SentenceLabel>> labels_by_strategy;
    std::map<Strategy, std::vector<CandidateDistribution>> dists_by_strategy;
    std::vector<Strategy> order;
    std::set<std::string> seen_ids;

    for (const auto& rec : records) {
        if (!seen_ids.insert(rec.probe_id).second)
            throw ConfigError("duplicate generation record for probe " + rec.probe_id);
        const auto lit = label_by_id.find(rec.probe_id);
        if (lit == label_by_id.end()) throw ConfigError("no label for probe " + rec.probe_id);
        const SentenceLabel& label = *lit->second;
        if (label.label == LabelKind::NeedsReview)
            throw PendingReviewError("unresolved NeedsReview label for probe " + rec.probe_id);
        const auto dit = dist_by_id.find(rec.probe_id);
        if (dit == dist_by_id.end()) throw ConfigError("no distribution for probe " + rec.probe_id);
        const CandidateDistribution& dist = *dit->second;

        if (std::find(order.begin(), order.end(), rec.strategy) == order.end())
            order.push_back(rec.strategy);
        labels_by_strategy[rec.strategy].push_back(label);
        dists_by_strategy[rec.strategy].push_back(dist);

        PerInputRow row;
        row.probe_id = rec.probe_id;
        row.strategy = rec.strategy;
        row.category = rec.category;
        row.target_word = rec.target_word;
        row.prompt = rec.prompt;
        row.continuation = rec.continuation;
        row.label = label.label;
        row.probs_f = dist.probs_f;
        row.probs_m = dist.probs_m;
        const double mf = dist.mass_f(), mm = dist.mass_m();
        if (dist.missing || (mf <= 0.0 && mm <= 0.0)) {
            row.excluded = true;
            ++report.excluded_total;
        } else {
            row.f_share = female_share(dist);
            if (mf > 0.0 && mm > 0.0) row.jsd_value = jsd(dist);
        }
        report.rows.push_back(std::move(row));
    }

    for (const Strategy s : order) {
        StrategySummary entry;
        entry.strategy = s;
        entry.summary = summarize(labels_by_strategy[s], dists_by_strategy[s], pooled_variant);
        report.strategies.push_back(std::move(entry));
    }
    return report;
}

void emit_tables(const BiasReport& report, const std::string& out_dir) {
    ordered_json j;
    j["schema_version"] = 1;
    ordered_json meta;
    meta["backend"] = report.meta.backend_identity;
    ordered_json decoding;
    decoding["max_new_tokens"] = report.meta.decoding.max_new_tokens;
    decoding["temperature"] = report.meta.decoding.temperature;
    decoding["top_p"] = report.meta.decoding.top_p;
    decoding["seed"] =
        report.meta.decoding.seed ? ordered_json(*report.meta.decoding.seed) : ordered_json(nullptr);
    meta["decoding"] = decoding;
    meta["instruction"] = report.meta.instruction;
    meta["prompt_separator"] = report.meta.prompt_separator;
    ordered_json lex;
    lex["name"] = report.meta.lexicon_name;
    ordered_json pairs = ordered_json::array();
    for (const auto& [f, m] : report.meta.lexicon_pairs) pairs.push_back({f, m});
    lex["pairs"] = pairs;
    meta["lexicon"] = lex;
    meta["scoring_mode"] = to_string(report.meta.scoring_mode);
    meta["generated_at"] = report.meta.generated_at;
    meta["config_hash"] = report.meta.config_hash;
    if (!report.meta.person_terms.empty()) meta["person_terms"] = report.meta.person_terms;
    if (!report.meta.config_echo.is_null()) meta["config"] = report.meta.config_echo;
    j["meta"] = meta;

    ordered_json strategies = ordered_json::array();
    for (const auto& s : report.strategies) strategies.push_back(summary_json(s));
    j["strategies"] = strategies;

    ordered_json rows = ordered_json::array();
    for (const auto& r : report.rows) {
        ordered_json row;
        row["probe_id"] = r.probe_id;
        row["strategy"] = to_string(r.strategy);
        if (!r.category.empty()) row["category"] = r.category;
        if (!r.target_word.empty()) row["target_word"] = r.target_word;
        row["prompt"] = r.prompt;
        row["continuation"] = r.continuation;
        row["label"] = to_string(r.label);
        row["f_share"] = r.f_share ? ordered_json(*r.f_share) : ordered_json(nullptr);
        row["jsd"] = r.jsd_value ? ordered_json(*r.jsd_value) : ordered_json(nullptr);
        row["probs_f"] = r.probs_f;
        row["probs_m"] = r.probs_m;
        row["excluded"] = r.excluded;
        rows.push_back(std::move(row));
    }
    j["per_input"] = rows;
    j["excluded_total"] = report.excluded_total;

    write_text_file_atomic(out_dir + "/report.json", j.dump(2) + "\n");

    std::ostringstream summary;
    summary << "strategy,D_f,D_m,D_n,D_ns,R_f,R_m,jsd_mean,excluded\n";
    for (const auto& s : report.strategies) {
        const auto& sum = s.summary;
        summary << to_string(s.strategy) << ',' << sum.counts.d_f << ',' << sum.counts.d_m << ','
                << sum.counts.d_n << ',' << sum.counts.d_ns << ',' << opt_g9(sum.r_f) << ','
                << opt_g9(sum.r_m) << ',' << opt_g9(sum.jsd_mean) << ','
                << (sum.excluded_missing + sum.excluded_jsd_only) << "\n";
    }
    write_text_file_atomic(out_dir + "/summary.csv", summary.str());

    std::ostringstream per_input;
    per_input << "probe_id,strategy,label,f_share,jsd\n";
    for (const auto& r : report.rows) {
        per_input << csv_escape(r.probe_id) << ',' << to_string(r.strategy) << ','
                  << to_string(r.label) << ',' << opt_g9(r.f_share) << ',' << opt_g9(r.jsd_value)
                  << "\n";
    }
    write_text_file_atomic(out_dir + "/per_input.csv", per_input.str());
}

namespace {

// Stacked label-count ratios, one bar per strategy.
void chart_gender_attribute(const BiasReport& report, const std::string& path) {
    const double band = 140, margin_l = 60, margin_t = 30, plot_h = 240, margin_b = 50;
    const double width = margin_l + band * static_cast<double>(report.strategies.size()) + 180;
    SvgCanvas svg(width, margin_t + plot_h + margin_b);
    svg.text(margin_l, 18, "Gender-attribute score: label-count ratios per strategy", 13);

    for (std::size_t i = 0; i < report.strategies.size(); ++i) {
        const auto& s = report.strategies[i];
        const auto& c = s.summary.counts;
        const double total = static_cast<double>(c.total());
        const double x = margin_l + band * static_cast<double>(i) + 25;
        double y = margin_t;
        const struct {
            const char* key;
            long count;
            const char* color;
        } segs[] = {{"D_f", c.d_f, kColorFemale},
                    {"D_m", c.d_m, kColorMale},
                    {"D_n", c.d_n, kColorNeutral},
                    {"D_ns", c.d_ns, kColorNonsense}};
        for (const auto& seg : segs) {
            const double ratio = total > 0 ? static_cast<double>(seg.count) / total : 0.0;
            svg.rect(x, y, band - 50, ratio * plot_h, seg.color, seg.key, to_string(s.strategy),
                     ratio, true);
            y += ratio * plot_h;
        }
        svg.text(x + (band - 50) / 2, margin_t + plot_h + 18, to_string(s.strategy), 11, "middle");
    }
    const double lx = width - 160;
    const struct {
        const char* label;
        const char* color;
    } legend[] = {{"female", kColorFemale}, {"male", kColorMale}, {"neutral", kColorNeutral},
                  {"nonsense", kColorNonsense}};
    for (int i = 0; i < 4; ++i) {
        svg.rect(lx, margin_t + i * 20.0, 12, 12, legend[i].color);
        svg.text(lx + 18, margin_t + i * 20.0 + 10, legend[i].label, 11);
    }
    write_text_file_atomic(path, svg.str());
}

// Paired R_f / R_m bars per strategy with a 0.5 reference line.
void chart_co_occurrence(const BiasReport& report, const std::string& path) {
    const double band = 140, margin_l = 60, margin_t = 30, plot_h = 240, margin_b = 50;
    const double width = margin_l + band * static_cast<double>(report.strategies.size()) + 120;
    const double base_y = margin_t + plot_h;
    SvgCanvas svg(width, base_y + margin_b);
    svg.text(margin_l, 18, "Co-occurrence ratio: R_f vs R_m per strategy", 13);
    svg.line(margin_l, base_y - 0.5 * plot_h, width - 100, base_y - 0.5 * plot_h, "#cccccc");
    svg.text(margin_l - 6, base_y - 0.5 * plot_h + 4, "0.5", 10, "end");

    for (std::size_t i = 0; i < report.strategies.size(); ++i) {
        const auto& s = report.strategies[i];
        const double rf = s.summary.r_f.value_or(0.0);
        const double rm = s.summary.r_m.value_or(0.0);
        const double x = margin_l + band * static_cast<double>(i) + 20;
        svg.rect(x, base_y - rf * plot_h, 40, rf * plot_h, kColorFemale, "R_f",
                 to_string(s.strategy), rf, true);
        svg.rect(x + 48, base_y - rm * plot_h, 40, rm * plot_h, kColorMale, "R_m",
                 to_string(s.strategy), rm, true);
        svg.text(x + 44, base_y + 18, to_string(s.strategy), 11, "middle");
    }
    svg.rect(width - 100, margin_t, 12, 12, kColorFemale);
    svg.text(width - 82, margin_t + 10, "R_f", 11);
    svg.rect(width - 100, margin_t + 20, 12, 12, kColorMale);
    svg.text(width - 82, margin_t + 30, "R_m", 11);
    write_text_file_atomic(path, svg.str());
}

// Mean JSD per strategy, fixed [0,1] scale.
void chart_jsd(const BiasReport& report, const std::string& path) {
    const double band = 140, margin_l = 60, margin_t = 30, plot_h = 240, margin_b = 50;
    const double width = margin_l + band * static_cast<double>(report.strategies.size()) + 60;
    const double base_y = margin_t + plot_h;
    SvgCanvas svg(width, base_y + margin_b);
    svg.text(margin_l, 18, "JSD score per strategy (mean over inputs)", 13);
    for (std::size_t i = 0; i < report.strategies.size(); ++i) {
        const auto& s = report.strategies[i];
        const double v = s.summary.jsd_mean.value_or(0.0);
        const double x = margin_l + band * static_cast<double>(i) + 40;
        svg.rect(x, base_y - v * plot_h, 60, v * plot_h, kColorJsd, "jsd_mean",
                 to_string(s.strategy), v, true);
        svg.text(x + 30, base_y + 18, to_string(s.strategy), 11, "middle");
        svg.text(x + 30, base_y - v * plot_h - 6, format_g9(v), 10, "middle");
    }
    write_text_file_atomic(path, svg.str());
}

// One bar per target word of a category, per-input JSD of its template probe.
void chart_jsd_targets(const std::vector<const PerInputRow*>& rows, const std::string& category,
                       const std::string& path) {
    const double bar = 16, margin_l = 60, margin_t = 30, plot_h = 220, margin_b = 110;
    const double width = margin_l + bar * static_cast<double>(rows.size()) + 60;
    const double base_y = margin_t + plot_h;
    SvgCanvas svg(width, base_y + margin_b);
    svg.text(margin_l, 18, "Per-target JSD: " + category, 13);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto* r = rows[i];
        const double v = r->jsd_value.value_or(0.0);
        const double x = margin_l + bar * static_cast<double>(i) + 2;
        svg.rect(x, base_y - v * plot_h, bar - 4, v * plot_h, kColorJsd, "jsd_target",
                 r->target_word, v, true);
        svg.text(x + (bar - 4) / 2, base_y + 8, r->target_word, 9, "end", "#333333", -60);
    }
    write_text_file_atomic(path, svg.str());
}

// Case-study panels for the highest-JSD probes: per-word probabilities.
void chart_case_study(const BiasReport& report, const std::string& path, int k) {
    std::vector<CaseStudyRow> candidates;
    for (const auto& r : report.rows)
        if (r.jsd_value) candidates.push_back({&r, *r.jsd_value});
    std::sort(candidates.begin(), candidates.end(), [](const CaseStudyRow& a, const CaseStudyRow& b) {
        return a.jsd_value != b.jsd_value ? a.jsd_value > b.jsd_value
                                          : a.row->probe_id < b.row->probe_id;
    });
    if (static_cast<int>(candidates.size()) > k) candidates.resize(static_cast<std::size_t>(k));

    const auto& pairs = report.meta.lexicon_pairs;
    const double row_h = 14, header_h = 64, panel_pad = 18;
    const double panel_h = header_h + row_h * static_cast<double>(pairs.size()) + panel_pad;
    const double width = 760;
    SvgCanvas svg(width, 30 + panel_h * static_cast<double>(candidates.size()) + 20);
    svg.text(20, 18, "Case study: highest-JSD probes, per-word candidate probabilities", 13);

    const auto shorten = [](const std::string& s, std::size_t limit) {
        return s.size() <= limit ? s : s.substr(0, limit - 3) + "...";
    };

    double top = 30;
    for (const auto& c : candidates) {
        const auto& r = *c.row;
        svg.text(20, top + 14, r.probe_id + "  (" + to_string(r.strategy) + ")", 11, "start", "#000000");
        svg.text(20, top + 28, "prompt: " + shorten(r.prompt, 90), 10);
        svg.text(20, top + 42, "continuation: " + shorten(r.continuation, 90), 10);
        std::string stats = "f_share=" + opt_g9(r.f_share) + "  m_share=" +
                            (r.f_share ? format_g9(1.0 - *r.f_share) : "") +
                            "  jsd=" + format_g9(c.jsd_value);
        svg.text(20, top + 56, stats, 10);

        double max_p = 0.0;
        for (double v : r.probs_f) max_p = std::max(max_p, v);
        for (double v : r.probs_m) max_p = std::max(max_p, v);
        if (max_p <= 0.0) max_p = 1.0;
        const double bar_w = 160, female_x = 320, male_label_x = female_x + bar_w + 70;
        const double male_x = male_label_x + 5;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const double y = top + header_h + row_h * static_cast<double>(i);
            const double pf = i < r.probs_f.size() ? r.probs_f[i] : 0.0;
            const double pm = i < r.probs_m.size() ? r.probs_m[i] : 0.0;
            svg.text(female_x - 6, y + 9, pairs[i].first, 9, "end");
            svg.rect(female_x, y + 1, bar_w * (pf / max_p), row_h - 4, kColorFemale, "prob_f",
                     r.probe_id + ":" + pairs[i].first, pf, true);
            svg.text(male_label_x, y + 9, pairs[i].second, 9, "end");
            svg.rect(male_x, y + 1, bar_w * (pm / max_p), row_h - 4, kColorMale, "prob_m",
                     r.probe_id + ":" + pairs[i].second, pm, true);
        }
        top += panel_h;
    }
    write_text_file_atomic(path, svg.str());
}

} // namespace

void emit_charts(const BiasReport& report, const std::string& out_dir, int case_study_k) {
    if (report.strategies.empty()) return;
    chart_gender_attribute(report, out_dir + "/gender_attribute_ratio.svg");
    chart_co_occurrence(report, out_dir + "/co_occurrence_ratio.svg");
    chart_jsd(report, out_dir + "/jsd_by_strategy.svg");

    std::map<std::string, std::vector<const PerInputRow*>> by_category;
    for (const auto& r : report.rows)
        if (r.strategy == Strategy::Template && !r.category.empty()) by_category[r.category].push_back(&r);
    for (const auto& [category, rows] : by_category)
        chart_jsd_targets(rows, category, out_dir + "/jsd_targets_" + to_lower(category) + ".svg");

    chart_case_study(report, out_dir + "/case_study.svg", case_study_k);
}

} // namespace biasprobe
