#include "biasprobe/pipeline.hpp"

#include "biasprobe/charts.hpp"
#include "biasprobe/errors.hpp"
#include "biasprobe/jsonl.hpp"
#include "biasprobe/report.hpp"
#include "biasprobe/review.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace biasprobe {

namespace {

using nlohmann::ordered_json;

// Client-side rate limiter shared by all request workers.
class TokenBucket {
public:
    explicit TokenBucket(double per_second)
        : rate_(per_second), tokens_(per_second), last_(std::chrono::steady_clock::now()) {}

    void acquire() {
        if (rate_ <= 0.0) return;
        std::unique_lock lock(mu_);
        for (;;) {
            refill();
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
            lock.unlock();
            std::this_thread::sleep_for(wait);
            lock.lock();
        }
    }

private:
    void refill() {
        const auto now = std::chrono::steady_clock::now();
        tokens_ = std::min(rate_, tokens_ + rate_ * std::chrono::duration<double>(now - last_).count());
        last_ = now;
    }

    double rate_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mu_;
};

// Fans `fn` out over [0,n) with bounded parallelism; rethrows the first
// worker exception after all workers join.
void parallel_for(std::size_t n, int parallelism, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const int workers = std::max(1, std::min<int>(parallelism, static_cast<int>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::scoped_lock lock(error_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string now_iso8601() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<ProbeInput> load_probes(const RunConfig& cfg) {
    const auto file = read_jsonl(artifact_path(cfg, "probes.jsonl"), cfg.config_hash);
    std::vector<ProbeInput> probes;
    probes.reserve(file.lines.size());
    for (const auto& line : file.lines) probes.push_back(probe_from_json(line));
    return probes;
}

std::vector<GenerationRecord> load_records(const RunConfig& cfg) {
    const auto file = read_jsonl(artifact_path(cfg, "generations.jsonl"), cfg.config_hash);
    std::vector<GenerationRecord> out;
    out.reserve(file.lines.size());
    for (const auto& line : file.lines) out.push_back(record_from_json(line));
    return out;
}

std::vector<CandidateDistribution> load_dists(const RunConfig& cfg) {
    const auto file = read_jsonl(artifact_path(cfg, "distributions.jsonl"), cfg.config_hash);
    std::vector<CandidateDistribution> out;
    out.reserve(file.lines.size());
    for (const auto& line : file.lines) out.push_back(dist_from_json(line));
    return out;
}

std::vector<SentenceLabel> load_labels(const RunConfig& cfg) {
    const auto file = read_jsonl(artifact_path(cfg, "labels.jsonl"), cfg.config_hash);
    std::vector<SentenceLabel> out;
    out.reserve(file.lines.size());
    for (const auto& line : file.lines) out.push_back(label_from_json(line));
    return out;
}

// Reads an existing artifact for resume, keyed probe_id -> raw line text so
// reused entries rewrite byte-identically. Entries with a foreign hash are
// discarded so they get recomputed under the current configuration.
std::unordered_map<std::string, std::string> existing_by_id(const std::string& path,
                                                            const std::string& hash) {
    std::unordered_map<std::string, std::string> out;
    if (!file_exists(path)) return out;
    JsonlFile file;
    try {
        file = read_jsonl(path);
    } catch (const ConfigError&) {
        return out; // unreadable partial artifact, recompute everything
    }
    if (file.config_hash != hash) return out;
    for (std::size_t i = 0; i < file.lines.size(); ++i) {
        const auto it = file.lines[i].find("probe_id");
        if (it != file.lines[i].end()) out.emplace(it->get<std::string>(), file.raw[i]);
    }
    return out;
}

void stage_gen_probes(const RunConfig& cfg, std::ostream& log) {
    const std::string path = artifact_path(cfg, "probes.jsonl");
    const GenderLexicon lex = load_lexicon(cfg.lexicon);
    if (file_exists(path)) {
        JsonlFile existing;
        try {
            existing = read_jsonl(path);
        } catch (const ConfigError&) {
            existing = {};
        }
        if (!existing.lines.empty() && existing.config_hash == cfg.config_hash) {
            log << "gen-probes: probes.jsonl up to date (" << existing.lines.size() << " probes)\n";
            return;
        }
    }

    std::vector<ProbeInput> probes;
    if (cfg.template_strategy.enabled) {
        std::vector<TargetAttributeList> targets;
        for (const auto& name : cfg.template_strategy.targets) targets.push_back(load_targets(name));
        auto built = build_template_inputs(targets);
        log << "gen-probes: template strategy built " << built.size() << " probes\n";
        probes.insert(probes.end(), std::make_move_iterator(built.begin()),
                      std::make_move_iterator(built.end()));
    }
    if (cfg.llm_strategy.enabled) {
        auto backend = make_backend(cfg.backend);
        LlmGenResult gen = generate_llm_inputs(*backend, lex, cfg.llm_strategy.opts);
        log << "gen-probes: llm-generated strategy accepted " << gen.accepted.size() << " of "
            << cfg.llm_strategy.opts.count << " statements in " << gen.rounds << " rounds\n";
        for (const auto& s : gen.dropped_gendered)
            log << "gen-probes: dropped gendered statement: " << s << "\n";
        if (!gen.flagged.empty()) {
            const std::string flagged_path = artifact_path(cfg, "llm_flagged.txt");
            std::string content;
            for (const auto& s : gen.flagged) content += s + "\n";
            write_text_file_atomic(flagged_path, content);
            log << "gen-probes: " << gen.flagged.size()
                << " near-duplicate statements held for manual review in " << flagged_path << "\n";
        }
        if (gen.hit_round_cap)
            log << "gen-probes: warning: round cap reached before requested count; partial result\n";
        probes.insert(probes.end(), std::make_move_iterator(gen.accepted.begin()),
                      std::make_move_iterator(gen.accepted.end()));
    }
    if (cfg.natural_strategy.enabled) {
        NaturalIngestResult nat =
            ingest_natural_inputs(cfg.natural_strategy.corpus_path, cfg.natural_strategy.person_terms, lex);
        log << "gen-probes: natural strategy accepted " << nat.accepted.size() << " probes from "
            << nat.rows << " rows (" << nat.excluded_gendered << " gendered excluded, "
            << nat.dropped_not_prefixed << " non-prefixed dropped, " << nat.duplicates
            << " duplicates)\n";
        probes.insert(probes.end(), std::make_move_iterator(nat.accepted.begin()),
                      std::make_move_iterator(nat.accepted.end()));
    }
    if (probes.empty()) throw ConfigError("no probe strategy enabled or no probes produced");
    validate_probe_set(probes, lex);

    std::vector<ordered_json> lines;
    lines.reserve(probes.size());
    for (const auto& p : probes) lines.push_back(probe_to_json(p, cfg.config_hash));
    write_jsonl_atomic(path, lines);
    log << "gen-probes: wrote " << probes.size() << " probes to " << path << "\n";
}

void stage_probe(const RunConfig& cfg, std::ostream& log) {
    const auto probes = load_probes(cfg);
    const std::string path = artifact_path(cfg, "generations.jsonl");
    auto existing = existing_by_id(path, cfg.config_hash);

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < probes.size(); ++i)
        if (!existing.count(probes[i].id)) todo.push_back(i);

    std::vector<std::string> fresh(todo.size());
    if (!todo.empty()) {
        auto backend = make_backend(cfg.backend);
        TokenBucket bucket(cfg.backend.rate_limit_per_s);
        parallel_for(todo.size(), cfg.backend.parallelism, [&](std::size_t k) {
            const ProbeInput& probe = probes[todo[k]];
            const std::string prompt = build_prompt(cfg.instruction, probe.text, cfg.prompt_separator);
            bucket.acquire();
            const GenerationRecord rec = complete(*backend, probe, prompt, cfg.decoding);
            fresh[k] = record_to_json(rec, cfg.config_hash).dump();
        });
    }

    std::unordered_map<std::string, const std::string*> fresh_by_id;
    for (std::size_t k = 0; k < todo.size(); ++k) fresh_by_id[probes[todo[k]].id] = &fresh[k];

    std::vector<std::string> lines;
    lines.reserve(probes.size());
    for (const auto& p : probes) {
        if (const auto it = existing.find(p.id); it != existing.end())
            lines.push_back(it->second);
        else
            lines.push_back(*fresh_by_id.at(p.id));
    }
    write_raw_lines_atomic(path, lines);
    log << "probe: " << todo.size() << " generated, " << existing.size() << " reused -> " << path
        << "\n";
}

void stage_score(const RunConfig& cfg, std::ostream& log) {
    const auto probes = load_probes(cfg);
    const GenderLexicon lex = load_lexicon(cfg.lexicon);
    const std::string path = artifact_path(cfg, "distributions.jsonl");
    auto existing = existing_by_id(path, cfg.config_hash);

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < probes.size(); ++i)
        if (!existing.count(probes[i].id)) todo.push_back(i);

    std::vector<std::string> fresh(todo.size());
    long missing_count = 0;
    if (!todo.empty()) {
        auto backend = make_backend(cfg.backend);
        const BackendCaps caps = backend->capabilities();
        if (cfg.scoring_mode == ScoringMode::FullWord && !caps.echo_logprobs)
            throw BackendError("backend does not support echo logprobs (full-word scoring)");
        if (cfg.scoring_mode == ScoringMode::FirstToken && !caps.topk_logprobs)
            throw BackendError("backend does not support top-k logprobs (first-token scoring)");
        TokenBucket bucket(cfg.backend.rate_limit_per_s);
        std::atomic<long> missing{0};
        parallel_for(todo.size(), cfg.backend.parallelism, [&](std::size_t k) {
            const ProbeInput& probe = probes[todo[k]];
            const std::string prompt = build_prompt(cfg.instruction, probe.text, cfg.prompt_separator);
            bucket.acquire();
            const CandidateDistribution dist =
                score_candidates(*backend, prompt, lex, cfg.scoring_mode, probe.id);
            if (dist.missing) missing.fetch_add(1);
            fresh[k] = dist_to_json(dist, cfg.config_hash).dump();
        });
        missing_count = missing.load();
    }

    std::unordered_map<std::string, const std::string*> fresh_by_id;
    for (std::size_t k = 0; k < todo.size(); ++k) fresh_by_id[probes[todo[k]].id] = &fresh[k];

    std::vector<std::string> lines;
    lines.reserve(probes.size());
    for (const auto& p : probes) {
        if (const auto it = existing.find(p.id); it != existing.end())
            lines.push_back(it->second);
        else
            lines.push_back(*fresh_by_id.at(p.id));
    }
    write_raw_lines_atomic(path, lines);
    log << "score: " << todo.size() << " scored, " << existing.size() << " reused";
    if (missing_count > 0) log << ", " << missing_count << " probes with zero mass marked missing";
    log << " -> " << path << "\n";
}

void stage_classify(const RunConfig& cfg, std::ostream& log) {
    const auto records = load_records(cfg);
    const GenderLexicon lex = load_lexicon(cfg.lexicon);
    const std::string path = artifact_path(cfg, "labels.jsonl");
    auto existing = existing_by_id(path, cfg.config_hash); // keeps human resolutions

    std::vector<std::string> lines;
    lines.reserve(records.size());
    long fresh = 0, review = 0;
    for (const auto& rec : records) {
        if (const auto it = existing.find(rec.probe_id); it != existing.end()) {
            lines.push_back(it->second);
            if (label_from_json(nlohmann::json::parse(it->second)).label == LabelKind::NeedsReview)
                ++review;
            continue;
        }
        const SentenceLabel label = classify_sentence(rec.continuation, lex, rec.probe_id);
        if (label.label == LabelKind::NeedsReview) ++review;
        lines.push_back(label_to_json(label, cfg.config_hash).dump());
        ++fresh;
    }
    write_raw_lines_atomic(path, lines);
    log << "classify: " << fresh << " labeled, " << existing.size() << " kept";
    if (review > 0)
        log << "; " << review << " NeedsReview items (run `review export` / `review apply`)";
    log << " -> " << path << "\n";
}

void stage_review_export(const RunConfig& cfg, std::ostream& log) {
    const auto labels = load_labels(cfg);
    const auto records = load_records(cfg);
    const std::string path = review_queue_path(cfg);
    export_review_queue(labels, records, path, cfg.report.include_nonsense_in_review);
    long pending = 0;
    for (const auto& l : labels)
        if (l.label == LabelKind::NeedsReview) ++pending;
    log << "review export: " << pending << " unresolved items -> " << path << "\n";
}

void stage_review_apply(const RunConfig& cfg, std::ostream& log) {
    const auto labels = load_labels(cfg);
    const std::string path = review_queue_path(cfg);
    ApplyResult result = apply_review_labels(path, labels);
    for (const auto& line : result.audit) log << "review apply: " << line << "\n";
    std::vector<ordered_json> lines;
    lines.reserve(result.labels.size());
    for (const auto& l : result.labels) lines.push_back(label_to_json(l, cfg.config_hash));
    write_jsonl_atomic(artifact_path(cfg, "labels.jsonl"), lines);
    log << "review apply: " << result.resolved << " resolutions applied\n";
}

void stage_report(const RunConfig& cfg, std::ostream& log) {
    const auto records = load_records(cfg);
    const auto dists = load_dists(cfg);
    const auto labels = load_labels(cfg);

    for (const auto& l : labels)
        if (l.label == LabelKind::NeedsReview)
            throw PendingReviewError("unresolved review items; resolve " + review_queue_path(cfg) +
                                     " (biasprobe review export / review apply)");

    ReportMeta meta;
    meta.backend_identity = records.empty() ? std::string() : records.front().backend;
    meta.decoding = cfg.decoding;
    meta.instruction = cfg.instruction;
    meta.prompt_separator = cfg.prompt_separator;
    const GenderLexicon lex = load_lexicon(cfg.lexicon);
    meta.lexicon_name = lex.name;
    meta.lexicon_pairs = lex.pairs;
    meta.scoring_mode = cfg.scoring_mode;
    // mock runs are bit-deterministic by contract, so they carry no wall clock
    meta.generated_at = cfg.backend.kind == "mock" ? std::string() : now_iso8601();
    meta.config_hash = cfg.config_hash;
    if (cfg.natural_strategy.enabled) meta.person_terms = cfg.natural_strategy.person_terms;
    meta.config_echo = cfg.canonical;

    const BiasReport report =
        aggregate(meta, records, labels, dists, cfg.report.pooled_co_occurrence);
    emit_tables(report, cfg.out_dir);
    emit_charts(report, cfg.out_dir, cfg.report.case_study_k);

    for (const auto& s : report.strategies) {
        log << "report: " << to_string(s.strategy) << " D=(" << s.summary.counts.d_f << ","
            << s.summary.counts.d_m << "," << s.summary.counts.d_n << "," << s.summary.counts.d_ns
            << ")";
        if (s.summary.r_f) log << " R_f=" << *s.summary.r_f << " R_m=" << *s.summary.r_m;
        if (s.summary.jsd_mean) log << " jsd_mean=" << *s.summary.jsd_mean;
        log << "\n";
    }
    log << "report: wrote report.json, summary.csv, per_input.csv and charts to " << cfg.out_dir
        << "\n";
}

} // namespace

const char* to_string(Stage s) {
    switch (s) {
    case Stage::GenProbes: return "gen-probes";
    case Stage::Probe: return "probe";
    case Stage::Score: return "score";
    case Stage::Classify: return "classify";
    case Stage::ReviewExport: return "review export";
    case Stage::ReviewApply: return "review apply";
    default: return "report";
    }
}

std::string artifact_path(const RunConfig& cfg, const std::string& name) {
    return cfg.out_dir + "/" + name;
}

std::string review_queue_path(const RunConfig& cfg) { return artifact_path(cfg, "review_queue.tsv"); }

void run_stage(const RunConfig& cfg, Stage stage, std::ostream& log) {
    std::filesystem::create_directories(cfg.out_dir);
    switch (stage) {
    case Stage::GenProbes: stage_gen_probes(cfg, log); break;
    case Stage::Probe: stage_probe(cfg, log); break;
    case Stage::Score: stage_score(cfg, log); break;
    case Stage::Classify: stage_classify(cfg, log); break;
    case Stage::ReviewExport: stage_review_export(cfg, log); break;
    case Stage::ReviewApply: stage_review_apply(cfg, log); break;
    case Stage::Report: stage_report(cfg, log); break;
    }
}

void run_stages(const RunConfig& cfg, const std::vector<Stage>& stages, std::ostream& log) {
    for (const Stage s : stages) run_stage(cfg, s, log);
}

} // namespace biasprobe
