#include "biasprobe/errors.hpp"
#include "biasprobe/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct StageArgs {
    std::string config_path;
    std::string out_dir;
};

void add_common(CLI::App* cmd, StageArgs& args) {
    cmd->add_option("--config", args.config_path, "Run configuration file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "Output directory (overrides the config's out_dir)");
}

int run(const StageArgs& args, const std::vector<biasprobe::Stage>& stages) {
    using namespace biasprobe;
    try {
        RunConfig cfg = load_run_config(args.config_path);
        if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
        run_stages(cfg, stages, std::cout);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 3;
    } catch (const PendingReviewError& e) {
        std::cerr << "pending review: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"biasprobe: probes text-generation backends for explicit and implicit gender bias"};
    app.require_subcommand(1);

    StageArgs args;
    std::vector<biasprobe::Stage> stages;

    auto* gen = app.add_subcommand("gen-probes", "Construct the probe-input set (probes.jsonl)");
    add_common(gen, args);
    gen->callback([&] { stages = {biasprobe::Stage::GenProbes}; });

    auto* probe = app.add_subcommand("probe", "Generate continuations for every probe (generations.jsonl)");
    add_common(probe, args);
    probe->callback([&] { stages = {biasprobe::Stage::Probe}; });

    auto* score = app.add_subcommand("score", "Score gendered candidate words per probe (distributions.jsonl)");
    add_common(score, args);
    score->callback([&] { stages = {biasprobe::Stage::Score}; });

    auto* classify = app.add_subcommand("classify", "Label continuations (labels.jsonl)");
    add_common(classify, args);
    classify->callback([&] { stages = {biasprobe::Stage::Classify}; });

    auto* review = app.add_subcommand("review", "Human review of ambiguous labels");
    review->require_subcommand(1);
    auto* rexport = review->add_subcommand("export", "Write unresolved items to review_queue.tsv");
    add_common(rexport, args);
    rexport->callback([&] { stages = {biasprobe::Stage::ReviewExport}; });
    auto* rapply = review->add_subcommand("apply", "Apply resolutions from review_queue.tsv");
    add_common(rapply, args);
    rapply->callback([&] { stages = {biasprobe::Stage::ReviewApply}; });

    auto* report = app.add_subcommand("report", "Aggregate metrics and emit tables and charts");
    add_common(report, args);
    report->callback([&] { stages = {biasprobe::Stage::Report}; });

    CLI11_PARSE(app, argc, argv);
    return run(args, stages);
}
