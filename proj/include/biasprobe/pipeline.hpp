#pragma once

#include "biasprobe/config.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace biasprobe {

enum class Stage { GenProbes, Probe, Score, Classify, ReviewExport, ReviewApply, Report };

const char* to_string(Stage s);

// Runs one pipeline stage against the artifacts in cfg.out_dir. Stages are
// resumable and idempotent: work already present with a matching config hash
// is kept, missing probe ids are computed, and re-running with unchanged
// inputs rewrites byte-identical artifacts. Progress goes to `log`.
void run_stage(const RunConfig& cfg, Stage stage, std::ostream& log);

void run_stages(const RunConfig& cfg, const std::vector<Stage>& stages, std::ostream& log);

std::string artifact_path(const RunConfig& cfg, const std::string& name);
std::string review_queue_path(const RunConfig& cfg);

} // namespace biasprobe
