#pragma once

#include <filesystem>
#include <optional>

#include "sickbench/cli/runconfig.hpp"

namespace sickbench::cli {

using std::filesystem::path;

// Pipeline stages behind the CLI subcommands. Each writes its artifacts plus
// effective_config.json, stage_manifest.json and log.txt into `out`, and
// throws with a one-line cause on failure (missing upstream artifacts are
// reported with the expected file name).

void stage_synth(const RunConfig& cfg, const path& out);
void stage_preprocess(const RunConfig& cfg, const path& in, const path& out);
void stage_train(const RunConfig& cfg, const path& in, const path& out);
void stage_attack(const RunConfig& cfg, const path& models_dir, const path& in, const path& out);
void stage_eval(const RunConfig& cfg, const path& models_dir, const path& in, const path& out);
void stage_transfer(const RunConfig& cfg, const path& models_dir, const path& in, const path& out);
void stage_simulate(const RunConfig& cfg, const path& model_file, const path& out);
void stage_serve(const RunConfig& cfg, const path& model_file);  // blocks
void stage_report(const RunConfig& cfg, const path& eval_dir,
                  const std::optional<path>& transfer_dir, const path& out);

// Families selected by cfg.family ("deeptcn" | "transformer" | "both").
std::vector<std::string> selected_families(const RunConfig& cfg);
path model_file_for(const path& models_dir, const std::string& family);

}  // namespace sickbench::cli
