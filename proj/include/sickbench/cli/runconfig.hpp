#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "sickbench/attacks/attacks.hpp"
#include "sickbench/dataset/synth.hpp"
#include "sickbench/models/config.hpp"

namespace sickbench::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Merged run configuration: JSON file < environment < command-line flags.
// Unknown keys anywhere in the file are rejected; the effective config is
// echoed into every stage output directory.
struct RunConfig {
    std::uint64_t seed = 7;
    std::size_t threads = 1;
    bool reproducible = false;

    // dataset
    std::size_t n_per_class = 500;
    double outlier_z = 3.0;
    double smoothing_alpha = 0.3;
    std::size_t stride = dataset::kWindowLength;
    double train_frac = 0.7;
    double val_frac = 0.15;
    dataset::SynthParams synth;

    // model
    std::string family = "both";  // deeptcn | transformer | both
    models::DeepTcnConfig tcn;
    models::TransformerConfig transformer;

    // train
    models::TrainConfig train;
    std::size_t kfold = 0;  // 0 = plain split; >= 2 runs k-fold cross-validation

    // attack
    std::vector<attacks::Variant> attack_variants = {attacks::Variant::MIFGSM,
                                                     attacks::Variant::PGD, attacks::Variant::CW};
    attacks::AttackConfig attack_base;  // per-variant parameters + target
    std::size_t eval_subset = 0;        // 0 = whole test split

    // session
    double session_duration_s = 300.0;
    std::size_t session_stride = dataset::kWindowLength;
    std::optional<std::string> session_attack_variant = "pgd";
    double session_attack_start_s = 60.0;
    double session_attack_duration_s = 120.0;
    double ramp_s = 0.5;
    std::vector<dataset::ScheduleSegment> schedule;  // empty = four equal segments

    // service
    std::string bind = "127.0.0.1";
    int port = 8080;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);

    // File (optional) + SICKBENCH_* environment + explicit overrides.
    static RunConfig load(const std::optional<std::filesystem::path>& config_path,
                          std::optional<std::uint64_t> seed_flag,
                          std::optional<std::size_t> threads_flag,
                          std::optional<bool> reproducible_flag);

    std::vector<dataset::ScheduleSegment> effective_schedule() const;
    attacks::AttackConfig attack_config_for(attacks::Variant v) const;
};

// Stable stage sub-seed derivation from the one global seed.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage);

}  // namespace sickbench::cli
