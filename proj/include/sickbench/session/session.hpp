#pragma once

#include <filesystem>
#include <optional>
#include <variant>

#include "sickbench/attacks/attacks.hpp"
#include "sickbench/dataset/synth.hpp"
#include "sickbench/mitigation/mitigation.hpp"

namespace sickbench::session {

using attacks::AttackConfig;
using dataset::Severity;
using models::Prediction;
using models::TrainedModel;

struct SynthSource {
    std::uint64_t seed = 0;
    std::vector<dataset::ScheduleSegment> schedule;
    dataset::SynthParams params;
};

struct AttackSchedule {
    AttackConfig config;
    double start_s = 60.0;
    double duration_s = 120.0;
};

struct SessionConfig {
    std::variant<SynthSource, std::filesystem::path> source;
    double duration_s = 300.0;
    double frame_rate = 90.0;
    std::size_t window_stride = dataset::kWindowLength;
    const TrainedModel* model = nullptr;
    std::optional<AttackSchedule> attack;
    double easing_ramp_s = 0.5;
    double smoothing_alpha = 0.3;
};

struct SessionRecord {
    double t = 0.0;  // window-end time in seconds
    Severity true_severity = Severity::None;
    Severity clean_prediction = Severity::None;
    Severity served_prediction = Severity::None;
    mitigation::VignetteParams vignette;
    bool attack_active = false;
    double inference_latency_s = 0.0;
    mitigation::Consequence consequence = mitigation::Consequence::Correct;
};

struct SessionTrace {
    std::vector<SessionRecord> records;
};

// Replays the stream at a logical 90 Hz clock: every window_stride frames
// the trailing 90-frame window is preprocessed against the model's training
// stats and classified; inside [start_s, start_s + duration_s) the window is
// additionally perturbed by the configured attack (the clean prediction is
// kept for comparison). The served prediction drives the vignette easing.
// Deterministic per seed; the attack interval is the only divergence point
// from a no-attack run.
SessionTrace run_session(const SessionConfig& cfg);

// Columns: t,true,clean_pred,served_pred,AF,F,attack_active,latency_s,
// consequence. zero_latency makes the output byte-reproducible.
void export_trace(const SessionTrace& trace, const std::filesystem::path& path,
                  bool zero_latency = false);
SessionTrace import_trace(const std::filesystem::path& path);

// Consequence tallies plus accuracy inside/outside the attack interval.
nlohmann::json session_summary(const SessionTrace& trace, bool zero_latency = false);

}  // namespace sickbench::session
