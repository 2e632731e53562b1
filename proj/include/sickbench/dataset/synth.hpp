#pragma once

#include <cstdint>

#include "sickbench/dataset/schema.hpp"

namespace sickbench::dataset {

// Class-conditional generator parameters, indexed by severity 0..3. Severity
// scales the wander (drift) rate, the oscillation amplitude/frequency of the
// pupil channels and the angular velocity of the head quaternion.
struct SynthParams {
    double pupil_amp[4] = {0.13, 0.15, 0.17, 0.19};     // mm, oscillation amplitude
    double pupil_freq[4] = {1.1, 1.2, 1.3, 1.4};        // Hz
    double pupil_wander[4] = {0.08, 0.10, 0.12, 0.14};  // mm/sqrt(s), mean-reverting drift
    double gaze_amp[4] = {0.08, 0.09, 0.10, 0.11};      // rad
    double gaze_freq[4] = {1.1, 1.2, 1.3, 1.4};         // Hz
    double head_rate[4] = {0.45, 0.5, 0.55, 0.6};       // rad/s angular velocity
    // Per-frame jitter also rises with severity; a diffuse cue spread over
    // every sample of the window.
    double pupil_noise[4] = {0.06, 0.11, 0.16, 0.21};
    double gaze_noise[4] = {0.016, 0.028, 0.040, 0.052};
    double origin_noise = 0.003;
    // Class-independent baseline variation (inter-subject spread, slow
    // physiological drift); widens per-channel variance without adding
    // class-discriminative signal.
    double pupil_base_spread = 0.7;    // +- mm around 3.5
    double pupil_baseline_amp = 0.45;  // mm, slow common oscillation
    double baseline_freq = 0.08;       // Hz
    double gaze_base_wander = 0.15;    // rad, fixation drift
    double frame_rate = 90.0;
};

struct ScheduleSegment {
    double until_s;  // segment covers [previous until_s, until_s)
    Severity severity;
};

// n_per_class windows per severity class, generated as one continuous stream
// per class and cut at stride kWindowLength. Deterministic per seed; classes
// balanced; head quaternion kept unit-norm. Requires the default12 layout.
std::vector<SensorWindow> synth_generate(std::size_t n_per_class, std::uint64_t seed,
                                         const FeatureSchema& schema,
                                         const SynthParams& params = {});

// As synth_generate but emits the per-class raw streams (with per-window FMS
// values) instead of cut windows; stream i belongs to severity class i.
std::vector<Stream> synth_class_streams(std::size_t n_per_class, std::uint64_t seed,
                                        const FeatureSchema& schema,
                                        const SynthParams& params = {});

// Continuous stream following a severity schedule, for closed-loop sessions.
// FMS carries the representative value of the scheduled class.
Stream synth_stream(double duration_s, const std::vector<ScheduleSegment>& schedule,
                    std::uint64_t seed, const FeatureSchema& schema,
                    const SynthParams& params = {});

}  // namespace sickbench::dataset
