#pragma once

#include <functional>
#include <string>

#include "sickbench/dataset/schema.hpp"

namespace sickbench::mitigation {

using dataset::Severity;

// Tunneling-vignette shader parameters. Aperture fraction controls the inner
// field-of-view size, feathering the softness of the transition to the outer
// field-of-view.
struct VignetteParams {
    double aperture_fraction = 1.0;
    double feathering = 0.0;
    std::string ifov_ofov_label;
};

// Severity -> (AF, F): none (1.0, 0.0), low (0.88, 0.4), medium (0.72, 0.2),
// high (0.52, 0.05).
VignetteParams vignette_for(Severity severity);

// Integer codes 0..3 map as vignette_for; anything else falls back to the
// no-tunnel parameters and emits a warning.
VignetteParams vignette_for_raw(int code);

// Warning sink for fallback events; defaults to stderr.
void set_mitigation_warning_sink(std::function<void(const std::string&)> sink);

// User-experience consequence of serving `predicted` when the user's actual
// state is `actual`; total over all 16 pairs.
enum class Consequence {
    Correct,
    UnnecessaryTunneling,
    MitigationNotTriggered,
    OverMitigation,
    ExcessiveMitigation,
    UnderMitigation,
    InsufficientMitigation,
};

Consequence consequence(Severity actual, Severity predicted);
const char* consequence_name(Consequence c);

// Single easing step: moves `current` toward `target` by dt/ramp of the
// remaining distance, clamped so a step of dt >= ramp lands exactly on the
// target. Never overshoots; idempotent at the target.
VignetteParams ease(const VignetteParams& current, const VignetteParams& target, double dt,
                    double ramp = 0.5);

// Frame-by-frame easing state for a session loop: retargeting records the
// start point so the transition runs linearly and lands on the target in
// exactly `ramp` seconds.
class VignetteEaser {
public:
    explicit VignetteEaser(VignetteParams initial, double ramp = 0.5);

    void set_target(const VignetteParams& target);
    void advance(double dt);
    const VignetteParams& params() const { return current_; }

private:
    VignetteParams current_;
    VignetteParams start_;
    VignetteParams target_;
    double ramp_;
    double elapsed_ = 0.0;
};

}  // namespace sickbench::mitigation
