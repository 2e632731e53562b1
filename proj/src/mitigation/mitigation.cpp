#include "sickbench/mitigation/mitigation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace sickbench::mitigation {

namespace {

std::function<void(const std::string&)>& warning_sink() {
    static std::function<void(const std::string&)> sink = [](const std::string& msg) {
        std::cerr << "[mitigation] " << msg << '\n';
    };
    return sink;
}

}  // namespace

void set_mitigation_warning_sink(std::function<void(const std::string&)> sink) {
    warning_sink() = std::move(sink);
}

VignetteParams vignette_for(Severity severity) {
    switch (severity) {
        case Severity::None: return {1.0, 0.0, "Full (180\xC2\xB0+)"};
        case Severity::Low: return {0.88, 0.4, "120\xC2\xB0-155\xC2\xB0"};
        case Severity::Medium: return {0.72, 0.2, "58\xC2\xB0-110\xC2\xB0"};
        case Severity::High: return {0.52, 0.05, "36\xC2\xB0-80\xC2\xB0"};
    }
    return {1.0, 0.0, "Full (180\xC2\xB0+)"};
}

VignetteParams vignette_for_raw(int code) {
    if (code >= 0 && code <= 3) return vignette_for(static_cast<Severity>(code));
    warning_sink()("invalid severity code " + std::to_string(code) +
                   ", falling back to no-tunnel parameters");
    return vignette_for(Severity::None);
}

Consequence consequence(Severity actual, Severity predicted) {
    if (actual == predicted) return Consequence::Correct;
    switch (actual) {
        case Severity::None:
            return Consequence::UnnecessaryTunneling;
        case Severity::Low:
            return predicted == Severity::None ? Consequence::MitigationNotTriggered
                                               : Consequence::OverMitigation;
        case Severity::Medium:
            return predicted == Severity::High ? Consequence::ExcessiveMitigation
                                               : Consequence::UnderMitigation;
        case Severity::High:
            return Consequence::InsufficientMitigation;
    }
    throw std::invalid_argument("invalid severity pair");
}

const char* consequence_name(Consequence c) {
    switch (c) {
        case Consequence::Correct: return "correct";
        case Consequence::UnnecessaryTunneling: return "unnecessary_tunneling";
        case Consequence::MitigationNotTriggered: return "mitigation_not_triggered";
        case Consequence::OverMitigation: return "over_mitigation";
        case Consequence::ExcessiveMitigation: return "excessive_mitigation";
        case Consequence::UnderMitigation: return "under_mitigation";
        case Consequence::InsufficientMitigation: return "insufficient_mitigation";
    }
    return "correct";
}

namespace {

double step_toward(double current, double target, double fraction) {
    return current + (target - current) * fraction;
}

}  // namespace

VignetteParams ease(const VignetteParams& current, const VignetteParams& target, double dt,
                    double ramp) {
    if (dt <= 0.0) throw std::invalid_argument("ease: dt must be positive");
    if (ramp <= 0.0 || dt >= ramp) return target;
    const double fraction = dt / ramp;
    VignetteParams out = target;
    out.aperture_fraction = step_toward(current.aperture_fraction, target.aperture_fraction, fraction);
    out.feathering = step_toward(current.feathering, target.feathering, fraction);
    return out;
}

VignetteEaser::VignetteEaser(VignetteParams initial, double ramp)
    : current_(initial), start_(initial), target_(std::move(initial)), ramp_(ramp) {
    if (ramp_ <= 0.0) throw std::invalid_argument("easer: ramp must be positive");
}

void VignetteEaser::set_target(const VignetteParams& target) {
    if (target.aperture_fraction == target_.aperture_fraction &&
        target.feathering == target_.feathering) {
        return;  // already heading there
    }
    start_ = current_;
    target_ = target;
    elapsed_ = 0.0;
}

void VignetteEaser::advance(double dt) {
    if (dt <= 0.0) return;
    elapsed_ += dt;
    const double fraction = std::min(elapsed_ / ramp_, 1.0);
    current_ = target_;
    current_.aperture_fraction =
        step_toward(start_.aperture_fraction, target_.aperture_fraction, fraction);
    current_.feathering = step_toward(start_.feathering, target_.feathering, fraction);
}

}  // namespace sickbench::mitigation
