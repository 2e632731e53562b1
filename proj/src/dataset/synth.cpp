#include "sickbench/dataset/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "sickbench/dataset/windowing.hpp"

namespace sickbench::dataset {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    Quat operator*(const Quat& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z, w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x, w * o.z + x * o.y - y * o.x + z * o.w};
    }
    void normalize() {
        const double n = std::sqrt(w * w + x * x + y * y + z * z);
        w /= n;
        x /= n;
        y /= n;
        z /= n;
    }
    static Quat axis_angle(double ax, double ay, double az, double angle) {
        const double n = std::sqrt(ax * ax + ay * ay + az * az);
        if (n == 0.0) return {};
        const double s = std::sin(angle / 2.0) / n;
        return {std::cos(angle / 2.0), ax * s, ay * s, az * s};
    }
};

// One continuous physiological state; severity only switches the modulation
// tables, so streams stay continuous across schedule boundaries.
class Generator {
public:
    Generator(std::uint64_t seed, const SynthParams& p) : p_(p), rng_(seed) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        pupil_base_ = 3.5 + p.pupil_base_spread * (2.0 * unit(rng_) - 1.0);
        pupil_offset_ = 0.05 + 0.1 * unit(rng_);
        phase_pupil_ = kTwoPi * unit(rng_);
        phase_yaw_ = kTwoPi * unit(rng_);
        phase_pitch_ = kTwoPi * unit(rng_);
        phase_baseline_ = kTwoPi * unit(rng_);
        axis_x_ = unit(rng_) - 0.5;
        axis_y_ = unit(rng_) - 0.5;
        axis_z_ = unit(rng_) - 0.5;
        head_ = Quat::axis_angle(0.0, 1.0, 0.0, kTwoPi * unit(rng_));
    }

    SensorFrame next(double timestamp, Severity severity) {
        const int k = static_cast<int>(severity);
        const double dt = 1.0 / p_.frame_rate;
        std::normal_distribution<double> gauss(0.0, 1.0);

        // Mean-reverting pupil wander (rate scales with severity) plus a slow
        // class-independent baseline oscillation.
        pupil_base_ += (3.5 - pupil_base_) * 0.5 * dt +
                       p_.pupil_wander[k] * std::sqrt(dt) * gauss(rng_);
        phase_pupil_ += kTwoPi * p_.pupil_freq[k] * dt;
        phase_baseline_ += kTwoPi * p_.baseline_freq * dt;
        const double baseline = p_.pupil_baseline_amp * std::sin(phase_baseline_);
        const double osc = p_.pupil_amp[k] * std::sin(phase_pupil_);
        const double pl = pupil_base_ + baseline + osc + p_.pupil_noise[k] * gauss(rng_);
        const double pr =
            pupil_base_ + pupil_offset_ + baseline + osc + p_.pupil_noise[k] * gauss(rng_);

        // Fixation point drifts independently of severity.
        yaw_base_ += -0.3 * yaw_base_ * dt + p_.gaze_base_wander * std::sqrt(dt) * gauss(rng_);
        pitch_base_ +=
            -0.3 * pitch_base_ * dt + p_.gaze_base_wander * std::sqrt(dt) * gauss(rng_);
        phase_yaw_ += kTwoPi * p_.gaze_freq[k] * dt;
        phase_pitch_ += kTwoPi * p_.gaze_freq[k] * 0.73 * dt;
        const double yaw =
            yaw_base_ + p_.gaze_amp[k] * std::sin(phase_yaw_) + p_.gaze_noise[k] * gauss(rng_);
        const double pitch = pitch_base_ + p_.gaze_amp[k] * 0.6 * std::sin(phase_pitch_) +
                             p_.gaze_noise[k] * gauss(rng_);
        double gx = std::sin(yaw) * std::cos(pitch);
        double gy = std::sin(pitch);
        double gz = std::cos(yaw) * std::cos(pitch);
        const double gn = std::sqrt(gx * gx + gy * gy + gz * gz);
        gx /= gn;
        gy /= gn;
        gz /= gn;

        const double ox = 0.02 * std::sin(0.3 * kTwoPi * timestamp + phase_yaw_ * 0.1) +
                          p_.origin_noise * gauss(rng_);
        const double oy = 1.6 + p_.origin_noise * gauss(rng_);
        const double oz = p_.origin_noise * gauss(rng_);

        // Head rotation about a slowly precessing axis at the class rate.
        axis_x_ += 0.15 * dt * gauss(rng_);
        axis_y_ += 0.15 * dt * gauss(rng_);
        axis_z_ += 0.15 * dt * gauss(rng_);
        const double an = std::sqrt(axis_x_ * axis_x_ + axis_y_ * axis_y_ + axis_z_ * axis_z_);
        if (an > 1e-9) {
            head_ = head_ * Quat::axis_angle(axis_x_ / an, axis_y_ / an, axis_z_ / an,
                                             p_.head_rate[k] * dt);
        }
        head_.normalize();

        SensorFrame f;
        f.timestamp = timestamp;
        f.values = {pl, pr, gx, gy, gz, ox, oy, oz, head_.w, head_.x, head_.y, head_.z};
        return f;
    }

    double sample_fms(Severity severity) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        switch (severity) {
            case Severity::None: return 0.0;
            case Severity::Low: return 0.5 + 2.5 * unit(rng_);
            case Severity::Medium: return 3.5 + 2.5 * unit(rng_);
            case Severity::High: return 6.5 + 3.5 * unit(rng_);
        }
        return 0.0;
    }

private:
    SynthParams p_;
    std::mt19937_64 rng_;
    double pupil_base_, pupil_offset_;
    double phase_pupil_, phase_yaw_, phase_pitch_, phase_baseline_;
    double yaw_base_ = 0.0, pitch_base_ = 0.0;
    double axis_x_, axis_y_, axis_z_;
    Quat head_;
};

void require_default12(const FeatureSchema& schema) {
    if (schema.channel_count() != 12)
        throw std::invalid_argument("synth generator requires the 12-channel default schema, got " +
                                    std::to_string(schema.channel_count()) + " channels");
}

constexpr double kRepresentativeFms[4] = {0.0, 1.5, 4.5, 8.0};

}  // namespace

std::vector<Stream> synth_class_streams(std::size_t n_per_class, std::uint64_t seed,
                                        const FeatureSchema& schema, const SynthParams& params) {
    if (n_per_class < 1) throw std::invalid_argument("synth: n_per_class must be >= 1");
    require_default12(schema);
    std::vector<Stream> streams;
    for (int k = 0; k < 4; ++k) {
        const Severity sev = static_cast<Severity>(k);
        // Per-class sub-seed keeps classes independent of each other's sizes.
        Generator gen(seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(k) + 1, params);
        Stream stream;
        stream.reserve(n_per_class * kWindowLength);
        const double dt = 1.0 / params.frame_rate;
        std::size_t frame_idx = 0;
        for (std::size_t w = 0; w < n_per_class; ++w) {
            const double fms = gen.sample_fms(sev);
            for (std::size_t i = 0; i < kWindowLength; ++i, ++frame_idx) {
                SensorFrame f = gen.next(static_cast<double>(frame_idx) * dt, sev);
                f.fms = fms;
                stream.push_back(std::move(f));
            }
        }
        streams.push_back(std::move(stream));
    }
    return streams;
}

std::vector<SensorWindow> synth_generate(std::size_t n_per_class, std::uint64_t seed,
                                         const FeatureSchema& schema, const SynthParams& params) {
    auto streams = synth_class_streams(n_per_class, seed, schema, params);
    std::vector<SensorWindow> windows;
    windows.reserve(n_per_class * 4);
    for (auto& stream : streams) {
        auto w = window(stream, kWindowLength, kWindowLength);
        for (auto& x : w) windows.push_back(std::move(x));
    }
    return windows;
}

Stream synth_stream(double duration_s, const std::vector<ScheduleSegment>& schedule,
                    std::uint64_t seed, const FeatureSchema& schema, const SynthParams& params) {
    if (duration_s <= 0.0) throw std::invalid_argument("synth_stream: duration must be positive");
    require_default12(schema);
    Generator gen(seed, params);
    Stream stream;
    const double dt = 1.0 / params.frame_rate;
    const std::size_t frames = static_cast<std::size_t>(duration_s * params.frame_rate);
    stream.reserve(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        const double t = static_cast<double>(i) * dt;
        Severity sev = Severity::None;
        for (const auto& seg : schedule) {
            if (t < seg.until_s) {
                sev = seg.severity;
                break;
            }
            sev = seg.severity;  // past the last boundary: stay on the final class
        }
        SensorFrame f = gen.next(t, sev);
        f.fms = kRepresentativeFms[static_cast<int>(sev)];
        stream.push_back(std::move(f));
    }
    return stream;
}

}  // namespace sickbench::dataset
