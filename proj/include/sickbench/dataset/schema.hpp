#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sickbench/diffcore/array.hpp"

namespace sickbench::dataset {

using diffcore::Array;

// Ordinal cybersickness severity, the four-class label space.
enum class Severity : int { None = 0, Low = 1, Medium = 2, High = 3 };

inline constexpr std::size_t kSeverityCount = 4;
inline constexpr std::size_t kWindowLength = 90;  // timesteps per model input

const char* severity_name(Severity s);
std::optional<Severity> severity_from_name(const std::string& name);
Severity severity_from_index(int index);  // throws on values outside 0..3

// FMS (0-10) binning: 0 -> None, (0,3] -> Low, (3,6] -> Medium, (6,10] -> High.
// Out-of-range scores throw.
Severity fms_to_severity(double fms);

// Ordered channel names and units; fixed per dataset.
struct FeatureSchema {
    std::string name;
    std::vector<std::string> channels;
    std::vector<std::string> units;

    std::size_t channel_count() const { return channels.size(); }
    void validate() const;  // throws on empty or duplicate channel names

    // 12 channels: left/right pupil diameter (mm), gaze direction x/y/z,
    // gaze origin x/y/z (m), head quaternion w/x/y/z.
    static FeatureSchema default12();
};

struct SensorFrame {
    double timestamp = 0.0;  // seconds
    std::vector<double> values;
    std::optional<double> fms;
};

using Stream = std::vector<SensorFrame>;

// Fixed-length slice of a stream, the unit of model input.
struct SensorWindow {
    Array values;  // [T, C]
    std::optional<Severity> label;
};

// Per-channel statistics fitted on a training split.
struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // population
    std::vector<double> min;
    std::vector<double> max;

    std::size_t channel_count() const { return mean.size(); }
};

}  // namespace sickbench::dataset
