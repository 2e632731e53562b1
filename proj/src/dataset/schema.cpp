#include "sickbench/dataset/schema.hpp"

#include <stdexcept>
#include <unordered_set>

namespace sickbench::dataset {

const char* severity_name(Severity s) {
    switch (s) {
        case Severity::None: return "none";
        case Severity::Low: return "low";
        case Severity::Medium: return "medium";
        case Severity::High: return "high";
    }
    return "none";
}

std::optional<Severity> severity_from_name(const std::string& name) {
    if (name == "none") return Severity::None;
    if (name == "low") return Severity::Low;
    if (name == "medium") return Severity::Medium;
    if (name == "high") return Severity::High;
    return std::nullopt;
}

Severity severity_from_index(int index) {
    if (index < 0 || index > 3)
        throw std::invalid_argument("severity index out of range: " + std::to_string(index));
    return static_cast<Severity>(index);
}

Severity fms_to_severity(double fms) {
    if (!(fms >= 0.0 && fms <= 10.0))
        throw std::invalid_argument("fms score out of range [0,10]: " + std::to_string(fms));
    if (fms == 0.0) return Severity::None;
    if (fms <= 3.0) return Severity::Low;
    if (fms <= 6.0) return Severity::Medium;
    return Severity::High;
}

void FeatureSchema::validate() const {
    if (channels.empty()) throw std::invalid_argument("schema has no channels");
    if (!units.empty() && units.size() != channels.size())
        throw std::invalid_argument("schema units length does not match channels");
    std::unordered_set<std::string> seen;
    for (const auto& c : channels) {
        if (c.empty()) throw std::invalid_argument("schema has an empty channel name");
        if (!seen.insert(c).second)
            throw std::invalid_argument("duplicate channel name: " + c);
    }
}

FeatureSchema FeatureSchema::default12() {
    FeatureSchema s;
    s.name = "default12";
    s.channels = {"pupil_left_mm", "pupil_right_mm", "gaze_dir_x", "gaze_dir_y",
                  "gaze_dir_z",    "gaze_origin_x",  "gaze_origin_y", "gaze_origin_z",
                  "head_qw",       "head_qx",        "head_qy",       "head_qz"};
    s.units = {"mm", "mm", "unit", "unit", "unit", "m", "m", "m", "1", "1", "1", "1"};
    return s;
}

}  // namespace sickbench::dataset
