#pragma once

#include <filesystem>

#include "json.hpp"
#include "sickbench/dataset/schema.hpp"
#include "sickbench/session/session.hpp"

namespace sickbench::service {

struct ClientOptions {
    double rate_hz = 0.0;  // windows per second; 0 = no pacing
    std::size_t window_stride = dataset::kWindowLength;
    std::size_t retries = 3;
    int backoff_ms = 100;  // doubled per retry
    double easing_ramp_s = 0.5;
    double frame_rate = 90.0;
};

struct ClientResult {
    session::SessionTrace trace;        // SessionTrace-compatible local record
    std::vector<nlohmann::json> responses;  // parsed bodies, request order
};

// Headset-side stand-in: cuts raw windows from the CSV stream, posts them to
// the service and drives the local vignette easing from the served
// predictions. Connection failures retry with bounded exponential backoff
// before erroring out.
ClientResult client_stream(const std::filesystem::path& csv_path,
                           const dataset::FeatureSchema& schema, const std::string& host,
                           int port, const ClientOptions& options = {});

}  // namespace sickbench::service
