#include "sickbench/service/client.hpp"

#include <thread>

#include "httplib.h"
#include "sickbench/dataset/csv.hpp"

namespace sickbench::service {

using nlohmann::json;

namespace {

json post_with_retry(httplib::Client& client, const std::string& route, const json& body,
                     const ClientOptions& opt) {
    int backoff = opt.backoff_ms;
    for (std::size_t attempt = 0;; ++attempt) {
        auto res = client.Post(route, body.dump(), "application/json");
        if (res) {
            if (res->status != 200)
                throw std::runtime_error("service returned " + std::to_string(res->status) +
                                         " for " + route + ": " + res->body);
            return json::parse(res->body);
        }
        if (attempt >= opt.retries)
            throw std::runtime_error("service unreachable after " +
                                     std::to_string(opt.retries + 1) + " attempts (" +
                                     httplib::to_string(res.error()) + ")");
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff *= 2;
    }
}

}  // namespace

ClientResult client_stream(const std::filesystem::path& csv_path,
                           const dataset::FeatureSchema& schema, const std::string& host,
                           int port, const ClientOptions& opt) {
    const dataset::Stream stream = dataset::load_csv(csv_path, schema);
    const std::size_t t = dataset::kWindowLength;
    const std::size_t c = schema.channel_count();
    if (stream.size() < t)
        throw std::runtime_error("client_stream: stream shorter than one window");

    httplib::Client client(host, port);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(30, 0);

    ClientResult result;
    mitigation::VignetteEaser easer(mitigation::vignette_for(dataset::Severity::None),
                                    opt.easing_ramp_s);
    const double dt = 1.0 / opt.frame_rate;
    std::size_t request_counter = 0;

    for (std::size_t frame = 0; frame < stream.size(); ++frame) {
        easer.advance(dt);
        const bool at_window = frame + 1 >= t && (frame + 1 - t) % opt.window_stride == 0;
        if (!at_window) continue;

        const std::size_t start = frame + 1 - t;
        json rows = json::array();
        for (std::size_t r = 0; r < t; ++r) rows.push_back(stream[start + r].values);
        json body{{"schema", schema.name},
                  {"window", rows},
                  {"request_id", "w" + std::to_string(request_counter++)}};

        const json response = post_with_retry(client, "/predict", body, opt);

        session::SessionRecord rec;
        rec.t = static_cast<double>(frame) / opt.frame_rate;
        const auto& last = stream[frame];
        rec.true_severity =
            last.fms ? dataset::fms_to_severity(*last.fms) : dataset::Severity::None;
        auto served = dataset::severity_from_name(response.at("severity").get<std::string>());
        if (!served) throw std::runtime_error("service returned unknown severity");
        rec.served_prediction = *served;
        rec.clean_prediction = *served;  // the headset only sees the served label
        rec.attack_active = response.value("attack_applied", false);
        rec.inference_latency_s = response.value("latency_s", 0.0);
        easer.set_target(mitigation::vignette_for(rec.served_prediction));
        rec.vignette = easer.params();
        rec.consequence = mitigation::consequence(rec.true_severity, rec.served_prediction);
        result.trace.records.push_back(rec);
        result.responses.push_back(response);

        if (opt.rate_hz > 0.0)
            std::this_thread::sleep_for(
                std::chrono::duration<double>(1.0 / opt.rate_hz));
    }
    return result;
}

}  // namespace sickbench::service
