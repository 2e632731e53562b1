#include "sickbench/service/server.hpp"

#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "sickbench/dataset/preprocess.hpp"
#include "sickbench/models/serialize.hpp"

namespace sickbench::service {

using nlohmann::json;

namespace {

struct AttackState {
    bool enabled = false;
    AttackConfig config;
    std::string mode = "self";  // "self" | "targeted"
};

void reply_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

struct InferenceService::Impl {
    explicit Impl(TrainedModel m) : model(std::move(m)), hash(models::model_hash(model)) {
        attack = std::make_shared<const AttackState>();
        setup_routes();
    }

    TrainedModel model;
    std::string hash;
    httplib::Server server;
    std::thread worker;
    std::chrono::steady_clock::time_point started;

    std::mutex attack_mutex;
    std::shared_ptr<const AttackState> attack;  // swapped as a whole snapshot

    std::atomic<std::uint64_t> requests{0};
    std::mutex latency_mutex;
    double latency_sum = 0.0;

    std::shared_ptr<const AttackState> attack_snapshot() {
        std::lock_guard<std::mutex> lock(attack_mutex);
        return attack;
    }

    void handle_predict(const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            reply_json(res, 400, {{"error", std::string("malformed JSON: ") + e.what()}});
            return;
        }
        const std::size_t t = dataset::kWindowLength;
        const std::size_t c = model.channels();
        try {
            if (body.contains("schema") &&
                body.at("schema").get<std::string>() != model.schema.name) {
                reply_json(res, 422,
                           {{"error", "schema '" + body.at("schema").get<std::string>() +
                                          "' does not match model schema '" + model.schema.name +
                                          "'"}});
                return;
            }
            if (!body.contains("window") || !body.at("window").is_array()) {
                reply_json(res, 422, {{"error", "missing 'window' array"}});
                return;
            }
            const auto& rows = body.at("window");
            if (rows.size() != t) {
                reply_json(res, 422,
                           {{"error", "expected window shape [" + std::to_string(t) + ", " +
                                          std::to_string(c) + "], got " +
                                          std::to_string(rows.size()) + " rows"}});
                return;
            }
            diffcore::Array raw({t, c});
            for (std::size_t i = 0; i < t; ++i) {
                const auto& row = rows[i];
                if (!row.is_array() || row.size() != c) {
                    reply_json(res, 422,
                               {{"error", "expected window shape [" + std::to_string(t) + ", " +
                                              std::to_string(c) + "], got " +
                                              std::to_string(row.size()) + " columns at row " +
                                              std::to_string(i)}});
                    return;
                }
                for (std::size_t j = 0; j < c; ++j) raw.data[i * c + j] = row[j].get<double>();
            }

            const auto t0 = std::chrono::steady_clock::now();
            const diffcore::Array window =
                dataset::preprocess_window_for_model(raw, model.stats);
            models::Prediction served = models::predict(model, window);
            bool attack_applied = false;
            const auto snapshot = attack_snapshot();
            if (snapshot->enabled) {
                // The attacker lacks ground truth; the untargeted default
                // moves away from the model's own clean prediction.
                dataset::SensorWindow labeled{window, served.severity};
                auto ex = attacks::batch_attack(model, {labeled}, snapshot->config)
                              .examples.front();
                served = ex.adversarial_prediction;
                attack_applied = true;
            }
            const double latency =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

            requests.fetch_add(1);
            {
                std::lock_guard<std::mutex> lock(latency_mutex);
                latency_sum += latency;
            }
            json out{{"severity", dataset::severity_name(served.severity)},
                     {"probabilities", served.probabilities},
                     {"latency_s", latency},
                     {"attack_applied", attack_applied}};
            if (body.contains("request_id")) out["request_id"] = body.at("request_id");
            reply_json(res, 200, out);
        } catch (const json::exception& e) {
            reply_json(res, 422, {{"error", std::string("bad request field: ") + e.what()}});
        } catch (const std::exception& e) {
            reply_json(res, 500, {{"error", e.what()}});
        }
    }

    void handle_attack(const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            reply_json(res, 400, {{"error", std::string("malformed JSON: ") + e.what()}});
            return;
        }
        try {
            auto next = std::make_shared<AttackState>();
            next->enabled = body.at("enabled").get<bool>();
            if (next->enabled) {
                if (!body.contains("config")) {
                    reply_json(res, 400, {{"error", "attack enable requires a config"}});
                    return;
                }
                next->config = AttackConfig::from_json(body.at("config"));
                next->mode = body.value("mode", "self");
                if (next->mode == "targeted") {
                    if (!body.contains("target")) {
                        reply_json(res, 400, {{"error", "targeted mode requires a target"}});
                        return;
                    }
                    auto target =
                        dataset::severity_from_name(body.at("target").get<std::string>());
                    if (!target) {
                        reply_json(res, 400, {{"error", "unknown target severity"}});
                        return;
                    }
                    next->config.target = *target;
                } else if (next->mode != "self") {
                    reply_json(res, 400, {{"error", "mode must be 'self' or 'targeted'"}});
                    return;
                }
            }
            {
                std::lock_guard<std::mutex> lock(attack_mutex);
                attack = next;
            }
            reply_json(res, 200, {{"enabled", next->enabled}, {"mode", next->mode}});
        } catch (const json::exception& e) {
            reply_json(res, 400, {{"error", std::string("bad attack request: ") + e.what()}});
        } catch (const std::exception& e) {
            reply_json(res, 400, {{"error", e.what()}});
        }
    }

    void setup_routes() {
        server.Post("/predict",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        handle_predict(req, res);
                    });
        server.Post("/attack", [this](const httplib::Request& req, httplib::Response& res) {
            handle_attack(req, res);
        });
        server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            const double uptime =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            reply_json(res, 200,
                       {{"status", "ok"},
                        {"model_hash", hash},
                        {"family", model.family},
                        {"schema", model.schema.name},
                        {"uptime_s", uptime}});
        });
        server.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
            const std::uint64_t n = requests.load();
            double mean = 0.0;
            {
                std::lock_guard<std::mutex> lock(latency_mutex);
                if (n > 0) mean = latency_sum / static_cast<double>(n);
            }
            reply_json(res, 200,
                       {{"requests", n},
                        {"mean_latency_s", mean},
                        {"attack_enabled", attack_snapshot()->enabled}});
        });
    }
};

InferenceService::InferenceService(TrainedModel model)
    : impl_(std::make_unique<Impl>(std::move(model))) {}

InferenceService::~InferenceService() { stop(); }

void InferenceService::run(const std::string& bind_address, int port) {
    impl_->started = std::chrono::steady_clock::now();
    if (!impl_->server.listen(bind_address, port))
        throw std::runtime_error("cannot listen on " + bind_address + ":" + std::to_string(port));
}

int InferenceService::start_async(const std::string& bind_address, int port) {
    impl_->started = std::chrono::steady_clock::now();
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(bind_address);
        if (bound <= 0) throw std::runtime_error("cannot bind " + bind_address);
        impl_->worker = std::thread([this]() { impl_->server.listen_after_bind(); });
    } else {
        if (!impl_->server.bind_to_port(bind_address, port))
            throw std::runtime_error("cannot bind " + bind_address + ":" + std::to_string(port));
        impl_->worker = std::thread([this]() { impl_->server.listen_after_bind(); });
    }
    impl_->server.wait_until_ready();
    return bound;
}

void InferenceService::stop() {
    if (impl_ == nullptr) return;
    impl_->server.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
}

const std::string& InferenceService::model_hash() const { return impl_->hash; }

}  // namespace sickbench::service
