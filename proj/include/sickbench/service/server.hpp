#pragma once

#include <memory>
#include <string>

#include "sickbench/attacks/attacks.hpp"

namespace sickbench::service {

using attacks::AttackConfig;
using models::TrainedModel;

// HTTP inference service over an immutable model.
//
// Routes (JSON bodies, documented in docs/interfaces.md):
//   POST /predict  {schema?, window: 90xC, request_id?}
//                  -> 200 {severity, probabilities[4], latency_s,
//                          attack_applied, request_id?}
//                  -> 400 malformed JSON, 422 wrong window shape
//   GET  /health   -> 200 {status, model_hash, family, uptime_s}
//   POST /attack   {enabled, config?, mode?: "self"|"targeted", target?}
//                  -> 200; 400 when enabling without a config
//   GET  /metrics  -> 200 {requests, mean_latency_s, attack_enabled}
//
// With attack mode enabled, incoming windows are perturbed before inference;
// the untargeted default uses the model's own clean prediction as the label
// to move away from. Model weights are never altered.
class InferenceService {
public:
    explicit InferenceService(TrainedModel model);
    ~InferenceService();

    InferenceService(const InferenceService&) = delete;
    InferenceService& operator=(const InferenceService&) = delete;

    // Blocks until stop() is called from another thread.
    void run(const std::string& bind_address, int port);

    // Binds (port 0 picks an ephemeral port), serves on a background thread
    // and returns the bound port once the server accepts connections.
    int start_async(const std::string& bind_address, int port = 0);
    void stop();

    const std::string& model_hash() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace sickbench::service
