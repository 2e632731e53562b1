#pragma once

#include <optional>
#include <vector>

#include "json.hpp"
#include "sickbench/models/model.hpp"

namespace sickbench::attacks {

using dataset::SensorWindow;
using dataset::Severity;
using diffcore::Array;
using models::Prediction;
using models::TrainedModel;

enum class Variant { MIFGSM, PGD, CW };

const char* variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& name);

struct MifgsmParams {
    double epsilon = 0.1;
    std::size_t steps = 10;
    double decay = 1.0;
};

struct PgdParams {
    double epsilon = 0.1;
    double alpha = 0.01;
    std::size_t iters = 20;
    bool random_start = false;
};

struct CwParams {
    std::size_t max_iters = 1000;
    double c = 1.0;
    double kappa = 0.0;
    double step = 0.01;
    // Per-channel box; defaults to the model's training-data range in
    // normalized space, minimally widened to cover the clean window.
    std::optional<std::vector<double>> box_min;
    std::optional<std::vector<double>> box_max;
};

struct AttackConfig {
    Variant variant = Variant::PGD;
    MifgsmParams mifgsm;
    PgdParams pgd;
    CwParams cw;
    // Untargeted by default (maximize true-class loss); a target severity
    // switches to driving the prediction toward that class.
    std::optional<Severity> target;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static AttackConfig from_json(const nlohmann::json& j);
};

struct AdversarialExample {
    Array clean;
    Array adversarial;
    Array delta;  // adversarial - clean
    double linf_norm = 0.0;
    double l2_norm = 0.0;
    Prediction clean_prediction;
    Prediction adversarial_prediction;
    bool success = false;  // adversarial severity != true severity
};

AdversarialExample mifgsm(const TrainedModel& model, const SensorWindow& window,
                          Severity true_label, const AttackConfig& cfg);
AdversarialExample pgd(const TrainedModel& model, const SensorWindow& window, Severity true_label,
                       const AttackConfig& cfg);
AdversarialExample cw(const TrainedModel& model, const SensorWindow& window, Severity true_label,
                      const AttackConfig& cfg);

struct AttackSummary {
    std::size_t count = 0;
    std::size_t successes = 0;
    double success_rate = 0.0;
    double mean_linf = 0.0;
    double mean_l2 = 0.0;
};

struct BatchAttackResult {
    std::vector<AdversarialExample> examples;  // input order preserved
    AttackSummary summary;
};

// Windows must be labeled. Examples are attacked independently (chunked, and
// split across `threads` workers when > 1); results do not depend on the
// thread count.
BatchAttackResult batch_attack(const TrainedModel& model,
                               const std::vector<SensorWindow>& windows, const AttackConfig& cfg,
                               std::size_t threads = 1);

// The default C&W box: the model's training-data per-channel [min, max]
// mapped into normalized space.
void normalized_box(const dataset::ChannelStats& stats, std::vector<double>& lo,
                    std::vector<double>& hi);

nlohmann::json example_sidecar(const AdversarialExample& ex);

}  // namespace sickbench::attacks
