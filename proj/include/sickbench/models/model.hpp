#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "sickbench/dataset/schema.hpp"
#include "sickbench/diffcore/tape.hpp"
#include "sickbench/models/config.hpp"

namespace sickbench::models {

using diffcore::Array;
using diffcore::Mode;
using diffcore::Tape;
using dataset::Severity;

struct NamedArray {
    std::string name;
    Array value;
};

// Flat named weight store with a stable creation order.
struct WeightStore {
    std::vector<NamedArray> entries;

    Array& add(const std::string& name, Array value);
    Array& at(const std::string& name);
    const Array& at(const std::string& name) const;
    std::size_t total_params() const;

private:
    std::unordered_map<std::string, std::size_t> index_;
};

struct Prediction {
    std::array<double, 4> probabilities{};
    std::array<double, 4> logits{};
    Severity severity = Severity::None;  // argmax, ties toward lower severity
};

struct TrainHistoryRow {
    std::size_t epoch;
    double train_loss;
    double val_loss;
    double val_acc;
};

struct TrainedModel {
    std::string family;  // "deeptcn" | "transformer"
    DeepTcnConfig tcn;
    TransformerConfig transformer;
    dataset::FeatureSchema schema;
    dataset::ChannelStats stats;  // raw-space normalization stats
    WeightStore weights;
    std::vector<diffcore::RunningStats> bn_stats;  // one per residual block (deeptcn)
    std::vector<TrainHistoryRow> history;

    std::size_t channels() const { return schema.channel_count(); }
};

// Fan-in-scaled uniform init, deterministic per seed.
TrainedModel build_deeptcn(const DeepTcnConfig& cfg, const dataset::FeatureSchema& schema,
                           const dataset::ChannelStats& stats, std::uint64_t seed);
TrainedModel build_transformer(const TransformerConfig& cfg, const dataset::FeatureSchema& schema,
                               const dataset::ChannelStats& stats, std::uint64_t seed);

std::size_t deeptcn_param_count(const DeepTcnConfig& cfg, std::size_t channels);
std::size_t transformer_param_count(const TransformerConfig& cfg, std::size_t channels);

// A recorded forward pass over a batch, exposing the nodes needed to build
// custom scalar objectives (training loss, attack losses).
struct ModelTrace {
    Tape tape;
    Tape::NodeId input;
    Tape::NodeId logits;
    Tape::NodeId probs;
    std::vector<std::pair<std::string, Tape::NodeId>> weight_nodes;
};

// batch: [B, T, C] in normalized feature space. Train mode samples dropout
// from dropout_seed and folds batch statistics into the model's running
// stats; infer mode is pure.
ModelTrace trace_forward(TrainedModel& model, const Array& batch, Mode mode,
                         std::uint64_t dropout_seed = 0);

Prediction predict(const TrainedModel& model, const Array& window);
std::vector<Prediction> predict_batch(const TrainedModel& model,
                                      const std::vector<const Array*>& windows);

// d(cross_entropy(forward(x), label)) / dx for a single [T, C] window,
// evaluated in infer mode.
Array input_gradient(const TrainedModel& model, const Array& window, Severity label);

Array one_hot(const std::vector<Severity>& labels);
Prediction prediction_from_row(const Array& logits, const Array& probs, std::size_t row);

}  // namespace sickbench::models
