#pragma once

#include <filesystem>

#include "sickbench/models/model.hpp"

namespace sickbench::models {

// Adam on a single parameter array; moments persist across steps.
struct AdamState {
    Array m;
    Array v;
    std::size_t t = 0;

    void step(Array& param, const Array& grad, double lr, double beta1, double beta2, double eps);
};

// Mini-batch Adam with early stopping on validation loss. The final partial
// batch is kept; shuffling, dropout and init all derive from cfg.seed; the
// weights from the best validation epoch are restored before returning.
// Throws on a non-finite training loss.
void train_model(TrainedModel& model, const std::vector<dataset::SensorWindow>& train_set,
                 const std::vector<dataset::SensorWindow>& val_set, const TrainConfig& cfg);

double evaluate_loss(const TrainedModel& model, const std::vector<dataset::SensorWindow>& set);
double evaluate_accuracy(const TrainedModel& model, const std::vector<dataset::SensorWindow>& set);

// Columns: epoch,train_loss,val_loss,val_acc.
void write_history_csv(const std::filesystem::path& path,
                       const std::vector<TrainHistoryRow>& history);

}  // namespace sickbench::models
