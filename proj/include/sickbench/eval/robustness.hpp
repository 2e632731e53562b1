#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "sickbench/attacks/attacks.hpp"
#include "sickbench/eval/metrics.hpp"

namespace sickbench::eval {

using attacks::AttackConfig;
using models::TrainedModel;

// One white-box row: the classifier evaluated on a batch_attack output.
struct AttackEvalRow {
    std::string attack;
    ClassificationReport report;
    PccResult pcc;
    double mean_linf = 0.0;
    double mean_l2 = 0.0;
    double success_rate = 0.0;
};

struct WhiteboxResults {
    std::string model_name;
    ClassificationReport clean;
    std::vector<AttackEvalRow> attacks;
};

WhiteboxResults whitebox_eval(const TrainedModel& model, const std::string& model_name,
                              const std::vector<dataset::SensorWindow>& test_set,
                              const std::vector<AttackConfig>& attack_configs,
                              std::size_t threads = 1);

// Black-box transferability: examples generated on each source model are
// evaluated on every other model; the diagonal is omitted.
struct TransferEntry {
    std::string source;
    std::string attack;
    std::string target;
    double accuracy = 0.0;
};

struct TransferMatrix {
    std::vector<TransferEntry> entries;
    std::map<std::string, double> clean_accuracy;  // per target model
};

TransferMatrix transfer_eval(const std::map<std::string, const TrainedModel*>& models,
                             const std::vector<AttackConfig>& attack_configs,
                             const std::vector<dataset::SensorWindow>& test_set,
                             std::size_t threads = 1);

// JSON (machine), CSV (rows: attack,accuracy,precision,recall,f1,pcc,
// mean_linf,mean_l2,success_rate) and a plain-text table, plus the
// clean/adversarial accuracy ratio headline. Zero adversarial accuracy is
// reported as an infinite ratio with a flag.
void emit_report(const WhiteboxResults& results, const std::filesystem::path& dir,
                 bool reproducible = false);
void emit_transfer_report(const TransferMatrix& matrix, const std::filesystem::path& dir,
                          bool reproducible = false);

nlohmann::json whitebox_to_json(const WhiteboxResults& results);
nlohmann::json transfer_to_json(const TransferMatrix& matrix);

}  // namespace sickbench::eval
