#include "sickbench/eval/robustness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace sickbench::eval {

namespace {

std::vector<Severity> labels_of(const std::vector<dataset::SensorWindow>& set) {
    std::vector<Severity> labels;
    labels.reserve(set.size());
    for (const auto& w : set) {
        if (!w.label) throw std::invalid_argument("evaluation requires labeled windows");
        labels.push_back(*w.label);
    }
    return labels;
}

std::vector<Severity> predictions_for(const TrainedModel& model,
                                      const std::vector<dataset::SensorWindow>& set) {
    std::vector<const diffcore::Array*> ptrs;
    ptrs.reserve(set.size());
    for (const auto& w : set) ptrs.push_back(&w.values);
    auto preds = models::predict_batch(model, ptrs);
    std::vector<Severity> out;
    out.reserve(preds.size());
    for (const auto& p : preds) out.push_back(p.severity);
    return out;
}

nlohmann::json report_to_json(const ClassificationReport& r) {
    return {{"accuracy", r.accuracy},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"macro_precision", r.macro_precision},
            {"macro_recall", r.macro_recall},
            {"macro_f1", r.macro_f1},
            {"confusion", r.confusion},
            {"total", r.total}};
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report file: " + path.string());
    out << content;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report file: " + path.string());
    out << j.dump(2) << '\n';
}

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

}  // namespace

WhiteboxResults whitebox_eval(const TrainedModel& model, const std::string& model_name,
                              const std::vector<dataset::SensorWindow>& test_set,
                              const std::vector<AttackConfig>& attack_configs,
                              std::size_t threads) {
    if (test_set.empty()) throw std::invalid_argument("whitebox_eval: empty test set");
    const auto labels = labels_of(test_set);

    WhiteboxResults results;
    results.model_name = model_name;
    results.clean = classification_report(predictions_for(model, test_set), labels);

    for (const auto& cfg : attack_configs) {
        auto batch = attacks::batch_attack(model, test_set, cfg, threads);
        std::vector<Severity> adv_preds;
        std::vector<diffcore::Array> clean_arrays, adv_arrays;
        adv_preds.reserve(batch.examples.size());
        for (const auto& ex : batch.examples) {
            adv_preds.push_back(ex.adversarial_prediction.severity);
            clean_arrays.push_back(ex.clean);
            adv_arrays.push_back(ex.adversarial);
        }
        AttackEvalRow row;
        row.attack = attacks::variant_name(cfg.variant);
        row.report = classification_report(adv_preds, labels);
        row.pcc = pcc(clean_arrays, adv_arrays);
        row.mean_linf = batch.summary.mean_linf;
        row.mean_l2 = batch.summary.mean_l2;
        row.success_rate = batch.summary.success_rate;
        results.attacks.push_back(std::move(row));
    }
    return results;
}

TransferMatrix transfer_eval(const std::map<std::string, const TrainedModel*>& model_map,
                             const std::vector<AttackConfig>& attack_configs,
                             const std::vector<dataset::SensorWindow>& test_set,
                             std::size_t threads) {
    if (model_map.size() < 2)
        throw std::invalid_argument("transfer_eval: needs at least two models");
    const auto& first = *model_map.begin()->second;
    for (const auto& [name, m] : model_map) {
        if (m->schema.channels != first.schema.channels)
            throw std::invalid_argument("transfer_eval: model '" + name +
                                        "' has a different feature schema");
    }
    const auto labels = labels_of(test_set);

    TransferMatrix matrix;
    for (const auto& [name, m] : model_map) {
        matrix.clean_accuracy[name] =
            classification_report(predictions_for(*m, test_set), labels).accuracy;
    }

    for (const auto& [source_name, source] : model_map) {
        for (const auto& cfg : attack_configs) {
            auto batch = attacks::batch_attack(*source, test_set, cfg, threads);
            std::vector<dataset::SensorWindow> adv_set;
            adv_set.reserve(batch.examples.size());
            for (std::size_t i = 0; i < batch.examples.size(); ++i)
                adv_set.push_back({batch.examples[i].adversarial, labels[i]});
            for (const auto& [target_name, target] : model_map) {
                if (target_name == source_name) continue;  // diagonal omitted
                const auto report =
                    classification_report(predictions_for(*target, adv_set), labels);
                matrix.entries.push_back({source_name, attacks::variant_name(cfg.variant),
                                          target_name, report.accuracy});
            }
        }
    }
    return matrix;
}

nlohmann::json whitebox_to_json(const WhiteboxResults& results) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["model"] = results.model_name;
    j["clean"] = report_to_json(results.clean);
    nlohmann::json rows = nlohmann::json::array();
    nlohmann::json ratios = nlohmann::json::object();
    for (const auto& row : results.attacks) {
        rows.push_back({{"attack", row.attack},
                        {"report", report_to_json(row.report)},
                        {"pcc", row.pcc.value},
                        {"pcc_pairs_used", row.pcc.pairs_used},
                        {"pcc_pairs_skipped", row.pcc.pairs_skipped},
                        {"mean_linf", row.mean_linf},
                        {"mean_l2", row.mean_l2},
                        {"success_rate", row.success_rate}});
        const bool infinite = row.report.accuracy == 0.0;
        ratios[row.attack] = {
            {"ratio", infinite ? 0.0 : results.clean.accuracy / row.report.accuracy},
            {"infinite", infinite}};
    }
    j["attacks"] = rows;
    j["accuracy_ratios"] = ratios;
    return j;
}

void emit_report(const WhiteboxResults& results, const std::filesystem::path& dir,
                 bool reproducible) {
    if (results.clean.total == 0) throw std::invalid_argument("emit_report: empty results");
    std::filesystem::create_directories(dir);

    nlohmann::json j = whitebox_to_json(results);
    if (!reproducible) j["generated_at"] = iso_now();
    write_json_file(dir / "report.json", j);

    char line[256];
    std::string csv = "attack,accuracy,precision,recall,f1,pcc,mean_linf,mean_l2,success_rate\n";
    auto csv_row = [&](const std::string& name, const ClassificationReport& r, double pcc_value,
                       double linf, double l2, double success) {
        std::snprintf(line, sizeof(line), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      name.c_str(), r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1,
                      pcc_value, linf, l2, success);
        csv += line;
    };
    csv_row("none", results.clean, 1.0, 0.0, 0.0, 1.0 - results.clean.accuracy);
    for (const auto& row : results.attacks)
        csv_row(row.attack, row.report, row.pcc.value, row.mean_linf, row.mean_l2,
                row.success_rate);
    write_text_file(dir / "report.csv", csv);

    std::string txt = "White-box robustness: " + results.model_name + "\n";
    txt += "attack      acc(%)   prec(%)  recall(%)  f1(%)    pcc\n";
    auto txt_row = [&](const std::string& name, const ClassificationReport& r, double pcc_value) {
        std::snprintf(line, sizeof(line), "%-10s  %6.1f   %6.1f   %6.1f    %6.1f   %.3f\n",
                      name.c_str(), 100.0 * r.accuracy, 100.0 * r.macro_precision,
                      100.0 * r.macro_recall, 100.0 * r.macro_f1, pcc_value);
        txt += line;
    };
    txt_row("none", results.clean, 1.0);
    for (const auto& row : results.attacks) txt_row(row.attack, row.report, row.pcc.value);
    txt += "\n";
    for (const auto& row : results.attacks) {
        if (row.report.accuracy == 0.0) {
            std::snprintf(line, sizeof(line),
                          "%s: infinite decrease in accuracy vs clean (adversarial accuracy 0)\n",
                          row.attack.c_str());
        } else {
            std::snprintf(line, sizeof(line), "%s: %.2fx decrease in accuracy vs clean\n",
                          row.attack.c_str(), results.clean.accuracy / row.report.accuracy);
        }
        txt += line;
    }
    write_text_file(dir / "report.txt", txt);
}

nlohmann::json transfer_to_json(const TransferMatrix& matrix) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["clean_accuracy"] = matrix.clean_accuracy;
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : matrix.entries)
        entries.push_back({{"source", e.source},
                           {"attack", e.attack},
                           {"target", e.target},
                           {"accuracy", e.accuracy}});
    j["entries"] = entries;
    return j;
}

void emit_transfer_report(const TransferMatrix& matrix, const std::filesystem::path& dir,
                          bool reproducible) {
    if (matrix.entries.empty()) throw std::invalid_argument("emit_transfer_report: empty matrix");
    std::filesystem::create_directories(dir);

    nlohmann::json j = transfer_to_json(matrix);
    if (!reproducible) j["generated_at"] = iso_now();
    write_json_file(dir / "transfer.json", j);

    std::string csv = "source,attack,target,accuracy\n";
    char line[256];
    for (const auto& e : matrix.entries) {
        std::snprintf(line, sizeof(line), "%s,%s,%s,%.17g\n", e.source.c_str(), e.attack.c_str(),
                      e.target.c_str(), e.accuracy);
        csv += line;
    }
    write_text_file(dir / "transfer.csv", csv);

    std::string txt = "Black-box transferability (target accuracy under transferred examples)\n";
    for (const auto& e : matrix.entries) {
        std::snprintf(line, sizeof(line), "%s --%s--> %s : %5.1f%% (clean %5.1f%%)\n",
                      e.source.c_str(), e.attack.c_str(), e.target.c_str(), 100.0 * e.accuracy,
                      100.0 * matrix.clean_accuracy.at(e.target));
        txt += line;
    }
    write_text_file(dir / "transfer.txt", txt);
}

}  // namespace sickbench::eval
