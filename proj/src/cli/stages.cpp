#include "sickbench/cli/stages.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

#include "sickbench/dataset/benchmark.hpp"
#include "sickbench/dataset/csv.hpp"
#include "sickbench/dataset/manifest.hpp"
#include "sickbench/dataset/preprocess.hpp"
#include "sickbench/dataset/windowing.hpp"
#include "sickbench/eval/robustness.hpp"
#include "sickbench/models/serialize.hpp"
#include "sickbench/models/train.hpp"
#include "sickbench/service/server.hpp"
#include "sickbench/session/session.hpp"

namespace sickbench::cli {

namespace {

using dataset::DatasetManifest;
using dataset::FeatureSchema;
using dataset::SensorWindow;
using nlohmann::json;

void write_json_file(const path& p, const json& j) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << j.dump(2) << '\n';
}

json read_json_file(const path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("missing expected file: " + p.string());
    json j;
    in >> j;
    return j;
}

// effective config + stage manifest + log; every output dir is self-describing.
void write_stage_metadata(const path& out, const RunConfig& cfg, const std::string& stage,
                          const std::vector<std::string>& inputs,
                          const std::vector<std::string>& outputs) {
    std::filesystem::create_directories(out);
    write_json_file(out / "effective_config.json", cfg.to_json());
    json manifest{{"stage", stage},
                  {"inputs", inputs},
                  {"outputs", outputs},
                  {"tool_version", kToolVersion},
                  {"seed", cfg.seed}};
    write_json_file(out / "stage_manifest.json", manifest);
    std::ofstream log(out / "log.txt");
    log << "stage " << stage << " completed\n";
}

DatasetManifest require_manifest(const path& dir) {
    const path p = dir / "manifest.json";
    if (!std::filesystem::exists(p))
        throw std::runtime_error("missing dataset manifest: " + p.string() +
                                 " (run the previous stage first)");
    return dataset::read_manifest(p);
}

std::vector<SensorWindow> windows_from_manifest(const RunConfig& cfg, const path& dir,
                                                const DatasetManifest& manifest) {
    std::vector<SensorWindow> windows;
    for (const auto& file : manifest.stream_files) {
        auto stream = dataset::load_csv(dir / file, manifest.schema);
        auto cut = dataset::window(stream, dataset::kWindowLength, cfg.stride);
        for (auto& w : cut) windows.push_back(std::move(w));
    }
    if (windows.empty()) throw std::runtime_error("dataset produced no full windows");
    return windows;
}

models::TrainedModel load_family_model(const path& models_dir, const std::string& family) {
    const path p = model_file_for(models_dir, family);
    if (!std::filesystem::exists(p))
        throw std::runtime_error("missing model file: " + p.string() +
                                 " (run 'sickbench train' first)");
    return models::load_model(p, family);
}

// Test split in the model's normalized input space, truncated to the
// configured evaluation subset.
std::vector<SensorWindow> test_windows_for(const RunConfig& cfg, const path& in,
                                           const dataset::ChannelStats& stats) {
    const DatasetManifest manifest = require_manifest(in);
    auto raw = windows_from_manifest(cfg, in, manifest);
    auto split = dataset::split_windows(std::move(raw), derive_seed(cfg.seed, "dataset"),
                                        cfg.train_frac, cfg.val_frac);
    auto test = std::move(split.test);
    if (cfg.eval_subset > 0 && cfg.eval_subset < test.size()) test.resize(cfg.eval_subset);
    for (auto& w : test) dataset::normalize_window(w.values, stats);
    return test;
}

constexpr double kRepresentativeFms[4] = {0.0, 1.5, 4.5, 8.0};

}  // namespace

std::vector<std::string> selected_families(const RunConfig& cfg) {
    if (cfg.family == "both") return {"deeptcn", "transformer"};
    return {cfg.family};
}

path model_file_for(const path& models_dir, const std::string& family) {
    return models_dir / ("model_" + family + ".sbm");
}

void stage_synth(const RunConfig& cfg, const path& out) {
    std::filesystem::create_directories(out);
    const FeatureSchema schema = FeatureSchema::default12();
    auto streams = dataset::synth_class_streams(cfg.n_per_class, derive_seed(cfg.seed, "dataset"),
                                                schema, cfg.synth);
    DatasetManifest manifest;
    manifest.schema = schema;
    manifest.space = "raw";
    std::vector<std::string> outputs;
    for (std::size_t k = 0; k < streams.size(); ++k) {
        const std::string file = "class_" + std::to_string(k) + ".csv";
        dataset::write_csv(out / file, streams[k], schema);
        manifest.stream_files.push_back(file);
        outputs.push_back(file);
    }
    dataset::write_manifest(out / "manifest.json", manifest);
    outputs.push_back("manifest.json");
    write_stage_metadata(out, cfg, "synth", {}, outputs);
}

void stage_preprocess(const RunConfig& cfg, const path& in, const path& out) {
    std::filesystem::create_directories(out);
    const DatasetManifest src = require_manifest(in);
    DatasetManifest dst = src;
    dst.preprocessing = {{"outlier_z", cfg.outlier_z},
                         {"smoothing_alpha", cfg.smoothing_alpha},
                         {"order", {"remove_outliers", "smooth"}}};
    std::vector<std::string> outputs;
    for (const auto& file : src.stream_files) {
        auto stream = dataset::load_csv(in / file, src.schema);
        auto cleaned =
            dataset::smooth(dataset::remove_outliers(stream, cfg.outlier_z), cfg.smoothing_alpha);
        dataset::write_csv(out / file, cleaned, src.schema);
        outputs.push_back(file);
    }
    dataset::write_manifest(out / "manifest.json", dst);
    outputs.push_back("manifest.json");
    write_stage_metadata(out, cfg, "preprocess", {in.string()}, outputs);
}

void stage_train(const RunConfig& cfg, const path& in, const path& out) {
    std::filesystem::create_directories(out);
    const DatasetManifest manifest = require_manifest(in);
    auto raw = windows_from_manifest(cfg, in, manifest);
    const std::size_t total = raw.size();
    auto split = dataset::split_windows(std::move(raw), derive_seed(cfg.seed, "dataset"),
                                        cfg.train_frac, cfg.val_frac);

    const auto stats = dataset::fit_stats_windows(split.train);
    auto normalized = [&](const std::vector<SensorWindow>& src) {
        std::vector<SensorWindow> out_set = src;
        for (auto& w : out_set) dataset::normalize_window(w.values, stats);
        return out_set;
    };
    const auto train_set = normalized(split.train);
    const auto val_set = normalized(split.val);
    const auto test_set = normalized(split.test);

    std::vector<std::string> outputs;
    for (const auto& family : selected_families(cfg)) {
        models::TrainedModel model =
            family == "deeptcn"
                ? models::build_deeptcn(cfg.tcn, manifest.schema, stats,
                                        derive_seed(cfg.seed, "init.deeptcn"))
                : models::build_transformer(cfg.transformer, manifest.schema, stats,
                                            derive_seed(cfg.seed, "init.transformer"));
        models::TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.seed, "train." + family);
        models::train_model(model, train_set, val_set, tc);

        const path model_path = model_file_for(out, family);
        models::save_model(model, model_path);
        models::write_history_csv(out / ("history_" + family + ".csv"), model.history);
        outputs.push_back(model_path.filename().string());
        outputs.push_back("history_" + family + ".csv");

        const double test_acc = models::evaluate_accuracy(model, test_set);
        std::cout << family << ": val_epochs=" << model.history.size()
                  << " test_accuracy=" << test_acc << '\n';

        if (cfg.kfold >= 2) {
            // k-fold protocol: each partition serves once as the held-out
            // fold, which also steers early stopping at desk scale.
            auto all = normalized(split.train);
            auto extra = normalized(split.val);
            all.insert(all.end(), extra.begin(), extra.end());
            auto folds = dataset::kfold_split(all.size(), cfg.kfold,
                                              derive_seed(cfg.seed, "kfold"));
            std::ofstream kf(out / ("kfold_" + family + ".csv"));
            kf << "fold,epochs,holdout_acc\n";
            for (std::size_t f = 0; f < folds.size(); ++f) {
                std::vector<SensorWindow> ftrain, ftest;
                for (auto i : folds[f].train) ftrain.push_back(all[i]);
                for (auto i : folds[f].test) ftest.push_back(all[i]);
                models::TrainedModel fold_model =
                    family == "deeptcn"
                        ? models::build_deeptcn(cfg.tcn, manifest.schema, stats,
                                                derive_seed(cfg.seed, "init.deeptcn"))
                        : models::build_transformer(cfg.transformer, manifest.schema, stats,
                                                    derive_seed(cfg.seed, "init.transformer"));
                models::TrainConfig ftc = tc;
                ftc.seed = derive_seed(cfg.seed, "kfold." + family + "." + std::to_string(f));
                models::train_model(fold_model, ftrain, ftest, ftc);
                kf << f << ',' << fold_model.history.size() << ','
                   << models::evaluate_accuracy(fold_model, ftest) << '\n';
            }
            outputs.push_back("kfold_" + family + ".csv");
        }
    }

    write_json_file(out / "split.json", {{"total", total},
                                         {"train", split.train.size()},
                                         {"val", split.val.size()},
                                         {"test", split.test.size()},
                                         {"split_seed", derive_seed(cfg.seed, "dataset")}});
    outputs.push_back("split.json");
    write_stage_metadata(out, cfg, "train", {in.string()}, outputs);
}

void stage_attack(const RunConfig& cfg, const path& models_dir, const path& in, const path& out) {
    std::filesystem::create_directories(out);
    std::vector<std::string> outputs;
    for (const auto& family : selected_families(cfg)) {
        const auto model = load_family_model(models_dir, family);
        const auto test = test_windows_for(cfg, in, model.stats);
        for (const auto variant : cfg.attack_variants) {
            const auto attack_cfg = cfg.attack_config_for(variant);
            const auto result = attacks::batch_attack(model, test, attack_cfg, cfg.threads);

            const path dir = out / family / attacks::variant_name(variant);
            std::filesystem::create_directories(dir);

            // Adversarial windows as one normalized-space stream (window
            // boundaries every 90 frames, FMS carries the true label).
            dataset::Stream adv_stream;
            for (std::size_t i = 0; i < result.examples.size(); ++i) {
                const auto& ex = result.examples[i];
                const auto label = static_cast<int>(*test[i].label);
                for (std::size_t r = 0; r < dataset::kWindowLength; ++r) {
                    dataset::SensorFrame f;
                    f.timestamp = static_cast<double>(i * dataset::kWindowLength + r) / 90.0;
                    f.values.assign(
                        ex.adversarial.data.begin() + r * model.channels(),
                        ex.adversarial.data.begin() + (r + 1) * model.channels());
                    f.fms = kRepresentativeFms[label];
                    adv_stream.push_back(std::move(f));
                }
            }
            dataset::write_csv(dir / "adversarial.csv", adv_stream, model.schema);
            DatasetManifest m;
            m.schema = model.schema;
            m.space = "normalized";
            m.stream_files = {"adversarial.csv"};
            m.preprocessing = {{"attack", attack_cfg.to_json()}};
            dataset::write_manifest(dir / "manifest.json", m);

            json sidecar = json::array();
            for (const auto& ex : result.examples) sidecar.push_back(attacks::example_sidecar(ex));
            write_json_file(dir / "sidecar.json", sidecar);
            write_json_file(dir / "summary.json",
                            {{"count", result.summary.count},
                             {"success_rate", result.summary.success_rate},
                             {"mean_linf", result.summary.mean_linf},
                             {"mean_l2", result.summary.mean_l2}});
            outputs.push_back((path(family) / attacks::variant_name(variant)).string());
        }
    }
    write_stage_metadata(out, cfg, "attack", {models_dir.string(), in.string()}, outputs);
}

void stage_eval(const RunConfig& cfg, const path& models_dir, const path& in, const path& out) {
    std::filesystem::create_directories(out);
    std::vector<std::string> outputs;
    for (const auto& family : selected_families(cfg)) {
        const auto model = load_family_model(models_dir, family);
        const auto test = test_windows_for(cfg, in, model.stats);
        std::vector<attacks::AttackConfig> attack_cfgs;
        for (const auto v : cfg.attack_variants) attack_cfgs.push_back(cfg.attack_config_for(v));
        const auto results = eval::whitebox_eval(model, family, test, attack_cfgs, cfg.threads);
        eval::emit_report(results, out / family, cfg.reproducible);
        outputs.push_back(family + "/report.json");
        outputs.push_back(family + "/report.csv");
        outputs.push_back(family + "/report.txt");
    }
    write_stage_metadata(out, cfg, "eval", {models_dir.string(), in.string()}, outputs);
}

void stage_transfer(const RunConfig& cfg, const path& models_dir, const path& in, const path& out) {
    std::filesystem::create_directories(out);
    const auto tcn = load_family_model(models_dir, "deeptcn");
    const auto transformer = load_family_model(models_dir, "transformer");
    const auto test = test_windows_for(cfg, in, tcn.stats);
    std::map<std::string, const models::TrainedModel*> model_map{
        {"deeptcn", &tcn}, {"transformer", &transformer}};
    std::vector<attacks::AttackConfig> attack_cfgs;
    for (const auto v : cfg.attack_variants) attack_cfgs.push_back(cfg.attack_config_for(v));
    const auto matrix = eval::transfer_eval(model_map, attack_cfgs, test, cfg.threads);
    eval::emit_transfer_report(matrix, out, cfg.reproducible);
    write_stage_metadata(out, cfg, "transfer", {models_dir.string(), in.string()},
                         {"transfer.json", "transfer.csv", "transfer.txt"});
}

void stage_simulate(const RunConfig& cfg, const path& model_file, const path& out) {
    std::filesystem::create_directories(out);
    if (!std::filesystem::exists(model_file))
        throw std::runtime_error("missing model file: " + model_file.string() +
                                 " (run 'sickbench train' first)");
    const auto model = models::load_model(model_file);

    session::SessionConfig sc;
    session::SynthSource source;
    source.seed = derive_seed(cfg.seed, "session");
    source.schedule = cfg.effective_schedule();
    source.params = cfg.synth;
    sc.source = source;
    sc.duration_s = cfg.session_duration_s;
    sc.window_stride = cfg.session_stride;
    sc.model = &model;
    sc.easing_ramp_s = cfg.ramp_s;
    sc.smoothing_alpha = cfg.smoothing_alpha;
    if (cfg.session_attack_variant) {
        auto v = attacks::variant_from_name(*cfg.session_attack_variant);
        if (!v)
            throw std::runtime_error("unknown session attack variant: " +
                                     *cfg.session_attack_variant);
        sc.attack = session::AttackSchedule{cfg.attack_config_for(*v), cfg.session_attack_start_s,
                                            cfg.session_attack_duration_s};
    }

    const auto trace = session::run_session(sc);
    session::export_trace(trace, out / "trace.csv", cfg.reproducible);
    write_json_file(out / "session_summary.json",
                    session::session_summary(trace, cfg.reproducible));
    write_stage_metadata(out, cfg, "simulate", {model_file.string()},
                         {"trace.csv", "session_summary.json"});
}

void stage_serve(const RunConfig& cfg, const path& model_file) {
    if (!std::filesystem::exists(model_file))
        throw std::runtime_error("missing model file: " + model_file.string() +
                                 " (run 'sickbench train' first)");
    service::InferenceService svc(models::load_model(model_file));
    std::cout << "serving on " << cfg.bind << ":" << cfg.port << " (model hash "
              << svc.model_hash() << ")\n";
    svc.run(cfg.bind, cfg.port);
}

void stage_report(const RunConfig& cfg, const path& eval_dir,
                  const std::optional<path>& transfer_dir, const path& out) {
    std::filesystem::create_directories(out);
    json combined;
    combined["schema_version"] = 1;
    for (const auto& family : selected_families(cfg)) {
        const path p = eval_dir / family / "report.json";
        if (!std::filesystem::exists(p))
            throw std::runtime_error("missing expected file: " + p.string() +
                                     " (run 'sickbench eval' first)");
        combined["whitebox"][family] = read_json_file(p);
    }
    if (transfer_dir) {
        const path p = *transfer_dir / "transfer.json";
        if (!std::filesystem::exists(p))
            throw std::runtime_error("missing expected file: " + p.string() +
                                     " (run 'sickbench transfer' first)");
        combined["transfer"] = read_json_file(p);
    }
    write_json_file(out / "combined_report.json", combined);

    std::string txt = "Robustness summary\n==================\n";
    for (const auto& family : selected_families(cfg)) {
        const auto& wb = combined["whitebox"][family];
        txt += "\n[" + family + "] clean accuracy " +
               std::to_string(wb.at("clean").at("accuracy").get<double>()) + "\n";
        for (const auto& row : wb.at("attacks")) {
            txt += "  " + row.at("attack").get<std::string>() + ": accuracy " +
                   std::to_string(row.at("report").at("accuracy").get<double>()) + ", pcc " +
                   std::to_string(row.at("pcc").get<double>()) + "\n";
        }
    }
    std::ofstream(out / "combined_report.txt") << txt;
    write_stage_metadata(out, cfg, "report", {eval_dir.string()},
                         {"combined_report.json", "combined_report.txt"});
}

}  // namespace sickbench::cli
