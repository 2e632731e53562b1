#include "sickbench/cli/runconfig.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace sickbench::cli {

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage) {
    // FNV-1a over the stage name, then a splitmix64 finalizer.
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : stage) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    std::uint64_t z = global_seed ^ h;
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                    const char* where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw std::invalid_argument(std::string(where) + ": unknown key '" + it.key() + "'");
    }
}

nlohmann::json synth_params_to_json(const dataset::SynthParams& p) {
    auto arr4 = [](const double (&a)[4]) { return std::vector<double>(a, a + 4); };
    return {{"pupil_amp", arr4(p.pupil_amp)},       {"pupil_freq", arr4(p.pupil_freq)},
            {"pupil_wander", arr4(p.pupil_wander)}, {"gaze_amp", arr4(p.gaze_amp)},
            {"gaze_freq", arr4(p.gaze_freq)},       {"head_rate", arr4(p.head_rate)},
            {"pupil_noise", arr4(p.pupil_noise)},   {"gaze_noise", arr4(p.gaze_noise)},
            {"origin_noise", p.origin_noise}};
}

void synth_params_from_json(const nlohmann::json& j, dataset::SynthParams& p) {
    reject_unknown(j,
                   {"pupil_amp", "pupil_freq", "pupil_wander", "gaze_amp", "gaze_freq",
                    "head_rate", "pupil_noise", "gaze_noise", "origin_noise"},
                   "dataset.synth");
    auto fill = [&](const char* key, double (&a)[4]) {
        if (!j.contains(key)) return;
        auto v = j.at(key).get<std::vector<double>>();
        if (v.size() != 4)
            throw std::invalid_argument(std::string("dataset.synth.") + key + " needs 4 values");
        std::copy(v.begin(), v.end(), a);
    };
    fill("pupil_amp", p.pupil_amp);
    fill("pupil_freq", p.pupil_freq);
    fill("pupil_wander", p.pupil_wander);
    fill("gaze_amp", p.gaze_amp);
    fill("gaze_freq", p.gaze_freq);
    fill("head_rate", p.head_rate);
    fill("pupil_noise", p.pupil_noise);
    fill("gaze_noise", p.gaze_noise);
    p.origin_noise = j.value("origin_noise", p.origin_noise);
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
    nlohmann::json attack{{"variants", nlohmann::json::array()},
                          {"mifgsm", attack_base.to_json().at("mifgsm")},
                          {"pgd", attack_base.to_json().at("pgd")},
                          {"cw", attack_base.to_json().at("cw")},
                          {"eval_subset", eval_subset}};
    for (auto v : attack_variants) attack["variants"].push_back(attacks::variant_name(v));
    if (attack_base.target) attack["target"] = dataset::severity_name(*attack_base.target);

    nlohmann::json session{{"duration_s", session_duration_s},
                           {"stride", session_stride},
                           {"ramp_s", ramp_s}};
    if (session_attack_variant) {
        session["attack"] = {{"variant", *session_attack_variant},
                             {"start_s", session_attack_start_s},
                             {"duration_s", session_attack_duration_s}};
    }
    if (!schedule.empty()) {
        nlohmann::json sched = nlohmann::json::array();
        for (const auto& seg : schedule)
            sched.push_back({{"until_s", seg.until_s},
                             {"severity", dataset::severity_name(seg.severity)}});
        session["schedule"] = sched;
    }

    return {{"seed", seed},
            {"threads", threads},
            {"reproducible", reproducible},
            {"dataset",
             {{"n_per_class", n_per_class},
              {"outlier_z", outlier_z},
              {"smoothing_alpha", smoothing_alpha},
              {"stride", stride},
              {"train_frac", train_frac},
              {"val_frac", val_frac},
              {"synth", synth_params_to_json(synth)}}},
            {"model",
             {{"family", family},
              {"deeptcn", tcn.to_json()},
              {"transformer", transformer.to_json()}}},
            {"train", train.to_json()},
            {"kfold", kfold},
            {"attack", attack},
            {"session", session},
            {"service", {{"bind", bind}, {"port", port}}},
            {"version", kToolVersion}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    reject_unknown(j,
                   {"seed", "threads", "reproducible", "dataset", "model", "train", "kfold",
                    "attack", "session", "service", "version"},
                   "config");
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.reproducible = j.value("reproducible", c.reproducible);

    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        reject_unknown(d,
                       {"n_per_class", "outlier_z", "smoothing_alpha", "stride", "train_frac",
                        "val_frac", "synth"},
                       "config.dataset");
        c.n_per_class = d.value("n_per_class", c.n_per_class);
        c.outlier_z = d.value("outlier_z", c.outlier_z);
        c.smoothing_alpha = d.value("smoothing_alpha", c.smoothing_alpha);
        c.stride = d.value("stride", c.stride);
        c.train_frac = d.value("train_frac", c.train_frac);
        c.val_frac = d.value("val_frac", c.val_frac);
        if (d.contains("synth")) synth_params_from_json(d.at("synth"), c.synth);
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        reject_unknown(m, {"family", "deeptcn", "transformer"}, "config.model");
        c.family = m.value("family", c.family);
        if (c.family != "deeptcn" && c.family != "transformer" && c.family != "both")
            throw std::invalid_argument("config.model.family must be deeptcn, transformer or both");
        if (m.contains("deeptcn")) c.tcn = models::DeepTcnConfig::from_json(m.at("deeptcn"));
        if (m.contains("transformer"))
            c.transformer = models::TransformerConfig::from_json(m.at("transformer"));
    }
    if (j.contains("train")) c.train = models::TrainConfig::from_json(j.at("train"));
    c.kfold = j.value("kfold", c.kfold);
    if (j.contains("attack")) {
        const auto& a = j.at("attack");
        reject_unknown(a, {"variants", "mifgsm", "pgd", "cw", "target", "eval_subset"},
                       "config.attack");
        nlohmann::json base = a;
        base.erase("variants");
        base.erase("eval_subset");
        c.attack_base = attacks::AttackConfig::from_json(base);
        if (a.contains("variants")) {
            c.attack_variants.clear();
            for (const auto& name : a.at("variants")) {
                auto v = attacks::variant_from_name(name.get<std::string>());
                if (!v)
                    throw std::invalid_argument("config.attack.variants: unknown variant " +
                                                name.dump());
                c.attack_variants.push_back(*v);
            }
        }
        c.eval_subset = a.value("eval_subset", c.eval_subset);
    }
    if (j.contains("session")) {
        const auto& s = j.at("session");
        reject_unknown(s, {"duration_s", "stride", "ramp_s", "attack", "schedule"},
                       "config.session");
        c.session_duration_s = s.value("duration_s", c.session_duration_s);
        c.session_stride = s.value("stride", c.session_stride);
        c.ramp_s = s.value("ramp_s", c.ramp_s);
        if (s.contains("attack")) {
            if (s.at("attack").is_null()) {
                c.session_attack_variant.reset();
            } else {
                const auto& a = s.at("attack");
                reject_unknown(a, {"variant", "start_s", "duration_s"}, "config.session.attack");
                c.session_attack_variant = a.value("variant", std::string("pgd"));
                c.session_attack_start_s = a.value("start_s", c.session_attack_start_s);
                c.session_attack_duration_s = a.value("duration_s", c.session_attack_duration_s);
            }
        }
        if (s.contains("schedule")) {
            c.schedule.clear();
            for (const auto& seg : s.at("schedule")) {
                reject_unknown(seg, {"until_s", "severity"}, "config.session.schedule");
                auto sev = dataset::severity_from_name(seg.at("severity").get<std::string>());
                if (!sev)
                    throw std::invalid_argument("config.session.schedule: unknown severity " +
                                                seg.at("severity").dump());
                c.schedule.push_back({seg.at("until_s").get<double>(), *sev});
            }
        }
    }
    if (j.contains("service")) {
        const auto& s = j.at("service");
        reject_unknown(s, {"bind", "port"}, "config.service");
        c.bind = s.value("bind", c.bind);
        c.port = s.value("port", c.port);
    }
    return c;
}

RunConfig RunConfig::load(const std::optional<std::filesystem::path>& config_path,
                          std::optional<std::uint64_t> seed_flag,
                          std::optional<std::size_t> threads_flag,
                          std::optional<bool> reproducible_flag) {
    RunConfig cfg;
    if (config_path) {
        std::ifstream in(*config_path);
        if (!in) throw std::runtime_error("cannot open config file: " + config_path->string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("config parse error in " + config_path->string() + ": " +
                                     e.what());
        }
        cfg = from_json(j);
    }
    // Environment sits between the file and explicit flags.
    if (const char* env = std::getenv("SICKBENCH_SEED")) cfg.seed = std::stoull(env);
    if (const char* env = std::getenv("SICKBENCH_THREADS")) cfg.threads = std::stoul(env);
    if (const char* env = std::getenv("SICKBENCH_REPRODUCIBLE"))
        cfg.reproducible = std::string(env) == "1" || std::string(env) == "true";
    if (seed_flag) cfg.seed = *seed_flag;
    if (threads_flag) cfg.threads = *threads_flag;
    if (reproducible_flag) cfg.reproducible = *reproducible_flag;
    return cfg;
}

std::vector<dataset::ScheduleSegment> RunConfig::effective_schedule() const {
    if (!schedule.empty()) return schedule;
    // Default: four equal segments walking none -> high.
    std::vector<dataset::ScheduleSegment> s;
    for (int k = 0; k < 4; ++k)
        s.push_back({session_duration_s * (k + 1) / 4.0, static_cast<dataset::Severity>(k)});
    return s;
}

attacks::AttackConfig RunConfig::attack_config_for(attacks::Variant v) const {
    attacks::AttackConfig cfg = attack_base;
    cfg.variant = v;
    cfg.seed = derive_seed(seed, std::string("attack.") + attacks::variant_name(v));
    return cfg;
}

}  // namespace sickbench::cli
