#include "sickbench/session/session.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sickbench/dataset/csv.hpp"
#include "sickbench/dataset/preprocess.hpp"

namespace sickbench::session {

namespace {

using Clock = std::chrono::steady_clock;

dataset::Stream load_source(const SessionConfig& cfg) {
    if (std::holds_alternative<SynthSource>(cfg.source)) {
        const auto& synth = std::get<SynthSource>(cfg.source);
        return dataset::synth_stream(cfg.duration_s, synth.schedule, synth.seed,
                                     cfg.model->schema, synth.params);
    }
    const auto& path = std::get<std::filesystem::path>(cfg.source);
    auto stream = dataset::load_csv(path, cfg.model->schema);
    const auto max_frames =
        static_cast<std::size_t>(cfg.duration_s * cfg.frame_rate);
    if (stream.size() > max_frames) stream.resize(max_frames);
    return stream;
}

}  // namespace

SessionTrace run_session(const SessionConfig& cfg) {
    if (cfg.model == nullptr) throw std::invalid_argument("run_session: no model");
    if (cfg.duration_s <= 0.0) throw std::invalid_argument("run_session: duration must be > 0");
    if (cfg.window_stride < 1) throw std::invalid_argument("run_session: stride must be >= 1");

    const dataset::Stream stream = load_source(cfg);
    const std::size_t t = dataset::kWindowLength;
    const std::size_t c = cfg.model->channels();
    if (stream.size() < t)
        throw std::runtime_error("run_session: stream shorter than one window (" +
                                 std::to_string(stream.size()) + " < " + std::to_string(t) +
                                 " frames)");

    const double dt = 1.0 / cfg.frame_rate;
    mitigation::VignetteEaser easer(mitigation::vignette_for(Severity::None), cfg.easing_ramp_s);

    SessionTrace trace;
    for (std::size_t frame = 0; frame < stream.size(); ++frame) {
        easer.advance(dt);
        const bool at_window = frame + 1 >= t && (frame + 1 - t) % cfg.window_stride == 0;
        if (!at_window) continue;

        const double now = static_cast<double>(frame) / cfg.frame_rate;
        const std::size_t start = frame + 1 - t;
        diffcore::Array raw({t, c});
        for (std::size_t r = 0; r < t; ++r) {
            const auto& vals = stream[start + r].values;
            std::copy(vals.begin(), vals.end(), raw.data.begin() + r * c);
        }

        SessionRecord rec;
        rec.t = now;
        const auto& last = stream[frame];
        rec.true_severity = last.fms ? dataset::fms_to_severity(*last.fms) : Severity::None;
        rec.attack_active = cfg.attack && now >= cfg.attack->start_s &&
                            now < cfg.attack->start_s + cfg.attack->duration_s;

        const auto t0 = Clock::now();
        const diffcore::Array window = dataset::preprocess_window_for_model(
            raw, cfg.model->stats, cfg.smoothing_alpha);
        const Prediction clean = models::predict(*cfg.model, window);
        rec.clean_prediction = clean.severity;
        if (rec.attack_active) {
            // The attacker regenerates the perturbation against the live window.
            dataset::SensorWindow labeled{window, rec.true_severity};
            const auto ex =
                attacks::batch_attack(*cfg.model, {labeled}, cfg.attack->config).examples.front();
            rec.served_prediction = ex.adversarial_prediction.severity;
        } else {
            rec.served_prediction = clean.severity;
        }
        rec.inference_latency_s = std::chrono::duration<double>(Clock::now() - t0).count();

        easer.set_target(mitigation::vignette_for(rec.served_prediction));
        rec.vignette = easer.params();
        rec.consequence = mitigation::consequence(rec.true_severity, rec.served_prediction);
        trace.records.push_back(std::move(rec));
    }
    return trace;
}

void export_trace(const SessionTrace& trace, const std::filesystem::path& path,
                  bool zero_latency) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace: " + path.string());
    out << "t,true,clean_pred,served_pred,AF,F,attack_active,latency_s,consequence\n";
    char line[256];
    for (const auto& r : trace.records) {
        std::snprintf(line, sizeof(line), "%.17g,%s,%s,%s,%.17g,%.17g,%d,%.17g,%s\n", r.t,
                      dataset::severity_name(r.true_severity),
                      dataset::severity_name(r.clean_prediction),
                      dataset::severity_name(r.served_prediction), r.vignette.aperture_fraction,
                      r.vignette.feathering, r.attack_active ? 1 : 0,
                      zero_latency ? 0.0 : r.inference_latency_s,
                      mitigation::consequence_name(r.consequence));
        out << line;
    }
}

SessionTrace import_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read trace: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty trace: " + path.string());
    SessionTrace trace;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        SessionRecord r;
        auto next = [&]() {
            if (!std::getline(row, cell, ',')) throw std::runtime_error("short trace row");
            return cell;
        };
        r.t = std::stod(next());
        auto sev = [&](const std::string& s) {
            auto v = dataset::severity_from_name(s);
            if (!v) throw std::runtime_error("bad severity in trace: " + s);
            return *v;
        };
        r.true_severity = sev(next());
        r.clean_prediction = sev(next());
        r.served_prediction = sev(next());
        r.vignette.aperture_fraction = std::stod(next());
        r.vignette.feathering = std::stod(next());
        r.attack_active = next() == "1";
        r.inference_latency_s = std::stod(next());
        const std::string cons = next();
        r.consequence = mitigation::consequence(r.true_severity, r.served_prediction);
        if (cons != mitigation::consequence_name(r.consequence))
            throw std::runtime_error("trace consequence column inconsistent at t=" +
                                     std::to_string(r.t));
        trace.records.push_back(std::move(r));
    }
    return trace;
}

nlohmann::json session_summary(const SessionTrace& trace, bool zero_latency) {
    nlohmann::json tallies = nlohmann::json::object();
    std::size_t in_attack = 0, in_attack_correct = 0;
    std::size_t outside = 0, outside_correct = 0;
    double latency_sum = 0.0;
    for (const auto& r : trace.records) {
        const char* name = mitigation::consequence_name(r.consequence);
        tallies[name] = tallies.value(name, 0) + 1;
        const bool correct = r.served_prediction == r.true_severity;
        if (r.attack_active) {
            ++in_attack;
            in_attack_correct += correct ? 1 : 0;
        } else {
            ++outside;
            outside_correct += correct ? 1 : 0;
        }
        latency_sum += r.inference_latency_s;
    }
    nlohmann::json j;
    j["schema_version"] = 1;
    j["records"] = trace.records.size();
    j["consequences"] = tallies;
    j["accuracy_during_attack"] =
        in_attack == 0 ? 1.0 : static_cast<double>(in_attack_correct) / in_attack;
    j["accuracy_outside_attack"] =
        outside == 0 ? 1.0 : static_cast<double>(outside_correct) / outside;
    j["records_during_attack"] = in_attack;
    j["mean_latency_s"] = zero_latency || trace.records.empty()
                              ? 0.0
                              : latency_sum / static_cast<double>(trace.records.size());
    return j;
}

}  // namespace sickbench::session
