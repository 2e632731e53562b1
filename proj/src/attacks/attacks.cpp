#include "sickbench/attacks/attacks.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "sickbench/models/train.hpp"

namespace sickbench::attacks {

using diffcore::Mode;
using diffcore::Reduction;
using diffcore::Tape;
using models::ModelTrace;
using models::one_hot;
using models::prediction_from_row;
using models::trace_forward;

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::MIFGSM: return "mifgsm";
        case Variant::PGD: return "pgd";
        case Variant::CW: return "cw";
    }
    return "pgd";
}

std::optional<Variant> variant_from_name(const std::string& name) {
    if (name == "mifgsm") return Variant::MIFGSM;
    if (name == "pgd") return Variant::PGD;
    if (name == "cw") return Variant::CW;
    return std::nullopt;
}

nlohmann::json AttackConfig::to_json() const {
    nlohmann::json j{{"variant", variant_name(variant)},
                     {"mifgsm",
                      {{"epsilon", mifgsm.epsilon}, {"steps", mifgsm.steps}, {"decay", mifgsm.decay}}},
                     {"pgd",
                      {{"epsilon", pgd.epsilon},
                       {"alpha", pgd.alpha},
                       {"iters", pgd.iters},
                       {"random_start", pgd.random_start}}},
                     {"cw",
                      {{"max_iters", cw.max_iters},
                       {"c", cw.c},
                       {"kappa", cw.kappa},
                       {"step", cw.step}}},
                     {"seed", seed}};
    if (target) j["target"] = dataset::severity_name(*target);
    if (cw.box_min) j["cw"]["box_min"] = *cw.box_min;
    if (cw.box_max) j["cw"]["box_max"] = *cw.box_max;
    return j;
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

}  // namespace

AttackConfig AttackConfig::from_json(const nlohmann::json& j) {
    reject_unknown(j, {"variant", "mifgsm", "pgd", "cw", "target", "seed"}, "attack config");
    AttackConfig c;
    if (j.contains("variant")) {
        auto v = variant_from_name(j.at("variant").get<std::string>());
        if (!v) throw std::invalid_argument("unknown attack variant: " + j.at("variant").dump());
        c.variant = *v;
    }
    if (j.contains("mifgsm")) {
        const auto& m = j.at("mifgsm");
        reject_unknown(m, {"epsilon", "steps", "decay"}, "mifgsm config");
        c.mifgsm.epsilon = m.value("epsilon", c.mifgsm.epsilon);
        c.mifgsm.steps = m.value("steps", c.mifgsm.steps);
        c.mifgsm.decay = m.value("decay", c.mifgsm.decay);
    }
    if (j.contains("pgd")) {
        const auto& p = j.at("pgd");
        reject_unknown(p, {"epsilon", "alpha", "iters", "random_start"}, "pgd config");
        c.pgd.epsilon = p.value("epsilon", c.pgd.epsilon);
        c.pgd.alpha = p.value("alpha", c.pgd.alpha);
        c.pgd.iters = p.value("iters", c.pgd.iters);
        c.pgd.random_start = p.value("random_start", c.pgd.random_start);
    }
    if (j.contains("cw")) {
        const auto& w = j.at("cw");
        reject_unknown(w, {"max_iters", "c", "kappa", "step", "box_min", "box_max"}, "cw config");
        c.cw.max_iters = w.value("max_iters", c.cw.max_iters);
        c.cw.c = w.value("c", c.cw.c);
        c.cw.kappa = w.value("kappa", c.cw.kappa);
        c.cw.step = w.value("step", c.cw.step);
        if (w.contains("box_min")) c.cw.box_min = w.at("box_min").get<std::vector<double>>();
        if (w.contains("box_max")) c.cw.box_max = w.at("box_max").get<std::vector<double>>();
    }
    if (j.contains("target")) {
        auto s = dataset::severity_from_name(j.at("target").get<std::string>());
        if (!s) throw std::invalid_argument("unknown target severity: " + j.at("target").dump());
        c.target = *s;
    }
    c.seed = j.value("seed", c.seed);
    return c;
}

void normalized_box(const dataset::ChannelStats& stats, std::vector<double>& lo,
                    std::vector<double>& hi) {
    const std::size_t c = stats.channel_count();
    lo.resize(c);
    hi.resize(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double sd = stats.stddev[ch];
        if (sd == 0.0) {
            lo[ch] = hi[ch] = 0.0;
        } else {
            lo[ch] = (stats.min[ch] - stats.mean[ch]) / sd;
            hi[ch] = (stats.max[ch] - stats.mean[ch]) / sd;
        }
    }
}

namespace {

constexpr std::size_t kChunk = 64;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

struct ForwardValues {
    Array grad;  // d(sum of per-example losses)/d(input), when requested
    Array logits;
    Array probs;
};

ForwardValues loss_and_grad(const TrainedModel& model, const Array& batch,
                            const std::vector<Severity>& labels, bool want_grad) {
    auto& m = const_cast<TrainedModel&>(model);  // infer mode never mutates
    ModelTrace tr = trace_forward(m, batch, Mode::Infer);
    ForwardValues out;
    out.logits = tr.tape.value(tr.logits);
    out.probs = tr.tape.value(tr.probs);
    if (want_grad) {
        // Sum (not mean) keeps per-example gradients independent of chunking.
        const auto loss =
            tr.tape.softmax_cross_entropy(tr.logits, one_hot(labels), Reduction::Sum);
        out.grad = tr.tape.grad(loss, {tr.input}).at(tr.input);
    }
    return out;
}

struct ChunkContext {
    const TrainedModel* model;
    const AttackConfig* cfg;
    std::vector<Severity> true_labels;
    Array clean;            // [B, T, C]
    std::size_t base_index; // global index of the first example, for seeding
};

void fill_example(AdversarialExample& ex, const ChunkContext& ctx, const Array& adv_batch,
                  std::size_t i, const Array& clean_logits, const Array& clean_probs,
                  const Prediction& adv_pred) {
    const std::size_t t = ctx.clean.shape[1];
    const std::size_t c = ctx.clean.shape[2];
    const std::size_t n = t * c;
    ex.clean = Array({t, c});
    ex.adversarial = Array({t, c});
    ex.delta = Array({t, c});
    std::copy(ctx.clean.data.begin() + i * n, ctx.clean.data.begin() + (i + 1) * n,
              ex.clean.data.begin());
    std::copy(adv_batch.data.begin() + i * n, adv_batch.data.begin() + (i + 1) * n,
              ex.adversarial.data.begin());
    double linf = 0.0, l2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double d = ex.adversarial.data[k] - ex.clean.data[k];
        ex.delta.data[k] = d;
        linf = std::max(linf, std::fabs(d));
        l2 += d * d;
    }
    ex.linf_norm = linf;
    ex.l2_norm = std::sqrt(l2);
    ex.clean_prediction = prediction_from_row(clean_logits, clean_probs, i);
    ex.adversarial_prediction = adv_pred;
    ex.success = ex.adversarial_prediction.severity != ctx.true_labels[i];
}

std::vector<AdversarialExample> run_sign_attack(const ChunkContext& ctx) {
    const AttackConfig& cfg = *ctx.cfg;
    const bool momentum = cfg.variant == Variant::MIFGSM;
    const std::size_t b = ctx.clean.shape[0];
    const std::size_t n = ctx.clean.shape[1] * ctx.clean.shape[2];
    const double eps = momentum ? cfg.mifgsm.epsilon : cfg.pgd.epsilon;
    const std::size_t iters = momentum ? cfg.mifgsm.steps : cfg.pgd.iters;
    const double step = momentum ? (iters > 0 ? eps / static_cast<double>(iters) : 0.0)
                                 : cfg.pgd.alpha;
    const double decay = cfg.mifgsm.decay;
    // Targeted mode descends the target-class loss instead of ascending the
    // true-class loss.
    const double dir = cfg.target ? -1.0 : 1.0;
    std::vector<Severity> loss_labels = ctx.true_labels;
    if (cfg.target) loss_labels.assign(b, *cfg.target);

    auto clean_fw = loss_and_grad(*ctx.model, ctx.clean, loss_labels, false);

    Array x = ctx.clean;
    if (!momentum && cfg.pgd.random_start && eps > 0.0) {
        for (std::size_t i = 0; i < b; ++i) {
            // Per-example stream so results do not depend on chunk grouping.
            std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + ctx.base_index + i);
            std::uniform_real_distribution<double> jitter(-eps, eps);
            for (std::size_t k = 0; k < n; ++k) x.data[i * n + k] += jitter(rng);
        }
    }

    Array g({b, ctx.clean.shape[1], ctx.clean.shape[2]});
    if (eps > 0.0 && iters > 0) {
        for (std::size_t it = 0; it < iters; ++it) {
            auto fw = loss_and_grad(*ctx.model, x, loss_labels, true);
            if (!fw.grad.all_finite())
                throw std::runtime_error(std::string(variant_name(cfg.variant)) +
                                         ": non-finite gradient at step " + std::to_string(it));
            for (std::size_t i = 0; i < b; ++i) {
                double* xr = x.data.data() + i * n;
                const double* cr = ctx.clean.data.data() + i * n;
                const double* gr = fw.grad.data.data() + i * n;
                if (momentum) {
                    double l1 = 0.0;
                    for (std::size_t k = 0; k < n; ++k) l1 += std::fabs(gr[k]);
                    double* mg = g.data.data() + i * n;
                    for (std::size_t k = 0; k < n; ++k) {
                        mg[k] = decay * mg[k] + gr[k] / (l1 + 1e-12);
                        xr[k] = std::clamp(xr[k] + step * sign(dir * mg[k]), cr[k] - eps,
                                           cr[k] + eps);
                    }
                } else {
                    for (std::size_t k = 0; k < n; ++k) {
                        xr[k] = std::clamp(xr[k] + step * sign(dir * gr[k]), cr[k] - eps,
                                           cr[k] + eps);
                    }
                }
            }
        }
    }

    auto final_fw = loss_and_grad(*ctx.model, x, loss_labels, false);
    std::vector<AdversarialExample> out(b);
    for (std::size_t i = 0; i < b; ++i) {
        fill_example(out[i], ctx, x, i, clean_fw.logits, clean_fw.probs,
                     prediction_from_row(final_fw.logits, final_fw.probs, i));
    }
    return out;
}

std::vector<AdversarialExample> run_cw(const ChunkContext& ctx) {
    const AttackConfig& cfg = *ctx.cfg;
    const std::size_t b = ctx.clean.shape[0];
    const std::size_t tlen = ctx.clean.shape[1];
    const std::size_t ch = ctx.clean.shape[2];
    const std::size_t n = tlen * ch;
    constexpr double kTiny = 1e-12;

    std::vector<double> lo, hi;
    if (cfg.cw.box_min && cfg.cw.box_max) {
        lo = *cfg.cw.box_min;
        hi = *cfg.cw.box_max;
        if (lo.size() != ch || hi.size() != ch)
            throw std::invalid_argument("cw: box channel count mismatch");
    } else {
        normalized_box(ctx.model->stats, lo, hi);
    }

    // Widen per example so the box always covers the clean window.
    Array mid({b, ch}), half({b, ch});
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t c = 0; c < ch; ++c) {
            double l = lo[c], h = hi[c];
            for (std::size_t t = 0; t < tlen; ++t) {
                const double v = ctx.clean.data[i * n + t * ch + c];
                l = std::min(l, v);
                h = std::max(h, v);
            }
            mid.at(i, c) = (h + l) / 2.0;
            half.at(i, c) = (h - l) / 2.0;
        }
    }

    // Change of variables: x' = mid + half * tanh(w); start at the clean input.
    Array w({b, tlen, ch});
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t t = 0; t < tlen; ++t) {
            for (std::size_t c = 0; c < ch; ++c) {
                const double hf = half.at(i, c);
                if (hf < kTiny) continue;
                const double ratio = std::clamp(
                    (ctx.clean.data[i * n + t * ch + c] - mid.at(i, c)) / hf, -1.0 + 1e-9,
                    1.0 - 1e-9);
                w.data[i * n + t * ch + c] = std::atanh(ratio);
            }
        }
    }

    auto clean_fw = loss_and_grad(*ctx.model, ctx.clean, ctx.true_labels, false);

    Array adam_m({b, tlen, ch}), adam_v({b, tlen, ch});
    Array x({b, tlen, ch});
    std::vector<AdversarialExample> out(b);
    std::vector<double> best_l2(b, std::numeric_limits<double>::infinity());
    std::vector<Prediction> best_pred(b);
    Array best_x = ctx.clean;
    std::vector<char> found(b, 0);

    auto& model = const_cast<TrainedModel&>(*ctx.model);
    const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;

    for (std::size_t it = 0;; ++it) {
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t t = 0; t < tlen; ++t)
                for (std::size_t c = 0; c < ch; ++c)
                    x.data[i * n + t * ch + c] =
                        mid.at(i, c) + half.at(i, c) * std::tanh(w.data[i * n + t * ch + c]);

        ModelTrace tr = trace_forward(model, x, Mode::Infer);
        const Array& logits = tr.tape.value(tr.logits);
        const Array& probs = tr.tape.value(tr.probs);

        // Track the successful iterate with the smallest L2 seen.
        for (std::size_t i = 0; i < b; ++i) {
            Prediction p = prediction_from_row(logits, probs, i);
            const bool succ = cfg.target ? p.severity == *cfg.target
                                         : p.severity != ctx.true_labels[i];
            if (!succ) continue;
            double l2 = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double d = x.data[i * n + k] - ctx.clean.data[i * n + k];
                l2 += d * d;
            }
            l2 = std::sqrt(l2);
            if (l2 < best_l2[i]) {
                best_l2[i] = l2;
                best_pred[i] = p;
                found[i] = 1;
                std::copy(x.data.begin() + i * n, x.data.begin() + (i + 1) * n,
                          best_x.data.begin() + i * n);
            }
        }
        if (it == cfg.cw.max_iters) break;

        // f = max(Z_true - max_{j != true} Z_j, -kappa) untargeted;
        // f = max(max_{j != target} Z_j - Z_target, -kappa) targeted.
        // Rows at the hinge floor contribute no gradient.
        Array margin_sel({b, 4});
        for (std::size_t i = 0; i < b; ++i) {
            const std::size_t anchor = static_cast<std::size_t>(
                cfg.target ? *cfg.target : ctx.true_labels[i]);
            std::size_t runner = anchor == 0 ? 1 : 0;
            for (std::size_t j = 0; j < 4; ++j) {
                if (j == anchor) continue;
                if (logits.at(i, j) > logits.at(i, runner)) runner = j;
            }
            const double margin = cfg.target
                                      ? logits.at(i, runner) - logits.at(i, anchor)
                                      : logits.at(i, anchor) - logits.at(i, runner);
            if (margin > -cfg.cw.kappa) {
                const double s = cfg.target ? -1.0 : 1.0;
                margin_sel.at(i, anchor) = s * cfg.cw.c;
                margin_sel.at(i, runner) = -s * cfg.cw.c;
            }
        }
        const auto margin_node = tr.tape.inner(tr.logits, margin_sel);
        Array dfdx = tr.tape.grad(margin_node, {tr.input}).at(tr.input);
        if (!dfdx.all_finite())
            throw std::runtime_error("cw: non-finite objective gradient at iteration " +
                                     std::to_string(it));

        // d/dw [ ||x'-clean||^2 + c*f(x') ], chained through the tanh.
        const std::size_t step_count = it + 1;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count));
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t t = 0; t < tlen; ++t) {
                for (std::size_t c = 0; c < ch; ++c) {
                    const std::size_t k = i * n + t * ch + c;
                    const double th = std::tanh(w.data[k]);
                    const double dxdw = half.at(i, c) * (1.0 - th * th);
                    const double dldx =
                        2.0 * (x.data[k] - ctx.clean.data[k]) + dfdx.data[k];
                    const double gw = dldx * dxdw;
                    adam_m.data[k] = b1 * adam_m.data[k] + (1.0 - b1) * gw;
                    adam_v.data[k] = b2 * adam_v.data[k] + (1.0 - b2) * gw * gw;
                    w.data[k] -= cfg.cw.step * (adam_m.data[k] / bc1) /
                                 (std::sqrt(adam_v.data[k] / bc2) + adam_eps);
                }
            }
        }
    }

    // Final iterate for examples that never succeeded.
    auto final_fw = loss_and_grad(*ctx.model, x, ctx.true_labels, false);
    for (std::size_t i = 0; i < b; ++i) {
        if (!found[i]) {
            std::copy(x.data.begin() + i * n, x.data.begin() + (i + 1) * n,
                      best_x.data.begin() + i * n);
            best_pred[i] = prediction_from_row(final_fw.logits, final_fw.probs, i);
        }
        fill_example(out[i], ctx, best_x, i, clean_fw.logits, clean_fw.probs, best_pred[i]);
    }
    return out;
}

std::vector<AdversarialExample> attack_chunk(const TrainedModel& model,
                                             const std::vector<SensorWindow>& windows,
                                             std::size_t begin, std::size_t end,
                                             const AttackConfig& cfg) {
    const std::size_t b = end - begin;
    const std::size_t t = dataset::kWindowLength;
    const std::size_t c = model.channels();
    ChunkContext ctx;
    ctx.model = &model;
    ctx.cfg = &cfg;
    ctx.base_index = begin;
    ctx.clean = Array({b, t, c});
    ctx.true_labels.resize(b);
    for (std::size_t i = 0; i < b; ++i) {
        const auto& w = windows[begin + i];
        if (!w.label) throw std::invalid_argument("attack requires labeled windows");
        if (w.values.rank() != 2 || w.values.shape[0] != t || w.values.shape[1] != c)
            throw std::invalid_argument("attack window shape mismatch: got " +
                                        diffcore::shape_str(w.values.shape));
        std::copy(w.values.data.begin(), w.values.data.end(), ctx.clean.data.begin() + i * t * c);
        ctx.true_labels[i] = *w.label;
    }
    return cfg.variant == Variant::CW ? run_cw(ctx) : run_sign_attack(ctx);
}

}  // namespace

AdversarialExample mifgsm(const TrainedModel& model, const SensorWindow& window,
                          Severity true_label, const AttackConfig& cfg) {
    if (cfg.variant != Variant::MIFGSM)
        throw std::invalid_argument("mifgsm called with a different variant configured");
    SensorWindow w = window;
    w.label = true_label;
    return attack_chunk(model, {w}, 0, 1, cfg).front();
}

AdversarialExample pgd(const TrainedModel& model, const SensorWindow& window, Severity true_label,
                       const AttackConfig& cfg) {
    if (cfg.variant != Variant::PGD)
        throw std::invalid_argument("pgd called with a different variant configured");
    SensorWindow w = window;
    w.label = true_label;
    return attack_chunk(model, {w}, 0, 1, cfg).front();
}

AdversarialExample cw(const TrainedModel& model, const SensorWindow& window, Severity true_label,
                      const AttackConfig& cfg) {
    if (cfg.variant != Variant::CW)
        throw std::invalid_argument("cw called with a different variant configured");
    SensorWindow w = window;
    w.label = true_label;
    return attack_chunk(model, {w}, 0, 1, cfg).front();
}

BatchAttackResult batch_attack(const TrainedModel& model, const std::vector<SensorWindow>& windows,
                               const AttackConfig& cfg, std::size_t threads) {
    if (windows.empty()) throw std::invalid_argument("batch_attack: empty window set");
    BatchAttackResult result;
    result.examples.resize(windows.size());

    std::vector<std::pair<std::size_t, std::size_t>> chunks;
    for (std::size_t begin = 0; begin < windows.size(); begin += kChunk)
        chunks.emplace_back(begin, std::min(begin + kChunk, windows.size()));

    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= chunks.size()) return;
            try {
                auto [begin, end] = chunks[idx];
                auto examples = attack_chunk(model, windows, begin, end, cfg);
                for (std::size_t i = 0; i < examples.size(); ++i)
                    result.examples[begin + i] = std::move(examples[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    if (threads <= 1 || chunks.size() == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const std::size_t n = std::min(threads, chunks.size());
        pool.reserve(n);
        for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    auto& s = result.summary;
    s.count = result.examples.size();
    for (const auto& ex : result.examples) {
        s.successes += ex.success ? 1 : 0;
        s.mean_linf += ex.linf_norm;
        s.mean_l2 += ex.l2_norm;
    }
    s.success_rate = static_cast<double>(s.successes) / static_cast<double>(s.count);
    s.mean_linf /= static_cast<double>(s.count);
    s.mean_l2 /= static_cast<double>(s.count);
    return result;
}

nlohmann::json example_sidecar(const AdversarialExample& ex) {
    auto pred_json = [](const Prediction& p) {
        return nlohmann::json{{"severity", dataset::severity_name(p.severity)},
                              {"probabilities", p.probabilities},
                              {"logits", p.logits}};
    };
    return {{"linf_norm", ex.linf_norm},
            {"l2_norm", ex.l2_norm},
            {"clean", pred_json(ex.clean_prediction)},
            {"adversarial", pred_json(ex.adversarial_prediction)},
            {"success", ex.success}};
}

}  // namespace sickbench::attacks
