#include "sickbench/models/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace sickbench::models {

Array& WeightStore::add(const std::string& name, Array value) {
    if (index_.count(name)) throw std::invalid_argument("duplicate weight name: " + name);
    index_[name] = entries.size();
    entries.push_back({name, std::move(value)});
    return entries.back().value;
}

Array& WeightStore::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown weight: " + name);
    return entries[it->second].value;
}

const Array& WeightStore::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown weight: " + name);
    return entries[it->second].value;
}

std::size_t WeightStore::total_params() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.value.numel();
    return n;
}

namespace {

class FanInInit {
public:
    explicit FanInInit(std::uint64_t seed) : rng_(seed) {}

    Array uniform(std::vector<std::size_t> shape, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Array a(std::move(shape));
        for (double& v : a.data) v = dist(rng_);
        return a;
    }

private:
    std::mt19937_64 rng_;
};

std::size_t tcn_block_in_channels(const DeepTcnConfig& cfg, std::size_t input_channels,
                                  std::size_t block) {
    return block == 0 ? input_channels : cfg.channels;
}

std::size_t dilation_for_block(const DeepTcnConfig& cfg, std::size_t block) {
    std::size_t d = 1;
    for (std::size_t i = 0; i < block; ++i) d *= cfg.dilation_base;
    return d;
}

}  // namespace

std::size_t deeptcn_param_count(const DeepTcnConfig& cfg, std::size_t channels) {
    // Per block: kernel k*Cin*ch + bias ch + bn gamma/beta 2*ch
    //            + skip projection Cin*ch when Cin != ch.
    // Head: ch*classes + classes.
    std::size_t n = 0;
    for (std::size_t b = 0; b < cfg.residual_blocks; ++b) {
        const std::size_t cin = tcn_block_in_channels(cfg, channels, b);
        n += cfg.kernel_size * cin * cfg.channels + cfg.channels;
        n += 2 * cfg.channels;
        if (cin != cfg.channels) n += cin * cfg.channels;
    }
    n += cfg.channels * cfg.classes + cfg.classes;
    return n;
}

std::size_t transformer_param_count(const TransformerConfig& cfg, std::size_t channels) {
    // Embedding C*d + d; per layer: 4 projections (d*d + d), 2 layer norms
    // (2*d each), feed-forward d*ff + ff + ff*d + d. Head: d*classes + classes.
    const std::size_t d = cfg.d_model;
    std::size_t n = channels * d + d;
    const std::size_t per_layer = 4 * (d * d + d) + 2 * (2 * d) + (d * cfg.ff_dim + cfg.ff_dim) +
                                  (cfg.ff_dim * d + d);
    n += cfg.encoder_layers * per_layer;
    n += d * cfg.classes + cfg.classes;
    return n;
}

TrainedModel build_deeptcn(const DeepTcnConfig& cfg, const dataset::FeatureSchema& schema,
                           const dataset::ChannelStats& stats, std::uint64_t seed) {
    cfg.validate();
    schema.validate();
    TrainedModel m;
    m.family = "deeptcn";
    m.tcn = cfg;
    m.schema = schema;
    m.stats = stats;

    const std::size_t c = schema.channel_count();
    FanInInit init(seed);
    for (std::size_t b = 0; b < cfg.residual_blocks; ++b) {
        const std::size_t cin = tcn_block_in_channels(cfg, c, b);
        const std::string p = "block" + std::to_string(b) + ".";
        m.weights.add(p + "conv.kernel",
                      init.uniform({cfg.kernel_size, cin, cfg.channels}, cfg.kernel_size * cin));
        m.weights.add(p + "conv.bias", Array({cfg.channels}));
        m.weights.add(p + "bn.gamma", Array::full({cfg.channels}, 1.0));
        m.weights.add(p + "bn.beta", Array({cfg.channels}));
        if (cin != cfg.channels)
            m.weights.add(p + "skip.weight", init.uniform({cin, cfg.channels}, cin));
        m.bn_stats.push_back({Array({cfg.channels}), Array::full({cfg.channels}, 1.0)});
    }
    m.weights.add("head.weight", init.uniform({cfg.channels, cfg.classes}, cfg.channels));
    m.weights.add("head.bias", Array({cfg.classes}));
    return m;
}

TrainedModel build_transformer(const TransformerConfig& cfg, const dataset::FeatureSchema& schema,
                               const dataset::ChannelStats& stats, std::uint64_t seed) {
    cfg.validate();
    schema.validate();
    TrainedModel m;
    m.family = "transformer";
    m.transformer = cfg;
    m.schema = schema;
    m.stats = stats;

    const std::size_t c = schema.channel_count();
    const std::size_t d = cfg.d_model;
    FanInInit init(seed);
    m.weights.add("embed.weight", init.uniform({c, d}, c));
    m.weights.add("embed.bias", Array({d}));
    for (std::size_t l = 0; l < cfg.encoder_layers; ++l) {
        const std::string p = "enc" + std::to_string(l) + ".";
        for (const char* name : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) {
            m.weights.add(p + name, init.uniform({d, d}, d));
            m.weights.add(p + name + std::string(".bias"), Array({d}));
        }
        m.weights.add(p + "ln1.gamma", Array::full({d}, 1.0));
        m.weights.add(p + "ln1.beta", Array({d}));
        m.weights.add(p + "ff.w1", init.uniform({d, cfg.ff_dim}, d));
        m.weights.add(p + "ff.b1", Array({cfg.ff_dim}));
        m.weights.add(p + "ff.w2", init.uniform({cfg.ff_dim, d}, cfg.ff_dim));
        m.weights.add(p + "ff.b2", Array({d}));
        m.weights.add(p + "ln2.gamma", Array::full({d}, 1.0));
        m.weights.add(p + "ln2.beta", Array({d}));
    }
    m.weights.add("head.weight", init.uniform({d, cfg.classes}, d));
    m.weights.add("head.bias", Array({cfg.classes}));
    return m;
}

namespace {

void check_batch_shape(const TrainedModel& model, const Array& batch) {
    if (batch.rank() != 3 || batch.shape[1] != dataset::kWindowLength ||
        batch.shape[2] != model.channels()) {
        throw std::invalid_argument(
            "model input must be [batch, " + std::to_string(dataset::kWindowLength) + ", " +
            std::to_string(model.channels()) + "], got " + diffcore::shape_str(batch.shape));
    }
}

}  // namespace

ModelTrace trace_forward(TrainedModel& model, const Array& batch, Mode mode,
                         std::uint64_t dropout_seed) {
    check_batch_shape(model, batch);
    ModelTrace tr{Tape(dropout_seed), 0, 0, 0, {}};
    Tape& t = tr.tape;
    tr.input = t.input(batch);

    std::unordered_map<std::string, Tape::NodeId> w;
    for (const auto& e : model.weights.entries) {
        const Tape::NodeId id = t.input(e.value);
        w[e.name] = id;
        tr.weight_nodes.emplace_back(e.name, id);
    }

    if (model.family == "deeptcn") {
        const auto& cfg = model.tcn;
        const std::size_t c = model.channels();
        Tape::NodeId h = tr.input;
        for (std::size_t b = 0; b < cfg.residual_blocks; ++b) {
            const std::size_t cin = tcn_block_in_channels(cfg, c, b);
            const std::string p = "block" + std::to_string(b) + ".";
            Tape::NodeId conv =
                t.conv1d_dilated(h, w.at(p + "conv.kernel"), w.at(p + "conv.bias"),
                                 dilation_for_block(cfg, b), diffcore::ConvPadding::Causal);
            conv = t.batch_norm(conv, w.at(p + "bn.gamma"), w.at(p + "bn.beta"),
                                &model.bn_stats[b], mode);
            conv = t.relu(conv);
            conv = t.dropout(conv, cfg.dropout, mode);
            const Tape::NodeId skip =
                cin != cfg.channels ? t.dense(h, w.at(p + "skip.weight")) : h;
            h = t.residual_add(conv, skip);
        }
        const Tape::NodeId pooled = t.global_avg_pool(h);
        tr.logits = t.dense(pooled, w.at("head.weight"), w.at("head.bias"));
    } else if (model.family == "transformer") {
        const auto& cfg = model.transformer;
        Tape::NodeId h = t.dense(tr.input, w.at("embed.weight"), w.at("embed.bias"));
        h = t.sinusoidal_pe(h);
        for (std::size_t l = 0; l < cfg.encoder_layers; ++l) {
            const std::string p = "enc" + std::to_string(l) + ".";
            const Tape::NodeId q = t.dense(h, w.at(p + "attn.wq"), w.at(p + "attn.wq.bias"));
            const Tape::NodeId k = t.dense(h, w.at(p + "attn.wk"), w.at(p + "attn.wk.bias"));
            const Tape::NodeId v = t.dense(h, w.at(p + "attn.wv"), w.at(p + "attn.wv.bias"));
            Tape::NodeId a = t.scaled_dot_attention(q, k, v, cfg.heads);
            a = t.dense(a, w.at(p + "attn.wo"), w.at(p + "attn.wo.bias"));
            a = t.dropout(a, cfg.dropout, mode);
            h = t.layer_norm(t.residual_add(h, a), w.at(p + "ln1.gamma"), w.at(p + "ln1.beta"));
            Tape::NodeId f = t.dense(h, w.at(p + "ff.w1"), w.at(p + "ff.b1"));
            f = t.relu(f);
            f = t.dense(f, w.at(p + "ff.w2"), w.at(p + "ff.b2"));
            f = t.dropout(f, cfg.dropout, mode);
            h = t.layer_norm(t.residual_add(h, f), w.at(p + "ln2.gamma"), w.at(p + "ln2.beta"));
        }
        const Tape::NodeId pooled = t.global_avg_pool(h);
        tr.logits = t.dense(pooled, w.at("head.weight"), w.at("head.bias"));
    } else {
        throw std::invalid_argument("unknown model family: " + model.family);
    }
    tr.probs = t.softmax(tr.logits);
    return tr;
}

Prediction prediction_from_row(const Array& logits, const Array& probs, std::size_t row) {
    Prediction p;
    const std::size_t c = logits.shape.back();
    if (c != 4) throw std::invalid_argument("prediction expects 4 classes");
    std::size_t best = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        p.logits[i] = logits.data[row * 4 + i];
        p.probabilities[i] = probs.data[row * 4 + i];
        if (p.probabilities[i] > p.probabilities[best]) best = i;  // ties keep lower index
    }
    p.severity = static_cast<Severity>(static_cast<int>(best));
    return p;
}

std::vector<Prediction> predict_batch(const TrainedModel& model,
                                      const std::vector<const Array*>& windows) {
    std::vector<Prediction> out;
    out.reserve(windows.size());
    const std::size_t t = dataset::kWindowLength;
    const std::size_t c = model.channels();
    constexpr std::size_t kChunk = 128;
    // Infer mode never mutates running stats, so the const_cast below stays
    // observationally const.
    auto& mutable_model = const_cast<TrainedModel&>(model);
    for (std::size_t start = 0; start < windows.size(); start += kChunk) {
        const std::size_t n = std::min(kChunk, windows.size() - start);
        Array batch({n, t, c});
        for (std::size_t i = 0; i < n; ++i) {
            const Array& w = *windows[start + i];
            if (w.rank() != 2 || w.shape[0] != t || w.shape[1] != c)
                throw std::invalid_argument("window must be [" + std::to_string(t) + ", " +
                                            std::to_string(c) + "], got " +
                                            diffcore::shape_str(w.shape));
            std::copy(w.data.begin(), w.data.end(), batch.data.begin() + i * t * c);
        }
        ModelTrace tr = trace_forward(mutable_model, batch, Mode::Infer);
        const Array& logits = tr.tape.value(tr.logits);
        const Array& probs = tr.tape.value(tr.probs);
        for (std::size_t i = 0; i < n; ++i) out.push_back(prediction_from_row(logits, probs, i));
    }
    return out;
}

Prediction predict(const TrainedModel& model, const Array& window) {
    return predict_batch(model, {&window}).front();
}

Array one_hot(const std::vector<Severity>& labels) {
    Array y({labels.size(), 4});
    for (std::size_t i = 0; i < labels.size(); ++i)
        y.data[i * 4 + static_cast<std::size_t>(labels[i])] = 1.0;
    return y;
}

Array input_gradient(const TrainedModel& model, const Array& window, Severity label) {
    auto& mutable_model = const_cast<TrainedModel&>(model);
    const std::size_t t = dataset::kWindowLength;
    const std::size_t c = model.channels();
    if (window.rank() != 2 || window.shape[0] != t || window.shape[1] != c)
        throw std::invalid_argument("input_gradient: window must be [" + std::to_string(t) + ", " +
                                    std::to_string(c) + "], got " + diffcore::shape_str(window.shape));
    Array batch({1, t, c}, window.data);
    ModelTrace tr = trace_forward(mutable_model, batch, Mode::Infer);
    const Tape::NodeId loss = tr.tape.softmax_cross_entropy(tr.logits, one_hot({label}));
    auto grads = tr.tape.grad(loss, {tr.input});
    Array g = std::move(grads.at(tr.input));
    g.shape = {t, c};
    return g;
}

}  // namespace sickbench::models
