#include "sickbench/models/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace sickbench::models {

void AdamState::step(Array& param, const Array& grad, double lr, double beta1, double beta2,
                     double eps) {
    if (m.shape.empty()) {
        m = Array(param.shape);
        v = Array(param.shape);
    }
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.numel(); ++i) {
        m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * grad.data[i];
        v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * grad.data[i] * grad.data[i];
        const double mhat = m.data[i] / bc1;
        const double vhat = v.data[i] / bc2;
        param.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

namespace {

struct LabeledBatch {
    Array inputs;   // [B, T, C]
    Array targets;  // [B, 4]
};

LabeledBatch assemble(const std::vector<dataset::SensorWindow>& set,
                      const std::vector<std::size_t>& order, std::size_t begin, std::size_t end,
                      std::size_t channels) {
    const std::size_t b = end - begin;
    const std::size_t t = dataset::kWindowLength;
    LabeledBatch out{Array({b, t, channels}), Array({b, 4})};
    for (std::size_t i = 0; i < b; ++i) {
        const auto& w = set[order[begin + i]];
        if (!w.label) throw std::invalid_argument("training window without a label");
        std::copy(w.values.data.begin(), w.values.data.end(),
                  out.inputs.data.begin() + i * t * channels);
        out.targets.data[i * 4 + static_cast<std::size_t>(*w.label)] = 1.0;
    }
    return out;
}

struct Snapshot {
    std::vector<Array> weights;
    std::vector<diffcore::RunningStats> bn_stats;
};

Snapshot take_snapshot(const TrainedModel& m) {
    Snapshot s;
    s.weights.reserve(m.weights.entries.size());
    for (const auto& e : m.weights.entries) s.weights.push_back(e.value);
    s.bn_stats = m.bn_stats;
    return s;
}

void restore_snapshot(TrainedModel& m, const Snapshot& s) {
    for (std::size_t i = 0; i < s.weights.size(); ++i) m.weights.entries[i].value = s.weights[i];
    m.bn_stats = s.bn_stats;
}

}  // namespace

double evaluate_loss(const TrainedModel& model, const std::vector<dataset::SensorWindow>& set) {
    if (set.empty()) throw std::invalid_argument("evaluate_loss: empty set");
    auto& mutable_model = const_cast<TrainedModel&>(model);
    const std::size_t t = dataset::kWindowLength;
    const std::size_t c = model.channels();
    constexpr std::size_t kChunk = 128;
    double total = 0.0;
    for (std::size_t start = 0; start < set.size(); start += kChunk) {
        const std::size_t n = std::min(kChunk, set.size() - start);
        Array batch({n, t, c});
        std::vector<Severity> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& w = set[start + i];
            if (!w.label) throw std::invalid_argument("evaluation window without a label");
            std::copy(w.values.data.begin(), w.values.data.end(), batch.data.begin() + i * t * c);
            labels[i] = *w.label;
        }
        ModelTrace tr = trace_forward(mutable_model, batch, Mode::Infer);
        const auto loss = tr.tape.softmax_cross_entropy(tr.logits, one_hot(labels),
                                                        diffcore::Reduction::Sum);
        total += tr.tape.value(loss).data[0];
    }
    return total / static_cast<double>(set.size());
}

double evaluate_accuracy(const TrainedModel& model, const std::vector<dataset::SensorWindow>& set) {
    if (set.empty()) throw std::invalid_argument("evaluate_accuracy: empty set");
    std::vector<const Array*> ptrs;
    ptrs.reserve(set.size());
    for (const auto& w : set) ptrs.push_back(&w.values);
    auto preds = predict_batch(model, ptrs);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < set.size(); ++i)
        if (set[i].label && preds[i].severity == *set[i].label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(set.size());
}

void train_model(TrainedModel& model, const std::vector<dataset::SensorWindow>& train_set,
                 const std::vector<dataset::SensorWindow>& val_set, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.empty() || val_set.empty())
        throw std::invalid_argument("train_model: empty train or val split");

    const std::size_t c = model.channels();
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x6a09e667f3bcc909ULL);

    std::vector<AdamState> adam(model.weights.entries.size());
    model.history.clear();

    double best_val = std::numeric_limits<double>::infinity();
    Snapshot best = take_snapshot(model);
    std::size_t epochs_since_improvement = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < train_set.size();
             begin += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(begin + cfg.batch_size, train_set.size());
            LabeledBatch batch = assemble(train_set, order, begin, end, c);
            const std::uint64_t dropout_seed =
                cfg.seed * 0x100000001b3ULL + epoch * 0x9e3779b9ULL + batch_index;
            ModelTrace tr = trace_forward(model, batch.inputs, Mode::Train, dropout_seed);
            const auto loss_node = tr.tape.softmax_cross_entropy(tr.logits, batch.targets);
            const double loss = tr.tape.value(loss_node).data[0];
            if (!std::isfinite(loss)) {
                throw std::runtime_error("training aborted: non-finite loss " +
                                         std::to_string(loss) + " at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(batch_index));
            }
            epoch_loss += loss * static_cast<double>(end - begin);

            std::vector<Tape::NodeId> wrt;
            wrt.reserve(tr.weight_nodes.size());
            for (const auto& [name, id] : tr.weight_nodes) wrt.push_back(id);
            auto grads = tr.tape.grad(loss_node, wrt);
            for (std::size_t i = 0; i < tr.weight_nodes.size(); ++i) {
                adam[i].step(model.weights.entries[i].value, grads.at(tr.weight_nodes[i].second),
                             cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
            }
        }
        epoch_loss /= static_cast<double>(train_set.size());

        const double val_loss = evaluate_loss(model, val_set);
        const double val_acc = evaluate_accuracy(model, val_set);
        model.history.push_back({epoch, epoch_loss, val_loss, val_acc});

        if (val_loss < best_val) {
            best_val = val_loss;
            best = take_snapshot(model);
            epochs_since_improvement = 0;
        } else {
            ++epochs_since_improvement;
            if (epochs_since_improvement > cfg.early_stop_patience) break;
        }
    }
    restore_snapshot(model, best);
}

void write_history_csv(const std::filesystem::path& path,
                       const std::vector<TrainHistoryRow>& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write history csv: " + path.string());
    out << "epoch,train_loss,val_loss,val_acc\n";
    char buf[128];
    for (const auto& row : history) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", row.epoch, row.train_loss,
                      row.val_loss, row.val_acc);
        out << buf;
    }
}

}  // namespace sickbench::models
