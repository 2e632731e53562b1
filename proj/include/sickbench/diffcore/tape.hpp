#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <unordered_map>
#include <vector>

#include "sickbench/diffcore/array.hpp"

namespace sickbench::diffcore {

enum class Mode { Train, Infer };
enum class ConvPadding { None, Causal };
enum class Reduction { Mean, Sum };

// Mutable normalization state owned by the model, updated by batch_norm in
// train mode and read in infer mode. One entry per channel.
struct RunningStats {
    Array mean;
    Array var;
};

// Reverse-mode tape over the fixed op set used by the two classifier
// families and the gradient-based attacks. Ops append nodes in execution
// order, which is already a topological order, so the backward pass is a
// single reverse sweep. One tape per computation; tapes are not shared
// across threads.
class Tape {
public:
    using NodeId = std::uint32_t;

    explicit Tape(std::uint64_t dropout_seed = 0) : rng_(dropout_seed) {}

    // Leaf holding an input or a weight.
    NodeId input(Array value);

    const Array& value(NodeId id) const { return nodes_[id].value; }
    std::size_t size() const { return nodes_.size(); }

    // y[..., o] = sum_i x[..., i] * w[i, o] (+ b[o]); all leading axes are batch.
    NodeId dense(NodeId x, NodeId w, std::optional<NodeId> b = std::nullopt);

    // x: [B, T, Cin], kernel: [k, Cin, Cout], bias: [Cout].
    // Causal padding left-pads with zeros so the output keeps length T and
    // y[t] depends only on x[<= t]; None padding shrinks T by (k-1)*dilation.
    NodeId conv1d_dilated(NodeId x, NodeId kernel, std::optional<NodeId> bias,
                          std::size_t dilation, ConvPadding padding);

    NodeId relu(NodeId x);

    // Softmax over the last axis, computed with the max subtracted per row.
    NodeId softmax(NodeId x);

    // Normalizes per last-axis channel over all leading axes. Train mode uses
    // batch statistics (population variance) and folds them into `stats` with
    // the given momentum; infer mode reads `stats` and is a pure function.
    NodeId batch_norm(NodeId x, NodeId gamma, NodeId beta, RunningStats* stats,
                      Mode mode, double momentum = 0.1);

    // Normalizes each position over the last axis.
    NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta);

    // q, k, v: [B, T, D] with D divisible by heads. Full (unmasked)
    // scaled dot-product attention per head, heads concatenated.
    NodeId scaled_dot_attention(NodeId q, NodeId k, NodeId v, std::size_t heads);

    NodeId residual_add(NodeId a, NodeId b);

    // [B, T, C] -> [B, C], mean over time.
    NodeId global_avg_pool(NodeId x);

    // Inverted dropout: train mode scales kept values by 1/(1-rate) using the
    // tape's seeded generator and records the mask for backward; infer mode
    // is the identity.
    NodeId dropout(NodeId x, double rate, Mode mode);

    // x: [R, C] probabilities, one_hot: [R, C]. Probabilities are clamped at
    // 1e-12 before the log. Prefer softmax_cross_entropy when logits are
    // available.
    NodeId cross_entropy(NodeId probs, const Array& one_hot,
                         Reduction reduction = Reduction::Mean);

    // Fused log-sum-exp cross-entropy on logits; the stable path used for
    // training and attack losses.
    NodeId softmax_cross_entropy(NodeId logits, const Array& one_hot,
                                 Reduction reduction = Reduction::Mean);

    // Adds x + pe where pe is the sinusoidal positional encoding for the
    // input's [T, D] trailing axes.
    NodeId sinusoidal_pe(NodeId x);

    NodeId sum(NodeId x);

    // Scalar dot product with a constant weighting; building block for
    // custom scalar objectives (e.g. logit margins).
    NodeId inner(NodeId x, Array weights);

    // Gradients of a scalar node with respect to the given leaves. Leaves
    // the loss does not reach get zero gradients of the leaf's shape.
    std::unordered_map<NodeId, Array> grad(NodeId loss, const std::vector<NodeId>& wrt);

private:
    struct Node {
        Array value;
        std::function<void(Tape&, NodeId)> backward;  // null for leaves
    };

    NodeId push(Array value, std::function<void(Tape&, NodeId)> backward);
    Array& grad_buffer(NodeId id);
    bool has_grad(NodeId id) const { return !grads_[id].shape.empty(); }
    const Array& grad_of(NodeId id) const { return grads_[id]; }
    void check_node(NodeId id, const char* op) const;

    std::vector<Node> nodes_;
    std::vector<Array> grads_;
    std::mt19937_64 rng_;
};

}  // namespace sickbench::diffcore
