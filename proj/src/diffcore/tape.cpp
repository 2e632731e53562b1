#include "sickbench/diffcore/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace sickbench::diffcore {

namespace {

[[noreturn]] void op_fail(const char* op, const std::string& detail) {
    throw std::invalid_argument(std::string(op) + ": " + detail);
}

void require(bool ok, const char* op, const std::string& detail) {
    if (!ok) op_fail(op, detail);
}

// C[m,n] += A[m,k] * B[k,n]
void mm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] += A[m,k] * B[n,k]^T
void mm_abT_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// C[k,n] += A[m,k]^T * B[m,n]
void mm_aTb_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void softmax_row(const double* in, double* out, std::size_t n) {
    double mx = in[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, in[i]);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(in[i] - mx);
        total += out[i];
    }
    const double inv = 1.0 / total;
    for (std::size_t i = 0; i < n; ++i) out[i] *= inv;
}

// dx_j = y_j * (dy_j - sum_i dy_i y_i), accumulated.
void softmax_backward_row(const double* y, const double* dy, double* dx, std::size_t n) {
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += dy[i] * y[i];
    for (std::size_t i = 0; i < n; ++i) dx[i] += y[i] * (dy[i] - dot);
}

constexpr double kNormEps = 1e-5;

}  // namespace

Tape::NodeId Tape::push(Array value, std::function<void(Tape&, NodeId)> backward) {
    nodes_.push_back(Node{std::move(value), std::move(backward)});
    return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::check_node(NodeId id, const char* op) const {
    if (id >= nodes_.size()) op_fail(op, "node id " + std::to_string(id) + " not in record");
}

Array& Tape::grad_buffer(NodeId id) {
    if (grads_[id].shape.empty()) grads_[id] = Array(nodes_[id].value.shape);
    return grads_[id];
}

Tape::NodeId Tape::input(Array value) {
    return push(std::move(value), nullptr);
}

Tape::NodeId Tape::dense(NodeId x, NodeId w, std::optional<NodeId> b) {
    check_node(x, "dense");
    check_node(w, "dense");
    const Array& xv = nodes_[x].value;
    const Array& wv = nodes_[w].value;
    require(wv.rank() == 2, "dense", "weight must be rank 2, got " + shape_str(wv.shape));
    require(xv.rank() >= 1, "dense", "input must have at least one axis");
    const std::size_t fin = xv.shape.back();
    require(fin == wv.shape[0], "dense",
            "input feature axis " + std::to_string(fin) + " does not match weight rows " +
                shape_str(wv.shape));
    const std::size_t fout = wv.shape[1];
    const std::size_t rows = xv.numel() / fin;
    if (b) {
        check_node(*b, "dense");
        const Array& bv = nodes_[*b].value;
        require(bv.numel() == fout, "dense",
                "bias " + shape_str(bv.shape) + " does not match output features " +
                    std::to_string(fout));
    }

    std::vector<std::size_t> out_shape = xv.shape;
    out_shape.back() = fout;
    Array out(std::move(out_shape));
    if (b) {
        const Array& bv = nodes_[*b].value;
        for (std::size_t r = 0; r < rows; ++r)
            std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + r * fout);
    }
    mm_acc(xv.data.data(), wv.data.data(), out.data.data(), rows, fin, fout);

    return push(std::move(out), [x, w, b, rows, fin, fout](Tape& t, NodeId self) {
        const Array& dy = t.grad_of(self);
        const Array& xv = t.nodes_[x].value;
        const Array& wv = t.nodes_[w].value;
        mm_abT_acc(dy.data.data(), wv.data.data(), t.grad_buffer(x).data.data(), rows, fout, fin);
        mm_aTb_acc(xv.data.data(), dy.data.data(), t.grad_buffer(w).data.data(), rows, fin, fout);
        if (b) {
            Array& db = t.grad_buffer(*b);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* row = dy.data.data() + r * fout;
                for (std::size_t j = 0; j < fout; ++j) db.data[j] += row[j];
            }
        }
    });
}

Tape::NodeId Tape::conv1d_dilated(NodeId x, NodeId kernel, std::optional<NodeId> bias,
                                  std::size_t dilation, ConvPadding padding) {
    check_node(x, "conv1d_dilated");
    check_node(kernel, "conv1d_dilated");
    const Array& xv = nodes_[x].value;
    const Array& kv = nodes_[kernel].value;
    require(dilation >= 1, "conv1d_dilated", "dilation must be >= 1");
    require(xv.rank() == 3, "conv1d_dilated",
            "input must be [batch, time, channels], got " + shape_str(xv.shape));
    require(kv.rank() == 3, "conv1d_dilated",
            "kernel must be [taps, in_channels, out_channels], got " + shape_str(kv.shape));
    const std::size_t batch = xv.shape[0], tin = xv.shape[1], cin = xv.shape[2];
    const std::size_t taps = kv.shape[0], cout = kv.shape[2];
    require(kv.shape[1] == cin, "conv1d_dilated",
            "kernel in_channels " + std::to_string(kv.shape[1]) + " does not match input channels " +
                std::to_string(cin));
    if (bias) {
        check_node(*bias, "conv1d_dilated");
        require(nodes_[*bias].value.numel() == cout, "conv1d_dilated",
                "bias length does not match out_channels " + std::to_string(cout));
    }

    const std::size_t span = (taps - 1) * dilation;
    std::size_t tout;
    if (padding == ConvPadding::Causal) {
        tout = tin;
    } else {
        require(tin > span, "conv1d_dilated",
                "input time axis " + std::to_string(tin) + " too short for kernel span " +
                    std::to_string(span + 1));
        tout = tin - span;
    }

    Array out({batch, tout, cout});
    if (bias) {
        const Array& bv = nodes_[*bias].value;
        for (std::size_t r = 0; r < batch * tout; ++r)
            std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + r * cout);
    }
    // Causal: y[t] = sum_kt K[kt] . x[t - (taps-1-kt)*dilation], missing past = 0.
    // None:   y[t] = sum_kt K[kt] . x[t + kt*dilation].
    const bool causal = padding == ConvPadding::Causal;
    for (std::size_t bi = 0; bi < batch; ++bi) {
        const double* xb = xv.data.data() + bi * tin * cin;
        double* yb = out.data.data() + bi * tout * cout;
        for (std::size_t t = 0; t < tout; ++t) {
            double* yrow = yb + t * cout;
            for (std::size_t kt = 0; kt < taps; ++kt) {
                std::ptrdiff_t src = causal
                                         ? static_cast<std::ptrdiff_t>(t) -
                                               static_cast<std::ptrdiff_t>((taps - 1 - kt) * dilation)
                                         : static_cast<std::ptrdiff_t>(t + kt * dilation);
                if (src < 0) continue;
                const double* xrow = xb + static_cast<std::size_t>(src) * cin;
                const double* krow = kv.data.data() + kt * cin * cout;
                for (std::size_t i = 0; i < cin; ++i) {
                    const double xvv = xrow[i];
                    if (xvv == 0.0) continue;
                    const double* kr = krow + i * cout;
                    for (std::size_t o = 0; o < cout; ++o) yrow[o] += xvv * kr[o];
                }
            }
        }
    }

    return push(std::move(out),
                [x, kernel, bias, dilation, causal, batch, tin, cin, taps, cout, tout](Tape& t, NodeId self) {
                    const Array& dy = t.grad_of(self);
                    const Array& xv = t.nodes_[x].value;
                    const Array& kv = t.nodes_[kernel].value;
                    Array& dx = t.grad_buffer(x);
                    Array& dk = t.grad_buffer(kernel);
                    for (std::size_t bi = 0; bi < batch; ++bi) {
                        const double* xb = xv.data.data() + bi * tin * cin;
                        double* dxb = dx.data.data() + bi * tin * cin;
                        const double* dyb = dy.data.data() + bi * tout * cout;
                        for (std::size_t tt = 0; tt < tout; ++tt) {
                            const double* dyrow = dyb + tt * cout;
                            for (std::size_t kt = 0; kt < taps; ++kt) {
                                std::ptrdiff_t src =
                                    causal ? static_cast<std::ptrdiff_t>(tt) -
                                                 static_cast<std::ptrdiff_t>((taps - 1 - kt) * dilation)
                                           : static_cast<std::ptrdiff_t>(tt + kt * dilation);
                                if (src < 0) continue;
                                const double* xrow = xb + static_cast<std::size_t>(src) * cin;
                                double* dxrow = dxb + static_cast<std::size_t>(src) * cin;
                                const double* krow = kv.data.data() + kt * cin * cout;
                                double* dkrow = dk.data.data() + kt * cin * cout;
                                for (std::size_t i = 0; i < cin; ++i) {
                                    const double* kr = krow + i * cout;
                                    double* dkr = dkrow + i * cout;
                                    double acc = 0.0;
                                    const double xvv = xrow[i];
                                    for (std::size_t o = 0; o < cout; ++o) {
                                        acc += dyrow[o] * kr[o];
                                        dkr[o] += xvv * dyrow[o];
                                    }
                                    dxrow[i] += acc;
                                }
                            }
                        }
                    }
                    if (bias) {
                        Array& db = t.grad_buffer(*bias);
                        for (std::size_t r = 0; r < batch * tout; ++r) {
                            const double* row = dy.data.data() + r * cout;
                            for (std::size_t o = 0; o < cout; ++o) db.data[o] += row[o];
                        }
                    }
                });
}

Tape::NodeId Tape::relu(NodeId x) {
    check_node(x, "relu");
    const Array& xv = nodes_[x].value;
    Array out(xv.shape);
    for (std::size_t i = 0; i < xv.numel(); ++i) out.data[i] = xv.data[i] > 0.0 ? xv.data[i] : 0.0;
    return push(std::move(out), [x](Tape& t, NodeId self) {
        const Array& dy = t.grad_of(self);
        const Array& xv = t.nodes_[x].value;
        Array& dx = t.grad_buffer(x);
        for (std::size_t i = 0; i < xv.numel(); ++i)
            if (xv.data[i] > 0.0) dx.data[i] += dy.data[i];
    });
}

Tape::NodeId Tape::softmax(NodeId x) {
    check_node(x, "softmax");
    const Array& xv = nodes_[x].value;
    require(xv.rank() >= 1 && xv.shape.back() >= 1, "softmax",
            "input needs a non-empty last axis, got " + shape_str(xv.shape));
    const std::size_t cols = xv.shape.back();
    const std::size_t rows = xv.numel() / cols;
    Array out(xv.shape);
    for (std::size_t r = 0; r < rows; ++r)
        softmax_row(xv.data.data() + r * cols, out.data.data() + r * cols, cols);
    return push(std::move(out), [x, rows, cols](Tape& t, NodeId self) {
        const Array& dy = t.grad_of(self);
        const Array& y = t.nodes_[self].value;
        Array& dx = t.grad_buffer(x);
        for (std::size_t r = 0; r < rows; ++r)
            softmax_backward_row(y.data.data() + r * cols, dy.data.data() + r * cols,
                                 dx.data.data() + r * cols, cols);
    });
}

Tape::NodeId Tape::batch_norm(NodeId x, NodeId gamma, NodeId beta, RunningStats* stats,
                              Mode mode, double momentum) {
    check_node(x, "batch_norm");
    check_node(gamma, "batch_norm");
    check_node(beta, "batch_norm");
    const Array& xv = nodes_[x].value;
    require(xv.rank() >= 2, "batch_norm", "input must have a channel axis, got " + shape_str(xv.shape));
    const std::size_t ch = xv.shape.back();
    const std::size_t rows = xv.numel() / ch;
    require(nodes_[gamma].value.numel() == ch && nodes_[beta].value.numel() == ch, "batch_norm",
            "gamma/beta must have " + std::to_string(ch) + " channels");
    require(stats != nullptr, "batch_norm", "running stats required");
    require(stats->mean.numel() == ch && stats->var.numel() == ch, "batch_norm",
            "running stats must have " + std::to_string(ch) + " channels");

    const Array& gv = nodes_[gamma].value;
    const Array& bv = nodes_[beta].value;

    Array mean({ch});
    Array inv_std({ch});
    if (mode == Mode::Train) {
        require(rows >= 1, "batch_norm", "empty batch");
        Array var({ch});
        for (std::size_t r = 0; r < rows; ++r) {
            const double* row = xv.data.data() + r * ch;
            for (std::size_t c = 0; c < ch; ++c) mean.data[c] += row[c];
        }
        for (std::size_t c = 0; c < ch; ++c) mean.data[c] /= static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* row = xv.data.data() + r * ch;
            for (std::size_t c = 0; c < ch; ++c) {
                const double d = row[c] - mean.data[c];
                var.data[c] += d * d;
            }
        }
        for (std::size_t c = 0; c < ch; ++c) var.data[c] /= static_cast<double>(rows);
        for (std::size_t c = 0; c < ch; ++c) {
            stats->mean.data[c] = (1.0 - momentum) * stats->mean.data[c] + momentum * mean.data[c];
            stats->var.data[c] = (1.0 - momentum) * stats->var.data[c] + momentum * var.data[c];
            inv_std.data[c] = 1.0 / std::sqrt(var.data[c] + kNormEps);
        }
    } else {
        for (std::size_t c = 0; c < ch; ++c) {
            mean.data[c] = stats->mean.data[c];
            inv_std.data[c] = 1.0 / std::sqrt(stats->var.data[c] + kNormEps);
        }
    }

    auto xhat = std::make_shared<Array>(xv.shape);
    Array out(xv.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = xv.data.data() + r * ch;
        double* hrow = xhat->data.data() + r * ch;
        double* orow = out.data.data() + r * ch;
        for (std::size_t c = 0; c < ch; ++c) {
            hrow[c] = (row[c] - mean.data[c]) * inv_std.data[c];
            orow[c] = gv.data[c] * hrow[c] + bv.data[c];
        }
    }

    auto inv = std::make_shared<Array>(std::move(inv_std));
    const bool train = mode == Mode::Train;
    return push(std::move(out), [x, gamma, beta, xhat, inv, rows, ch, train](Tape& t, NodeId self) {
        const Array& dy = t.grad_of(self);
        const Array& gv = t.nodes_[gamma].value;
        Array& dg = t.grad_buffer(gamma);
        Array& db = t.grad_buffer(beta);
        Array& dx = t.grad_buffer(x);
        // Per-channel reductions shared by both modes.
        std::vector<double> sum_dy(ch, 0.0), sum_dy_xhat(ch, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* dyr = dy.data.data() + r * ch;
            const double* hr = xhat->data.data() + r * ch;
            for (std::size_t c = 0; c < ch; ++c) {
                sum_dy[c] += dyr[c];
                sum_dy_xhat[c] += dyr[c] * hr[c];
            }
        }
        for (std::size_t c = 0; c < ch; ++c) {
            dg.data[c] += sum_dy_xhat[c];
            db.data[c] += sum_dy[c];
        }
        if (train) {
            // dx = gamma*inv/N * (N*dy - sum(dy) - xhat * sum(dy*xhat))
            const double n = static_cast<double>(rows);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* dyr = dy.data.data() + r * ch;
                const double* hr = xhat->data.data() + r * ch;
                double* dxr = dx.data.data() + r * ch;
                for (std::size_t c = 0; c < ch; ++c) {
                    dxr[c] += gv.data[c] * inv->data[c] / n *
                              (n * dyr[c] - sum_dy[c] - hr[c] * sum_dy_xhat[c]);
                }
            }
        } else {
            for (std::size_t r = 0; r < rows; ++r) {
                const double* dyr = dy.data.data() + r * ch;
                double* dxr = dx.data.data() + r * ch;
                for (std::size_t c = 0; c < ch; ++c) dxr[c] += dyr[c] * gv.data[c] * inv->data[c];
            }
        }
    });
}

Tape::NodeId Tape::layer_norm(NodeId x, NodeId gamma, NodeId beta) {
    check_node(x, "layer_norm");
    check_node(gamma, "layer_norm");
    check_node(beta, "layer_norm");
    const Array& xv = nodes_[x].value;
    require(xv.rank() >= 1, "layer_norm", "input must have a feature axis");
    const std::size_t ch = xv.shape.back();
    const std::size_t rows = xv.numel() / ch;
    require(nodes_[gamma].value.numel() == ch && nodes_[beta].value.numel() == ch, "layer_norm",
            "gamma/beta must have " + std::to_string(ch) + " channels");

    const Array& gv = nodes_[gamma].value;
    const Array& bv = nodes_[beta].value;
    auto xhat = std::make_shared<Array>(xv.shape);
    auto inv = std::make_shared<Array>(std::vector<std::size_t>{rows});
    Array out(xv.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = xv.data.data() + r * ch;
        double mean = 0.0;
        for (std::size_t c = 0; c < ch; ++c) mean += row[c];
        mean /= static_cast<double>(ch);
        double var = 0.0;
        for (std::size_t c = 0; c < ch; ++c) {
            const double d = row[c] - mean;
            var += d * d;
        }
        var /= static_cast<double>(ch);
        const double istd = 1.0 / std::sqrt(var + kNormEps);
        inv->data[r] = istd;
        double* hrow = xhat->data.data() + r * ch;
        double* orow = out.data.data() + r * ch;
        for (std::size_t c = 0; c < ch; ++c) {
            hrow[c] = (row[c] - mean) * istd;
            orow[c] = gv.data[c] * hrow[c] + bv.data[c];
        }
    }

    return push(std::move(out), [x, gamma, beta, xhat, inv, rows, ch](Tape& t, NodeId self) {
        const Array& dy = t.grad_of(self);
        const Array& gv = t.nodes_[gamma].value;
        Array& dg = t.grad_buffer(gamma);
        Array& db = t.grad_buffer(beta);
        Array& dx = t.grad_buffer(x);
        const double n = static_cast<double>(ch);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* dyr = dy.data.data() + r * ch;
            const double* hr = xhat->data.data() + r * ch;
            double* dxr = dx.data.data() + r * ch;
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (std::size_t c = 0; c < ch; ++c) {
                const double dxhat = dyr[c] * gv.data[c];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * hr[c];
                dg.data[c] += dyr[c] * hr[c];
                db.data[c] += dyr[c];
            }
            const double istd = inv->data[r];
            for (std::size_t c = 0; c < ch; ++c) {
                const double dxhat = dyr[c] * gv.data[c];
                dxr[c] += istd / n * (n * dxhat - sum_dxhat - hr[c] * sum_dxhat_xhat);
            }
        }
    });
}

Tape::NodeId Tape::scaled_dot_attention(NodeId q, NodeId k, NodeId v, std::size_t heads) {
    check_node(q, "scaled_dot_attention");
    check_node(k, "scaled_dot_attention");
    check_node(v, "scaled_dot_attention");
    const Array& qv = nodes_[q].value;
    const Array& kv = nodes_[k].value;
    const Array& vv = nodes_[v].value;
    require(qv.rank() == 3, "scaled_dot_attention",
            "q must be [batch, time, dim], got " + shape_str(qv.shape));
    require(qv.same_shape(kv) && qv.same_shape(vv), "scaled_dot_attention",
            "q " + shape_str(qv.shape) + ", k " + shape_str(kv.shape) + ", v " +
                shape_str(vv.shape) + " must match");
    const std::size_t batch = qv.shape[0], tlen = qv.shape[1], dim = qv.shape[2];
    require(heads >= 1 && dim % heads == 0, "scaled_dot_attention",
            "dim " + std::to_string(dim) + " not divisible by heads " + std::to_string(heads));
    const std::size_t dh = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    auto attn = std::make_shared<Array>(std::vector<std::size_t>{batch, heads, tlen, tlen});
    Array out({batch, tlen, dim});

    std::vector<double> qh(tlen * dh), kh(tlen * dh), vh(tlen * dh), oh(tlen * dh);
    std::vector<double> scores(tlen * tlen);
    for (std::size_t bi = 0; bi < batch; ++bi) {
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * dh;
            const double* qb = qv.data.data() + bi * tlen * dim;
            const double* kb = kv.data.data() + bi * tlen * dim;
            const double* vb = vv.data.data() + bi * tlen * dim;
            for (std::size_t t = 0; t < tlen; ++t) {
                std::copy(qb + t * dim + off, qb + t * dim + off + dh, qh.begin() + t * dh);
                std::copy(kb + t * dim + off, kb + t * dim + off + dh, kh.begin() + t * dh);
                std::copy(vb + t * dim + off, vb + t * dim + off + dh, vh.begin() + t * dh);
            }
            std::fill(scores.begin(), scores.end(), 0.0);
            mm_abT_acc(qh.data(), kh.data(), scores.data(), tlen, dh, tlen);
            double* arow = attn->data.data() + (bi * heads + h) * tlen * tlen;
            for (std::size_t t = 0; t < tlen * tlen; ++t) scores[t] *= scale;
            for (std::size_t t = 0; t < tlen; ++t)
                softmax_row(scores.data() + t * tlen, arow + t * tlen, tlen);
            std::fill(oh.begin(), oh.end(), 0.0);
            mm_acc(arow, vh.data(), oh.data(), tlen, tlen, dh);
            double* ob = out.data.data() + bi * tlen * dim;
            for (std::size_t t = 0; t < tlen; ++t)
                std::copy(oh.begin() + t * dh, oh.begin() + (t + 1) * dh, ob + t * dim + off);
        }
    }

    return push(std::move(out), [q, k, v, attn, batch, heads, tlen, dim, dh, scale](Tape& t, NodeId self) {
        const Array& dy = t.grad_of(self);
        const Array& qv = t.nodes_[q].value;
        const Array& kv = t.nodes_[k].value;
        const Array& vv = t.nodes_[v].value;
        Array& dq = t.grad_buffer(q);
        Array& dk = t.grad_buffer(k);
        Array& dv = t.grad_buffer(v);
        std::vector<double> qh(tlen * dh), kh(tlen * dh), vh(tlen * dh), dyh(tlen * dh);
        std::vector<double> da(tlen * tlen), ds(tlen * tlen);
        std::vector<double> dqh(tlen * dh), dkh(tlen * dh), dvh(tlen * dh);
        for (std::size_t bi = 0; bi < batch; ++bi) {
            for (std::size_t h = 0; h < heads; ++h) {
                const std::size_t off = h * dh;
                const double* qb = qv.data.data() + bi * tlen * dim;
                const double* kb = kv.data.data() + bi * tlen * dim;
                const double* vb = vv.data.data() + bi * tlen * dim;
                const double* dyb = dy.data.data() + bi * tlen * dim;
                for (std::size_t tt = 0; tt < tlen; ++tt) {
                    std::copy(qb + tt * dim + off, qb + tt * dim + off + dh, qh.begin() + tt * dh);
                    std::copy(kb + tt * dim + off, kb + tt * dim + off + dh, kh.begin() + tt * dh);
                    std::copy(vb + tt * dim + off, vb + tt * dim + off + dh, vh.begin() + tt * dh);
                    std::copy(dyb + tt * dim + off, dyb + tt * dim + off + dh, dyh.begin() + tt * dh);
                }
                const double* arow = attn->data.data() + (bi * heads + h) * tlen * tlen;
                // dV_h = A^T dO ; dA = dO V_h^T ; dS = softmax'(A, dA) * scale
                std::fill(dvh.begin(), dvh.end(), 0.0);
                mm_aTb_acc(arow, dyh.data(), dvh.data(), tlen, tlen, dh);
                std::fill(da.begin(), da.end(), 0.0);
                mm_abT_acc(dyh.data(), vh.data(), da.data(), tlen, dh, tlen);
                std::fill(ds.begin(), ds.end(), 0.0);
                for (std::size_t tt = 0; tt < tlen; ++tt)
                    softmax_backward_row(arow + tt * tlen, da.data() + tt * tlen,
                                         ds.data() + tt * tlen, tlen);
                for (std::size_t tt = 0; tt < tlen * tlen; ++tt) ds[tt] *= scale;
                std::fill(dqh.begin(), dqh.end(), 0.0);
                mm_acc(ds.data(), kh.data(), dqh.data(), tlen, tlen, dh);
                std::fill(dkh.begin(), dkh.end(), 0.0);
                mm_aTb_acc(ds.data(), qh.data(), dkh.data(), tlen, tlen, dh);
                double* dqb = dq.data.data() + bi * tlen * dim;
                double* dkb = dk.data.data() + bi * tlen * dim;
                double* dvb = dv.data.data() + bi * tlen * dim;
                for (std::size_t tt = 0; tt < tlen; ++tt) {
                    for (std::size_t c = 0; c < dh; ++c) {
                        dqb[tt * dim + off + c] += dqh[tt * dh + c];
                        dkb[tt * dim + off + c] += dkh[tt * dh + c];
                        dvb[tt * dim + off + c] += dvh[tt * dh + c];
                    }
                }
            }
        }
    });
}

Tape::NodeId Tape::residual_add(NodeId a, NodeId b) {
    check_node(a, "residual_add");
    check_node(b, "residual_add");
    const Array& av = nodes_[a].value;
    const Array& bv = nodes_[b].value;
    require(av.same_shape(bv), "residual_add",
            "shapes " + shape_str(av.shape) + " and " + shape_str(bv.shape) + " differ");
    Array out(av.shape);
    for (std::size_t i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] + bv.data[i];
    return push(std::move(out), [a, b](Tape& t, NodeId self) {
        const Array& dy = t.grad_of(self);
        Array& da = t.grad_buffer(a);
        Array& db = t.grad_buffer(b);
        for (std::size_t i = 0; i < dy.numel(); ++i) {
            da.data[i] += dy.data[i];
            db.data[i] += dy.data[i];
        }
    });
}

Tape::NodeId Tape::global_avg_pool(NodeId x) {
    check_node(x, "global_avg_pool");
    const Array& xv = nodes_[x].value;
    require(xv.rank() == 3, "global_avg_pool",
            "input must be [batch, time, channels], got " + shape_str(xv.shape));
    const std::size_t batch = xv.shape[0], tlen = xv.shape[1], ch = xv.shape[2];
    require(tlen >= 1, "global_avg_pool", "empty time axis");
    Array out({batch, ch});
    for (std::size_t bi = 0; bi < batch; ++bi) {
        double* orow = out.data.data() + bi * ch;
        for (std::size_t t = 0; t < tlen; ++t) {
            const double* row = xv.data.data() + (bi * tlen + t) * ch;
            for (std::size_t c = 0; c < ch; ++c) orow[c] += row[c];
        }
        for (std::size_t c = 0; c < ch; ++c) orow[c] /= static_cast<double>(tlen);
    }
    return push(std::move(out), [x, batch, tlen, ch](Tape& t, NodeId self) {
        const Array& dy = t.grad_of(self);
        Array& dx = t.grad_buffer(x);
        const double inv = 1.0 / static_cast<double>(tlen);
        for (std::size_t bi = 0; bi < batch; ++bi) {
            const double* dyr = dy.data.data() + bi * ch;
            for (std::size_t tt = 0; tt < tlen; ++tt) {
                double* dxr = dx.data.data() + (bi * tlen + tt) * ch;
                for (std::size_t c = 0; c < ch; ++c) dxr[c] += dyr[c] * inv;
            }
        }
    });
}

Tape::NodeId Tape::dropout(NodeId x, double rate, Mode mode) {
    check_node(x, "dropout");
    require(rate >= 0.0 && rate < 1.0, "dropout",
            "rate must be in [0,1), got " + std::to_string(rate));
    const Array& xv = nodes_[x].value;
    if (mode == Mode::Infer || rate == 0.0) {
        Array out = xv;
        return push(std::move(out), [x](Tape& t, NodeId self) {
            const Array& dy = t.grad_of(self);
            Array& dx = t.grad_buffer(x);
            for (std::size_t i = 0; i < dy.numel(); ++i) dx.data[i] += dy.data[i];
        });
    }
    auto mask = std::make_shared<Array>(xv.shape);
    const double keep_scale = 1.0 / (1.0 - rate);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Array out(xv.shape);
    for (std::size_t i = 0; i < xv.numel(); ++i) {
        const double m = unit(rng_) >= rate ? keep_scale : 0.0;
        mask->data[i] = m;
        out.data[i] = xv.data[i] * m;
    }
    return push(std::move(out), [x, mask](Tape& t, NodeId self) {
        const Array& dy = t.grad_of(self);
        Array& dx = t.grad_buffer(x);
        for (std::size_t i = 0; i < dy.numel(); ++i) dx.data[i] += dy.data[i] * mask->data[i];
    });
}

Tape::NodeId Tape::cross_entropy(NodeId probs, const Array& one_hot, Reduction reduction) {
    check_node(probs, "cross_entropy");
    const Array& pv = nodes_[probs].value;
    require(pv.same_shape(one_hot), "cross_entropy",
            "probs " + shape_str(pv.shape) + " and targets " + shape_str(one_hot.shape) + " differ");
    require(pv.rank() >= 1, "cross_entropy", "input must have a class axis");
    const std::size_t cols = pv.shape.back();
    const std::size_t rows = pv.numel() / cols;
    static constexpr double kFloor = 1e-12;
    double total = 0.0;
    for (std::size_t i = 0; i < pv.numel(); ++i) {
        if (one_hot.data[i] != 0.0)
            total -= one_hot.data[i] * std::log(std::max(pv.data[i], kFloor));
    }
    const double scale = reduction == Reduction::Mean ? 1.0 / static_cast<double>(rows) : 1.0;
    auto target = std::make_shared<Array>(one_hot);
    return push(Array::scalar(total * scale), [probs, target, scale](Tape& t, NodeId self) {
        const double dl = t.grad_of(self).data[0];
        const Array& pv = t.nodes_[probs].value;
        Array& dp = t.grad_buffer(probs);
        for (std::size_t i = 0; i < pv.numel(); ++i) {
            if (target->data[i] != 0.0)
                dp.data[i] -= dl * scale * target->data[i] / std::max(pv.data[i], kFloor);
        }
    });
}

Tape::NodeId Tape::softmax_cross_entropy(NodeId logits, const Array& one_hot, Reduction reduction) {
    check_node(logits, "softmax_cross_entropy");
    const Array& zv = nodes_[logits].value;
    require(zv.same_shape(one_hot), "softmax_cross_entropy",
            "logits " + shape_str(zv.shape) + " and targets " + shape_str(one_hot.shape) + " differ");
    const std::size_t cols = zv.shape.back();
    const std::size_t rows = zv.numel() / cols;
    auto soft = std::make_shared<Array>(zv.shape);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = zv.data.data() + r * cols;
        const double* yrow = one_hot.data.data() + r * cols;
        double mx = row[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) sum += std::exp(row[c] - mx);
        const double lse = mx + std::log(sum);
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            soft->data[r * cols + c] = std::exp(row[c] - lse);
            dot += yrow[c] * row[c];
        }
        total += lse - dot;
    }
    const double scale = reduction == Reduction::Mean ? 1.0 / static_cast<double>(rows) : 1.0;
    auto target = std::make_shared<Array>(one_hot);
    return push(Array::scalar(total * scale), [logits, soft, target, scale](Tape& t, NodeId self) {
        const double dl = t.grad_of(self).data[0];
        Array& dz = t.grad_buffer(logits);
        for (std::size_t i = 0; i < dz.numel(); ++i)
            dz.data[i] += dl * scale * (soft->data[i] - target->data[i]);
    });
}

Tape::NodeId Tape::sinusoidal_pe(NodeId x) {
    check_node(x, "sinusoidal_pe");
    const Array& xv = nodes_[x].value;
    require(xv.rank() == 3, "sinusoidal_pe",
            "input must be [batch, time, dim], got " + shape_str(xv.shape));
    const std::size_t batch = xv.shape[0], tlen = xv.shape[1], dim = xv.shape[2];
    Array out(xv.shape);
    std::vector<double> pe(tlen * dim);
    for (std::size_t t = 0; t < tlen; ++t) {
        for (std::size_t d = 0; d < dim; ++d) {
            const double expo = static_cast<double>(2 * (d / 2)) / static_cast<double>(dim);
            const double angle = static_cast<double>(t) / std::pow(10000.0, expo);
            pe[t * dim + d] = (d % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    for (std::size_t bi = 0; bi < batch; ++bi)
        for (std::size_t i = 0; i < tlen * dim; ++i)
            out.data[bi * tlen * dim + i] = xv.data[bi * tlen * dim + i] + pe[i];
    return push(std::move(out), [x](Tape& t, NodeId self) {
        const Array& dy = t.grad_of(self);
        Array& dx = t.grad_buffer(x);
        for (std::size_t i = 0; i < dy.numel(); ++i) dx.data[i] += dy.data[i];
    });
}

Tape::NodeId Tape::sum(NodeId x) {
    check_node(x, "sum");
    const Array& xv = nodes_[x].value;
    double total = 0.0;
    for (double v : xv.data) total += v;
    return push(Array::scalar(total), [x](Tape& t, NodeId self) {
        const double dl = t.grad_of(self).data[0];
        Array& dx = t.grad_buffer(x);
        for (std::size_t i = 0; i < dx.numel(); ++i) dx.data[i] += dl;
    });
}

Tape::NodeId Tape::inner(NodeId x, Array weights) {
    check_node(x, "inner");
    const Array& xv = nodes_[x].value;
    require(xv.numel() == weights.numel(), "inner",
            "input " + shape_str(xv.shape) + " and weights " + shape_str(weights.shape) +
                " differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < xv.numel(); ++i) total += xv.data[i] * weights.data[i];
    auto w = std::make_shared<Array>(std::move(weights));
    return push(Array::scalar(total), [x, w](Tape& t, NodeId self) {
        const double dl = t.grad_of(self).data[0];
        Array& dx = t.grad_buffer(x);
        for (std::size_t i = 0; i < dx.numel(); ++i) dx.data[i] += dl * w->data[i];
    });
}

std::unordered_map<Tape::NodeId, Array> Tape::grad(NodeId loss, const std::vector<NodeId>& wrt) {
    check_node(loss, "grad");
    for (NodeId id : wrt) check_node(id, "grad");
    if (nodes_[loss].value.numel() != 1)
        op_fail("grad", "loss node must be scalar, got " + shape_str(nodes_[loss].value.shape));

    grads_.assign(nodes_.size(), Array{});
    grad_buffer(loss).data[0] = 1.0;
    for (NodeId id = loss;; --id) {
        if (has_grad(id) && nodes_[id].backward) nodes_[id].backward(*this, id);
        if (id == 0) break;
    }

    std::unordered_map<NodeId, Array> result;
    for (NodeId id : wrt) {
        if (has_grad(id))
            result[id] = grads_[id];
        else
            result[id] = Array(nodes_[id].value.shape);
    }
    grads_.clear();
    return result;
}

}  // namespace sickbench::diffcore
