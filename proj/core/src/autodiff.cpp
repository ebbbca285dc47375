#include "volnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#if defined(_MSC_VER)
#define VOLNET_RESTRICT __restrict
#else
#define VOLNET_RESTRICT __restrict__
#endif

namespace volnet {

LayerParams LayerParams::conv3d(std::size_t out_channels, std::size_t in_channels,
                                std::size_t kd, std::size_t kh, std::size_t kw) {
    return LayerParams(Volume({out_channels, in_channels, kd, kh, kw}),
                       Volume({out_channels}));
}

LayerParams LayerParams::dense(std::size_t out_dim, std::size_t in_dim) {
    return LayerParams(Volume({out_dim, in_dim}), Volume({out_dim}));
}

Tape::NodeId Tape::leaf(Volume value, bool needs_grad) {
    nodes_.push_back(Node{std::move(value), Volume{}, nullptr, needs_grad});
    return nodes_.size() - 1;
}

Tape::NodeId Tape::record(Volume value, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), Volume{}, std::move(backward), true});
    return nodes_.size() - 1;
}

Volume& Tape::grad(NodeId id) {
    Node& node = nodes_[check(id)];
    if (node.grad.size() == 0) {
        node.grad = node.value.zeros_like();
    }
    return node.grad;
}

const Volume& Tape::grad(NodeId id) const {
    const Node& node = nodes_[check(id)];
    if (node.grad.size() == 0) {
        throw Error("gradient of node " + std::to_string(id) + " was never materialized");
    }
    return node.grad;
}

void Tape::backward(NodeId root, double seed) {
    if (nodes_.empty()) {
        throw Error("invalid tape: backward before any forward op");
    }
    check(root);
    if (nodes_[root].value.size() != 1) {
        throw ShapeError("backward root must be scalar, got " + nodes_[root].value.shape_str());
    }
    grad(root)[0] += seed;
    for (std::size_t i = root + 1; i-- > 0;) {
        if (nodes_[i].backward) {
            nodes_[i].backward(*this, i);
        }
    }
}

void Tape::backward_with(NodeId node, const Volume& upstream) {
    if (nodes_.empty()) {
        throw Error("invalid tape: backward before any forward op");
    }
    check(node);
    if (!upstream.same_shape(nodes_[node].value)) {
        throw ShapeError("upstream gradient shape " + upstream.shape_str() +
                         " does not match node value " + nodes_[node].value.shape_str());
    }
    Volume& g = grad(node);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += upstream[i];
    for (std::size_t i = node + 1; i-- > 0;) {
        if (nodes_[i].backward) {
            nodes_[i].backward(*this, i);
        }
    }
}

void Tape::zero_grads() {
    for (Node& node : nodes_) {
        node.grad.fill(0.0);
    }
}

namespace {

struct ConvDims {
    std::size_t cin, d, h, w;
    std::size_t cout, kd, kh, kw;
    std::size_t od, oh, ow;
    std::size_t stride;
};

ConvDims conv_dims(const Volume& input, const LayerParams& params, std::size_t stride) {
    if (stride < 1) {
        throw ShapeError("conv3d stride must be >= 1");
    }
    if (input.rank() != 4) {
        throw ShapeError("conv3d input must be rank 4 [C,D,H,W], got " + input.shape_str());
    }
    if (params.weights.rank() != 5) {
        throw ShapeError("conv3d kernel must be rank 5 [Cout,Cin,kD,kH,kW], got " +
                         params.weights.shape_str());
    }
    ConvDims dm;
    dm.cin = input.dim(0);
    dm.d = input.dim(1);
    dm.h = input.dim(2);
    dm.w = input.dim(3);
    dm.cout = params.weights.dim(0);
    dm.kd = params.weights.dim(2);
    dm.kh = params.weights.dim(3);
    dm.kw = params.weights.dim(4);
    dm.stride = stride;
    if (params.weights.dim(1) != dm.cin) {
        throw ShapeError("conv3d channel mismatch: input has " + std::to_string(dm.cin) +
                         " channels, kernel expects " + std::to_string(params.weights.dim(1)) +
                         " (input " + input.shape_str() + ", kernel " +
                         params.weights.shape_str() + ")");
    }
    if (params.bias.rank() != 1 || params.bias.dim(0) != dm.cout) {
        throw ShapeError("conv3d bias must be [Cout], got " + params.bias.shape_str());
    }
    if (dm.kd > dm.d || dm.kh > dm.h || dm.kw > dm.w) {
        throw ShapeError("conv3d kernel " + params.weights.shape_str() +
                         " does not fit input " + input.shape_str());
    }
    dm.od = (dm.d - dm.kd) / stride + 1;
    dm.oh = (dm.h - dm.kh) / stride + 1;
    dm.ow = (dm.w - dm.kw) / stride + 1;
    return dm;
}

void conv3d_forward_kernel(const ConvDims& dm, const double* VOLNET_RESTRICT in,
                           const double* VOLNET_RESTRICT wgt, const double* VOLNET_RESTRICT bias,
                           double* VOLNET_RESTRICT out) {
    const std::size_t s = dm.stride;
    for (std::size_t oc = 0; oc < dm.cout; ++oc) {
        const double* wc = wgt + oc * dm.cin * dm.kd * dm.kh * dm.kw;
        for (std::size_t od = 0; od < dm.od; ++od) {
            for (std::size_t oh = 0; oh < dm.oh; ++oh) {
                double* out_row = out + ((oc * dm.od + od) * dm.oh + oh) * dm.ow;
                for (std::size_t ow = 0; ow < dm.ow; ++ow) out_row[ow] = bias[oc];
                for (std::size_t ic = 0; ic < dm.cin; ++ic) {
                    for (std::size_t zk = 0; zk < dm.kd; ++zk) {
                        for (std::size_t yk = 0; yk < dm.kh; ++yk) {
                            const double* in_row =
                                in + ((ic * dm.d + od * s + zk) * dm.h + oh * s + yk) * dm.w;
                            const double* w_row =
                                wc + ((ic * dm.kd + zk) * dm.kh + yk) * dm.kw;
                            for (std::size_t xk = 0; xk < dm.kw; ++xk) {
                                const double wv = w_row[xk];
                                const double* in_off = in_row + xk;
                                if (s == 1) {
                                    for (std::size_t ow = 0; ow < dm.ow; ++ow) {
                                        out_row[ow] += wv * in_off[ow];
                                    }
                                } else {
                                    for (std::size_t ow = 0; ow < dm.ow; ++ow) {
                                        out_row[ow] += wv * in_off[ow * s];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

// Row reductions. The simd pragma licenses reassociation for exactly these
// loops (built with -fopenmp-simd); a plain `acc +=` chain would otherwise
// stay scalar since the compiler may not reorder floating-point sums.
inline double row_dot(const double* VOLNET_RESTRICT a, const double* VOLNET_RESTRICT b,
                      std::size_t n, std::size_t stride_a) {
    double acc = 0.0;
    if (stride_a == 1) {
#pragma omp simd reduction(+ : acc)
        for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    } else {
#pragma omp simd reduction(+ : acc)
        for (std::size_t i = 0; i < n; ++i) acc += a[i * stride_a] * b[i];
    }
    return acc;
}

inline double row_sum(const double* VOLNET_RESTRICT a, std::size_t n) {
    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

// Weight/bias adjoints, and input adjoints unless gin is null (first-layer
// training inputs do not need them). Weight gradients accumulate
// elementwise into a kw-by-ow tile swept over all output rows of one
// (ic,zk,yk) slice and reduce once per weight; a dot product per row pays
// horizontal-sum overhead millions of times.
void conv3d_backward_kernel(const ConvDims& dm, const double* VOLNET_RESTRICT in,
                            const double* VOLNET_RESTRICT wgt, const double* VOLNET_RESTRICT gout,
                            double* VOLNET_RESTRICT gin, double* VOLNET_RESTRICT gwgt,
                            double* VOLNET_RESTRICT gbias) {
    const std::size_t s = dm.stride;
    std::vector<double> tile(dm.kw * dm.ow);
    for (std::size_t oc = 0; oc < dm.cout; ++oc) {
        const double* wc = wgt + oc * dm.cin * dm.kd * dm.kh * dm.kw;
        double* gwc = gwgt + oc * dm.cin * dm.kd * dm.kh * dm.kw;
        const double* gout_c = gout + oc * dm.od * dm.oh * dm.ow;
        gbias[oc] += row_sum(gout_c, dm.od * dm.oh * dm.ow);

        for (std::size_t ic = 0; ic < dm.cin; ++ic) {
            for (std::size_t zk = 0; zk < dm.kd; ++zk) {
                for (std::size_t yk = 0; yk < dm.kh; ++yk) {
                    double* VOLNET_RESTRICT acc = tile.data();
                    for (double& v : tile) v = 0.0;
                    for (std::size_t od = 0; od < dm.od; ++od) {
                        for (std::size_t oh = 0; oh < dm.oh; ++oh) {
                            const double* gout_row =
                                gout_c + (od * dm.oh + oh) * dm.ow;
                            const double* in_row =
                                in + ((ic * dm.d + od * s + zk) * dm.h + oh * s + yk) * dm.w;
                            for (std::size_t xk = 0; xk < dm.kw; ++xk) {
                                double* acc_row = acc + xk * dm.ow;
                                if (s == 1) {
                                    const double* in_off = in_row + xk;
                                    for (std::size_t ow = 0; ow < dm.ow; ++ow) {
                                        acc_row[ow] += in_off[ow] * gout_row[ow];
                                    }
                                } else {
                                    for (std::size_t ow = 0; ow < dm.ow; ++ow) {
                                        acc_row[ow] += in_row[ow * s + xk] * gout_row[ow];
                                    }
                                }
                            }
                        }
                    }
                    const std::size_t wk_base = ((ic * dm.kd + zk) * dm.kh + yk) * dm.kw;
                    for (std::size_t xk = 0; xk < dm.kw; ++xk) {
                        gwc[wk_base + xk] += row_sum(acc + xk * dm.ow, dm.ow);
                    }
                }
            }
        }

        if (gin != nullptr) {
            for (std::size_t od = 0; od < dm.od; ++od) {
                for (std::size_t oh = 0; oh < dm.oh; ++oh) {
                    const double* gout_row = gout_c + (od * dm.oh + oh) * dm.ow;
                    for (std::size_t ic = 0; ic < dm.cin; ++ic) {
                        for (std::size_t zk = 0; zk < dm.kd; ++zk) {
                            for (std::size_t yk = 0; yk < dm.kh; ++yk) {
                                const std::size_t row_base =
                                    ((ic * dm.d + od * s + zk) * dm.h + oh * s + yk) * dm.w;
                                double* gin_row = gin + row_base;
                                const std::size_t wk_base =
                                    ((ic * dm.kd + zk) * dm.kh + yk) * dm.kw;
                                for (std::size_t xk = 0; xk < dm.kw; ++xk) {
                                    const double wv = wc[wk_base + xk];
                                    if (s == 1) {
                                        double* gin_off = gin_row + xk;
                                        for (std::size_t ow = 0; ow < dm.ow; ++ow) {
                                            gin_off[ow] += wv * gout_row[ow];
                                        }
                                    } else {
                                        for (std::size_t ow = 0; ow < dm.ow; ++ow) {
                                            gin_row[ow * s + xk] += wv * gout_row[ow];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

} // namespace

Tape::NodeId conv3d(Tape& tape, Tape::NodeId input, LayerParams& params, std::size_t stride) {
    const Volume& in = tape.value(input);
    const ConvDims dm = conv_dims(in, params, stride);

    Volume out({dm.cout, dm.od, dm.oh, dm.ow});
    conv3d_forward_kernel(dm, in.data(), params.weights.data(), params.bias.data(), out.data());

    LayerParams* p = &params;
    return tape.record(std::move(out), [input, p, dm](Tape& t, Tape::NodeId self) {
        const Volume& gout = t.grad(self);
        double* gin = t.wants_grad(input) ? t.grad(input).data() : nullptr;
        conv3d_backward_kernel(dm, t.value(input).data(), p->weights.data(), gout.data(), gin,
                               p->grad_weights.data(), p->grad_bias.data());
    });
}

Tape::NodeId maxpool3d(Tape& tape, Tape::NodeId input, std::size_t window) {
    if (window < 1) {
        throw ShapeError("maxpool3d window must be >= 1");
    }
    const Volume& in = tape.value(input);
    if (in.rank() != 4) {
        throw ShapeError("maxpool3d input must be rank 4 [C,D,H,W], got " + in.shape_str());
    }
    const std::size_t c = in.dim(0), d = in.dim(1), h = in.dim(2), w = in.dim(3);
    const std::size_t od = d / window, oh = h / window, ow = w / window;
    if (od == 0 || oh == 0 || ow == 0) {
        throw ShapeError("maxpool3d window " + std::to_string(window) + " larger than input " +
                         in.shape_str());
    }

    Volume out({c, od, oh, ow});
    std::vector<std::size_t> argmax(out.size());
    const double* src = in.data();
    double* dst = out.data();
    std::size_t o = 0;
    for (std::size_t ic = 0; ic < c; ++ic) {
        for (std::size_t zd = 0; zd < od; ++zd) {
            for (std::size_t zh = 0; zh < oh; ++zh) {
                for (std::size_t zw = 0; zw < ow; ++zw, ++o) {
                    std::size_t best_idx = 0;
                    double best = -std::numeric_limits<double>::infinity();
                    for (std::size_t a = 0; a < window; ++a) {
                        for (std::size_t b = 0; b < window; ++b) {
                            const std::size_t row =
                                ((ic * d + zd * window + a) * h + zh * window + b) * w +
                                zw * window;
                            for (std::size_t e = 0; e < window; ++e) {
                                const double v = src[row + e];
                                if (v > best) {
                                    best = v;
                                    best_idx = row + e;
                                }
                            }
                        }
                    }
                    dst[o] = best;
                    argmax[o] = best_idx;
                }
            }
        }
    }

    return tape.record(std::move(out),
                       [input, argmax = std::move(argmax)](Tape& t, Tape::NodeId self) {
                           const Volume& gout = t.grad(self);
                           Volume& gin = t.grad(input);
                           for (std::size_t i = 0; i < argmax.size(); ++i) {
                               gin[argmax[i]] += gout[i];
                           }
                       });
}

Tape::NodeId dense(Tape& tape, Tape::NodeId input, LayerParams& params) {
    const Volume& in = tape.value(input);
    if (params.weights.rank() != 2) {
        throw ShapeError("dense weights must be rank 2 [out,in], got " +
                         params.weights.shape_str());
    }
    const std::size_t out_dim = params.weights.dim(0);
    const std::size_t in_dim = params.weights.dim(1);
    if (in.size() != in_dim) {
        throw ShapeError("dense input length " + std::to_string(in.size()) +
                         " does not match weight in-dimension " + std::to_string(in_dim));
    }
    if (params.bias.rank() != 1 || params.bias.dim(0) != out_dim) {
        throw ShapeError("dense bias must be [out], got " + params.bias.shape_str());
    }

    Volume out({out_dim});
    const double* x = in.data();
    const double* wgt = params.weights.data();
    for (std::size_t o = 0; o < out_dim; ++o) {
        out[o] = params.bias[o] + row_dot(wgt + o * in_dim, x, in_dim, 1);
    }

    LayerParams* p = &params;
    return tape.record(std::move(out), [input, p, out_dim, in_dim](Tape& t, Tape::NodeId self) {
        const Volume& gout = t.grad(self);
        Volume& gin = t.grad(input);
        const double* x = t.value(input).data();
        const double* wgt = p->weights.data();
        double* gw = p->grad_weights.data();
        double* gx = gin.data();
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double g = gout[o];
            p->grad_bias[o] += g;
            const double* w_row = wgt + o * in_dim;
            double* gw_row = gw + o * in_dim;
            for (std::size_t i = 0; i < in_dim; ++i) {
                gw_row[i] += g * x[i];
                gx[i] += g * w_row[i];
            }
        }
    });
}

Tape::NodeId relu(Tape& tape, Tape::NodeId input) {
    const Volume& in = tape.value(input);
    Volume out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = in[i] > 0.0 ? in[i] : 0.0;
    }
    return tape.record(std::move(out), [input](Tape& t, Tape::NodeId self) {
        const Volume& gout = t.grad(self);
        Volume& gin = t.grad(input);
        const Volume& x = t.value(input);
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] > 0.0) gin[i] += gout[i];
        }
    });
}

namespace {

double stable_sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace

Tape::NodeId sigmoid(Tape& tape, Tape::NodeId logit) {
    const Volume& in = tape.value(logit);
    if (in.size() != 1) {
        throw ShapeError("sigmoid expects a scalar logit, got " + in.shape_str());
    }
    // Clamped into (0,1) so saturated logits cannot round to exactly 0 or 1.
    const double p = std::clamp(stable_sigmoid(in[0]), kProbEps, 1.0 - kProbEps);
    return tape.record(Volume({1}, {p}), [logit, p](Tape& t, Tape::NodeId self) {
        t.grad(logit)[0] += t.grad(self)[0] * p * (1.0 - p);
    });
}

namespace {

void validate_labels(std::span<const int> labels) {
    for (int y : labels) {
        if (y != 0 && y != 1) {
            throw DataError("label outside {0,1}: " + std::to_string(y));
        }
    }
}

double bce_term(double p, int y) {
    const double pc = std::clamp(p, kProbEps, 1.0 - kProbEps);
    return y == 1 ? -std::log(pc) : -std::log(1.0 - pc);
}

} // namespace

double bce_prob_gradient(double p, int y) {
    if (p <= kProbEps || p >= 1.0 - kProbEps) {
        return 0.0; // clamped: locally constant in p
    }
    return y == 1 ? -1.0 / p : 1.0 / (1.0 - p);
}

namespace {

double l2_term(std::span<const LayerParams* const> params, double lambda) {
    if (lambda == 0.0) return 0.0;
    double sq = 0.0;
    for (const LayerParams* p : params) {
        for (double v : p->weights.values()) sq += v * v;
        for (double v : p->bias.values()) sq += v * v;
    }
    return lambda * sq;
}

} // namespace

double bce_l2_value(std::span<const double> probs, std::span<const int> labels,
                    std::span<const LayerParams* const> params, double lambda) {
    if (probs.empty() || probs.size() != labels.size()) {
        throw DataError("bce_l2_loss needs a non-empty batch with matching labels");
    }
    validate_labels(labels);
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        sum += bce_term(probs[i], labels[i]);
    }
    return sum / static_cast<double>(probs.size()) + l2_term(params, lambda);
}

Tape::NodeId bce_l2_loss(Tape& tape, std::span<const Tape::NodeId> probs,
                         std::span<const int> labels, std::span<LayerParams* const> params,
                         double lambda) {
    if (probs.empty() || probs.size() != labels.size()) {
        throw DataError("bce_l2_loss needs a non-empty batch with matching labels");
    }
    validate_labels(labels);
    if (lambda < 0.0) {
        throw DataError("bce_l2_loss lambda must be non-negative");
    }

    const std::size_t n = probs.size();
    double sum = 0.0;
    std::vector<double> p_values(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Volume& pv = tape.value(probs[i]);
        if (pv.size() != 1) {
            throw ShapeError("bce_l2_loss probabilities must be scalars, got " + pv.shape_str());
        }
        p_values[i] = pv[0];
        sum += bce_term(pv[0], labels[i]);
    }

    std::vector<const LayerParams*> cparams(params.begin(), params.end());
    const double loss =
        sum / static_cast<double>(n) + l2_term({cparams.data(), cparams.size()}, lambda);

    std::vector<Tape::NodeId> prob_ids(probs.begin(), probs.end());
    std::vector<int> ys(labels.begin(), labels.end());
    std::vector<LayerParams*> ps(params.begin(), params.end());

    return tape.record(
        Volume({1}, {loss}),
        [prob_ids = std::move(prob_ids), ys = std::move(ys), ps = std::move(ps), p_values,
         lambda](Tape& t, Tape::NodeId self) {
            const double g = t.grad(self)[0];
            const double inv_n = 1.0 / static_cast<double>(prob_ids.size());
            for (std::size_t i = 0; i < prob_ids.size(); ++i) {
                const double d = bce_prob_gradient(p_values[i], ys[i]);
                if (d != 0.0) {
                    t.grad(prob_ids[i])[0] += g * inv_n * d;
                }
            }
            if (lambda != 0.0) {
                for (LayerParams* p : ps) {
                    double* gw = p->grad_weights.data();
                    const double* w = p->weights.data();
                    for (std::size_t i = 0; i < p->weights.size(); ++i) {
                        gw[i] += g * 2.0 * lambda * w[i];
                    }
                    double* gb = p->grad_bias.data();
                    const double* b = p->bias.data();
                    for (std::size_t i = 0; i < p->bias.size(); ++i) {
                        gb[i] += g * 2.0 * lambda * b[i];
                    }
                }
            }
        });
}

} // namespace volnet
