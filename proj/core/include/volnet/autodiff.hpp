#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "volnet/volume.hpp"

namespace volnet {

/// Weights and bias of one layer together with their gradient accumulators.
///
/// Convolution weights are rank 5 [C_out, C_in, kD, kH, kW]; dense weights
/// rank 2 [out, in]. Gradient buffers always match the parameter shapes and
/// accumulate with += across backward passes until zero_grads().
struct LayerParams {
    Volume weights;
    Volume bias;
    Volume grad_weights;
    Volume grad_bias;

    LayerParams() = default;
    LayerParams(Volume w, Volume b)
        : weights(std::move(w)),
          bias(std::move(b)),
          grad_weights(weights.zeros_like()),
          grad_bias(bias.zeros_like()) {}

    /// Conv layer of the given kernel geometry, zero-initialized.
    static LayerParams conv3d(std::size_t out_channels, std::size_t in_channels,
                              std::size_t kd, std::size_t kh, std::size_t kw);

    /// Dense layer mapping in_dim to out_dim, zero-initialized.
    static LayerParams dense(std::size_t out_dim, std::size_t in_dim);

    std::size_t weight_count() const { return weights.size(); }

    void zero_grads() {
        grad_weights.fill(0.0);
        grad_bias.fill(0.0);
    }
};

/// Record of executed differentiable ops. Each forward op appends one node
/// holding its output value, a same-shaped gradient buffer, and a backward
/// step; backward() replays the steps in exact reverse execution order.
///
/// A tape is single-writer: one thread records and runs backward. Several
/// independent tapes may run concurrently against the same LayerParams only
/// if no backward pass touches the parameter gradients (read-only inference).
class Tape {
public:
    using NodeId = std::size_t;
    using BackwardFn = std::function<void(Tape&, NodeId)>;

    /// Input node with no backward step; its gradient is available after
    /// backward() for sensitivity analysis. Training loops that never read
    /// input gradients pass needs_grad = false, which lets the first layer
    /// skip its input-adjoint computation.
    NodeId leaf(Volume value, bool needs_grad = true);

    /// False only for leaves created with needs_grad = false.
    bool wants_grad(NodeId id) const { return nodes_[check(id)].wants_grad; }

    /// Appends an op output node. Used by the op implementations.
    NodeId record(Volume value, BackwardFn backward);

    const Volume& value(NodeId id) const { return nodes_[check(id)].value; }

    /// Gradient buffer of a node, allocated (zeros) on first access.
    Volume& grad(NodeId id);
    const Volume& grad(NodeId id) const;

    /// Seeds d(root)/d(root) = seed and propagates through every node from
    /// root back to the start of the tape. Gradients accumulate; call
    /// zero_grads() (and LayerParams::zero_grads()) between independent
    /// passes. root must hold a scalar.
    void backward(NodeId root, double seed = 1.0);

    /// Seeds an arbitrary upstream gradient on `node` (same shape as its
    /// value) and propagates from there back through the tape.
    void backward_with(NodeId node, const Volume& upstream);

    void zero_grads();

    std::size_t node_count() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }

private:
    struct Node {
        Volume value;
        Volume grad; // empty until first use; then value-shaped
        BackwardFn backward;
        bool wants_grad = true;
    };

    NodeId check(NodeId id) const {
        if (id >= nodes_.size()) {
            throw Error("invalid tape: node " + std::to_string(id) + " of " +
                        std::to_string(nodes_.size()));
        }
        return id;
    }

    std::vector<Node> nodes_;
};

/// Valid (unpadded) 3D convolution. input [C_in,D,H,W] with kernel
/// [C_out,C_in,kD,kH,kW] gives [C_out,D',H',W'], D' = (D-kD)/stride + 1.
/// Backward accumulates exact adjoints into the input node gradient and
/// params.grad_weights / params.grad_bias.
Tape::NodeId conv3d(Tape& tape, Tape::NodeId input, LayerParams& params, std::size_t stride = 1);

/// Non-overlapping max pooling over cubic windows, stride == window,
/// trailing partial windows dropped. Ties pick the first element in
/// row-major window scan order; backward routes the whole gradient there.
Tape::NodeId maxpool3d(Tape& tape, Tape::NodeId input, std::size_t window);

/// Dense layer W*x + b over the flattened input.
Tape::NodeId dense(Tape& tape, Tape::NodeId input, LayerParams& params);

/// Elementwise max(0, x). Subgradient at exactly 0 is 0.
Tape::NodeId relu(Tape& tape, Tape::NodeId input);

/// Logistic function of a scalar logit, branch form; output in (0, 1).
Tape::NodeId sigmoid(Tape& tape, Tape::NodeId logit);

/// Probability floor used before the BCE log terms.
inline constexpr double kProbEps = 1e-12;

/// Mean binary cross entropy over the batch plus lambda times the squared
/// L2 norm of all weights and biases in `params`. Probabilities are clamped
/// to [kProbEps, 1-kProbEps] before the logs; clamped samples get zero
/// gradient. Labels must be 0 or 1.
Tape::NodeId bce_l2_loss(Tape& tape, std::span<const Tape::NodeId> probs,
                         std::span<const int> labels, std::span<LayerParams* const> params,
                         double lambda);

/// Loss value for already-computed probabilities, outside any tape. Same
/// arithmetic as bce_l2_loss.
double bce_l2_value(std::span<const double> probs, std::span<const int> labels,
                    std::span<const LayerParams* const> params, double lambda);

/// d/dp of the clamped per-sample BCE term; zero where the clamp binds.
/// Shared by the loss op and the training loop so both paths agree exactly.
double bce_prob_gradient(double p, int y);

} // namespace volnet
