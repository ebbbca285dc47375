#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "volnet/autodiff.hpp"

namespace volnet {

/// Architecture and training hyperparameters of the 3D CNN. Defaults give
/// conv(16,5) -> relu -> pool2 -> conv(32,3) -> relu -> pool2 -> fc -> sigmoid
/// over a 43x51x40 input, trained with SGD momentum 0.8, lr 0.1 decayed by
/// 0.2 every 7 epochs, L2 lambda 1e-3, batches of 128.
struct CnnConfig {
    std::array<std::size_t, 3> input_shape{43, 51, 40};
    std::size_t conv1_channels = 16;
    std::size_t conv1_kernel = 5;
    std::size_t conv2_channels = 32;
    std::size_t conv2_kernel = 3;
    std::size_t pool_window = 2;

    double lr0 = 0.1;
    double lr_decay_factor = 0.2;
    std::size_t lr_decay_every = 7;
    double momentum = 0.8;
    double lambda = 1e-3;
    std::size_t batch_size = 128;
    std::size_t max_epochs = 30;
    std::size_t early_stop_patience = 3;
    std::uint64_t seed = 0;

    std::size_t n_threads = 0; // 0 = hardware concurrency; affects speed only

    void validate() const;

    /// Shapes of every stage output, input through probability, for the
    /// default trace checks and fc sizing.
    std::vector<std::vector<std::size_t>> layer_shapes() const;

    /// Flattened feature count entering the dense layer.
    std::size_t fc_in_dim() const;
};

/// All learnable tensors of the network plus the optimizer's velocity
/// buffers (one per parameter tensor, same shapes).
struct CnnParams {
    LayerParams conv1;
    LayerParams conv2;
    LayerParams fc;
    Volume v_conv1_w, v_conv1_b;
    Volume v_conv2_w, v_conv2_b;
    Volume v_fc_w, v_fc_b;

    void zero_grads();
    void zero_velocity();

    /// Visits (weights, grad, velocity) triples in a fixed order; the bias
    /// tensors follow their layer's weights.
    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        fn(conv1.weights, conv1.grad_weights, v_conv1_w);
        fn(conv1.bias, conv1.grad_bias, v_conv1_b);
        fn(conv2.weights, conv2.grad_weights, v_conv2_w);
        fn(conv2.bias, conv2.grad_bias, v_conv2_b);
        fn(fc.weights, fc.grad_weights, v_fc_w);
        fn(fc.bias, fc.grad_bias, v_fc_b);
    }

    std::array<LayerParams*, 3> layers() { return {&conv1, &conv2, &fc}; }
    std::array<const LayerParams*, 3> layers() const { return {&conv1, &conv2, &fc}; }
};

/// Parameters drawn i.i.d. uniform on (-sqrt(u), sqrt(u)) per layer, with
/// u the reciprocal of that layer's weight entry count (biases reuse the
/// layer's u). Velocity buffers start at zero. Deterministic given seed.
CnnParams init_params(const CnnConfig& config, std::uint64_t seed);

/// Records the full network on the tape; returns the probability node.
/// The input node must hold a normalized [1,D,H,W] volume.
Tape::NodeId network_forward(Tape& tape, Tape::NodeId input, CnnParams& params,
                             const CnnConfig& config);

/// Probability p(y=1|x) for one normalized sample, on a private tape.
double predict(const CnnConfig& config, CnnParams& params, const Volume& sample);

/// Wraps a rank-3 sample volume as the rank-4 single-channel network input.
Volume as_network_input(const Volume& sample);

} // namespace volnet
