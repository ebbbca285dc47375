#include "volnet/network.hpp"

#include <cmath>

#include "volnet/rng.hpp"

namespace volnet {

void CnnConfig::validate() const {
    if (conv1_channels == 0 || conv2_channels == 0 || conv1_kernel == 0 || conv2_kernel == 0 ||
        pool_window == 0) {
        throw ConfigError("architecture sizes must be positive");
    }
    if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
        throw ConfigError("lr_decay_factor must be in (0, 1]");
    }
    if (lr_decay_every == 0) {
        throw ConfigError("lr_decay_every must be positive");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw ConfigError("momentum must be in [0, 1)");
    }
    if (lambda < 0.0) {
        throw ConfigError("lambda must be non-negative");
    }
    if (lr0 <= 0.0) {
        throw ConfigError("lr0 must be positive");
    }
    if (batch_size == 0 || max_epochs == 0) {
        throw ConfigError("batch_size and max_epochs must be positive");
    }
    layer_shapes(); // throws ConfigError when the architecture does not fit
}

std::vector<std::vector<std::size_t>> CnnConfig::layer_shapes() const {
    auto conv_out = [](const std::vector<std::size_t>& in, std::size_t channels,
                       std::size_t kernel) {
        std::vector<std::size_t> out{channels};
        for (std::size_t axis = 1; axis < 4; ++axis) {
            if (kernel > in[axis]) {
                throw ConfigError("architecture does not fit: kernel " + std::to_string(kernel) +
                                  " exceeds extent " + std::to_string(in[axis]));
            }
            out.push_back(in[axis] - kernel + 1);
        }
        return out;
    };
    auto pool_out = [](const std::vector<std::size_t>& in, std::size_t window) {
        std::vector<std::size_t> out{in[0]};
        for (std::size_t axis = 1; axis < 4; ++axis) {
            const std::size_t extent = in[axis] / window;
            if (extent == 0) {
                throw ConfigError("architecture does not fit: pool window " +
                                  std::to_string(window) + " exceeds extent " +
                                  std::to_string(in[axis]));
            }
            out.push_back(extent);
        }
        return out;
    };

    std::vector<std::vector<std::size_t>> shapes;
    shapes.push_back({1, input_shape[0], input_shape[1], input_shape[2]});
    shapes.push_back(conv_out(shapes.back(), conv1_channels, conv1_kernel));
    shapes.push_back(pool_out(shapes.back(), pool_window));
    shapes.push_back(conv_out(shapes.back(), conv2_channels, conv2_kernel));
    shapes.push_back(pool_out(shapes.back(), pool_window));
    shapes.push_back({shape_volume(shapes.back())}); // flatten
    shapes.push_back({1});                           // fc logit
    shapes.push_back({1});                           // sigmoid probability
    return shapes;
}

std::size_t CnnConfig::fc_in_dim() const {
    const auto shapes = layer_shapes();
    return shapes[shapes.size() - 3][0];
}

void CnnParams::zero_grads() {
    conv1.zero_grads();
    conv2.zero_grads();
    fc.zero_grads();
}

void CnnParams::zero_velocity() {
    for_each_tensor([](Volume&, Volume&, Volume& v) { v.fill(0.0); });
}

namespace {

void init_layer(LayerParams& layer, Rng& rng) {
    const double u = 1.0 / static_cast<double>(layer.weight_count());
    const double bound = std::sqrt(u);
    for (double& w : layer.weights.values()) w = rng.uniform(-bound, bound);
    for (double& b : layer.bias.values()) b = rng.uniform(-bound, bound);
}

} // namespace

CnnParams init_params(const CnnConfig& config, std::uint64_t seed) {
    config.validate();
    CnnParams params;
    params.conv1 = LayerParams::conv3d(config.conv1_channels, 1, config.conv1_kernel,
                                       config.conv1_kernel, config.conv1_kernel);
    params.conv2 =
        LayerParams::conv3d(config.conv2_channels, config.conv1_channels, config.conv2_kernel,
                            config.conv2_kernel, config.conv2_kernel);
    params.fc = LayerParams::dense(1, config.fc_in_dim());

    Rng rng(seed);
    init_layer(params.conv1, rng);
    init_layer(params.conv2, rng);
    init_layer(params.fc, rng);

    params.v_conv1_w = params.conv1.weights.zeros_like();
    params.v_conv1_b = params.conv1.bias.zeros_like();
    params.v_conv2_w = params.conv2.weights.zeros_like();
    params.v_conv2_b = params.conv2.bias.zeros_like();
    params.v_fc_w = params.fc.weights.zeros_like();
    params.v_fc_b = params.fc.bias.zeros_like();
    return params;
}

Tape::NodeId network_forward(Tape& tape, Tape::NodeId input, CnnParams& params,
                             const CnnConfig& config) {
    const Volume& in = tape.value(input);
    if (in.rank() != 4 || in.dim(0) != 1 || in.dim(1) != config.input_shape[0] ||
        in.dim(2) != config.input_shape[1] || in.dim(3) != config.input_shape[2]) {
        throw ShapeError("network input must be [1," + std::to_string(config.input_shape[0]) +
                         "," + std::to_string(config.input_shape[1]) + "," +
                         std::to_string(config.input_shape[2]) + "], got " + in.shape_str());
    }
    Tape::NodeId node = conv3d(tape, input, params.conv1);
    node = relu(tape, node);
    node = maxpool3d(tape, node, config.pool_window);
    node = conv3d(tape, node, params.conv2);
    node = relu(tape, node);
    node = maxpool3d(tape, node, config.pool_window);
    node = dense(tape, node, params.fc); // dense flattens its input
    return sigmoid(tape, node);
}

Volume as_network_input(const Volume& sample) {
    if (sample.rank() != 3) {
        throw ShapeError("sample must be rank 3, got " + sample.shape_str());
    }
    std::vector<std::size_t> shape{1, sample.dim(0), sample.dim(1), sample.dim(2)};
    return Volume(std::move(shape), std::vector<double>(sample.values().begin(),
                                                        sample.values().end()));
}

double predict(const CnnConfig& config, CnnParams& params, const Volume& sample) {
    Tape tape;
    const Tape::NodeId input = tape.leaf(as_network_input(sample));
    const Tape::NodeId prob = network_forward(tape, input, params, config);
    return tape.value(prob)[0];
}

} // namespace volnet
