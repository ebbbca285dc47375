#include "volnet/checkpoint.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>

#include "volnet/kvtext.hpp"

namespace volnet {

namespace {

constexpr std::array<char, 4> kMagic = {'V', 'C', 'K', 'P'};
constexpr std::array<char, 4> kResumeMarker = {'R', 'S', 'U', 'M'};

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_integral_v<T> && std::is_unsigned_v<T>);
    char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    }
    out.write(bytes, sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::string& origin, const char* what) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
        throw DataError(origin + ": corrupt checkpoint, truncated at " + what);
    }
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(bytes[i]) << (8 * i);
    }
    return value;
}

void write_f64(std::ostream& out, double value) {
    write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(value));
}

double read_f64(std::istream& in, const std::string& origin, const char* what) {
    return std::bit_cast<double>(read_le<std::uint64_t>(in, origin, what));
}

void write_volume(std::ostream& out, const Volume& volume) {
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(volume.rank()));
    for (std::size_t axis = 0; axis < volume.rank(); ++axis) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(volume.dim(axis)));
    }
    for (double v : volume.values()) write_f64(out, v);
}

Volume read_volume(std::istream& in, const std::string& origin, const char* what) {
    const auto rank = read_le<std::uint8_t>(in, origin, what);
    if (rank < 1 || rank > 5) {
        throw DataError(origin + ": corrupt checkpoint, bad rank for " + what);
    }
    std::vector<std::size_t> shape(rank);
    for (std::size_t axis = 0; axis < rank; ++axis) {
        shape[axis] = read_le<std::uint32_t>(in, origin, what);
    }
    const std::size_t n = shape_volume(shape);
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = read_f64(in, origin, what);
    return Volume(std::move(shape), std::move(data));
}

void write_string(std::ostream& out, const std::string& s) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::string& origin, const char* what) {
    const auto len = read_le<std::uint32_t>(in, origin, what);
    std::string s(len, '\0');
    if (len > 0 && !in.read(s.data(), len)) {
        throw DataError(origin + ": corrupt checkpoint, truncated at " + what);
    }
    return s;
}

void write_layer_group(std::ostream& out, const LayerParams& layer, const Volume& v_w,
                       const Volume& v_b) {
    write_volume(out, layer.weights);
    write_volume(out, layer.bias);
    write_volume(out, v_w);
    write_volume(out, v_b);
}

void read_layer_group(std::istream& in, const std::string& origin, const char* name,
                      LayerParams& layer, Volume& v_w, Volume& v_b) {
    Volume w = read_volume(in, origin, name);
    Volume b = read_volume(in, origin, name);
    layer = LayerParams(std::move(w), std::move(b));
    v_w = read_volume(in, origin, name);
    v_b = read_volume(in, origin, name);
    if (!v_w.same_shape(layer.weights) || !v_b.same_shape(layer.bias)) {
        throw DataError(origin + ": velocity shapes do not match parameters for " +
                        std::string(name));
    }
}

void write_param_values(std::ostream& out, const CnnParams& params) {
    write_volume(out, params.conv1.weights);
    write_volume(out, params.conv1.bias);
    write_volume(out, params.conv2.weights);
    write_volume(out, params.conv2.bias);
    write_volume(out, params.fc.weights);
    write_volume(out, params.fc.bias);
}

CnnParams read_param_values(std::istream& in, const std::string& origin, const char* what) {
    CnnParams p;
    Volume c1w = read_volume(in, origin, what);
    Volume c1b = read_volume(in, origin, what);
    p.conv1 = LayerParams(std::move(c1w), std::move(c1b));
    Volume c2w = read_volume(in, origin, what);
    Volume c2b = read_volume(in, origin, what);
    p.conv2 = LayerParams(std::move(c2w), std::move(c2b));
    Volume fw = read_volume(in, origin, what);
    Volume fb = read_volume(in, origin, what);
    p.fc = LayerParams(std::move(fw), std::move(fb));
    p.v_conv1_w = p.conv1.weights.zeros_like();
    p.v_conv1_b = p.conv1.bias.zeros_like();
    p.v_conv2_w = p.conv2.weights.zeros_like();
    p.v_conv2_b = p.conv2.bias.zeros_like();
    p.v_fc_w = p.fc.weights.zeros_like();
    p.v_fc_b = p.fc.bias.zeros_like();
    return p;
}

} // namespace

std::string cnn_config_to_text(const CnnConfig& c) {
    KvWriter kv;
    kv.add("input_d", c.input_shape[0]);
    kv.add("input_h", c.input_shape[1]);
    kv.add("input_w", c.input_shape[2]);
    kv.add("conv1_channels", c.conv1_channels);
    kv.add("conv1_kernel", c.conv1_kernel);
    kv.add("conv2_channels", c.conv2_channels);
    kv.add("conv2_kernel", c.conv2_kernel);
    kv.add("pool_window", c.pool_window);
    kv.add("lr0", c.lr0);
    kv.add("lr_decay_factor", c.lr_decay_factor);
    kv.add("lr_decay_every", c.lr_decay_every);
    kv.add("momentum", c.momentum);
    kv.add("lambda", c.lambda);
    kv.add("batch_size", c.batch_size);
    kv.add("max_epochs", c.max_epochs);
    kv.add("early_stop_patience", c.early_stop_patience);
    kv.add("seed", static_cast<std::uint64_t>(c.seed));
    kv.add("n_threads", c.n_threads);
    return kv.str();
}

CnnConfig cnn_config_from_text(const std::string& text, const std::string& origin,
                               bool reject_unknown) {
    KvReader kv(text, origin);
    CnnConfig c;
    c.input_shape[0] = kv.get_u64("input_d", c.input_shape[0]);
    c.input_shape[1] = kv.get_u64("input_h", c.input_shape[1]);
    c.input_shape[2] = kv.get_u64("input_w", c.input_shape[2]);
    c.conv1_channels = kv.get_u64("conv1_channels", c.conv1_channels);
    c.conv1_kernel = kv.get_u64("conv1_kernel", c.conv1_kernel);
    c.conv2_channels = kv.get_u64("conv2_channels", c.conv2_channels);
    c.conv2_kernel = kv.get_u64("conv2_kernel", c.conv2_kernel);
    c.pool_window = kv.get_u64("pool_window", c.pool_window);
    c.lr0 = kv.get_double("lr0", c.lr0);
    c.lr_decay_factor = kv.get_double("lr_decay_factor", c.lr_decay_factor);
    c.lr_decay_every = kv.get_u64("lr_decay_every", c.lr_decay_every);
    c.momentum = kv.get_double("momentum", c.momentum);
    c.lambda = kv.get_double("lambda", c.lambda);
    c.batch_size = kv.get_u64("batch_size", c.batch_size);
    c.max_epochs = kv.get_u64("max_epochs", c.max_epochs);
    c.early_stop_patience = kv.get_u64("early_stop_patience", c.early_stop_patience);
    c.seed = kv.get_u64("seed", c.seed);
    c.n_threads = kv.get_u64("n_threads", c.n_threads);
    if (reject_unknown) {
        kv.reject_unknown();
    }
    c.validate();
    return c;
}

ResumePoint Checkpoint::resume_point() const {
    if (!trainer_state) {
        throw DataError("checkpoint carries no trainer state to resume from");
    }
    ResumePoint rp;
    rp.params = params;
    rp.best_params = best_params ? *best_params : params;
    rp.state = *trainer_state;
    return rp;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open '" + path.string() + "' for writing");
    }
    out.write(kMagic.data(), kMagic.size());
    write_le<std::uint16_t>(out, kCheckpointVersion);
    write_string(out, checkpoint.config_text.empty() ? cnn_config_to_text(checkpoint.config)
                                                     : checkpoint.config_text);
    write_volume(out, checkpoint.normalizer.mean_image);
    write_f64(out, checkpoint.normalizer.max_abs);

    const CnnParams& p = checkpoint.params;
    write_layer_group(out, p.conv1, p.v_conv1_w, p.v_conv1_b);
    write_layer_group(out, p.conv2, p.v_conv2_w, p.v_conv2_b);
    write_layer_group(out, p.fc, p.v_fc_w, p.v_fc_b);

    if (checkpoint.trainer_state) {
        const TrainerState& st = *checkpoint.trainer_state;
        out.write(kResumeMarker.data(), kResumeMarker.size());
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(st.next_epoch));
        write_le<std::uint64_t>(out, static_cast<std::uint64_t>(st.best_epoch + 1)); // 0 = none
        write_f64(out, st.best_val_auc);
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(st.epochs_since_improve));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(st.history.epochs.size()));
        for (const EpochStats& e : st.history.epochs) {
            write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.epoch));
            write_f64(out, e.lr);
            write_f64(out, e.train_loss);
            write_f64(out, e.train_accuracy);
            write_f64(out, e.val_loss);
            write_f64(out, e.val_auc);
        }
        const CnnParams& best = checkpoint.best_params ? *checkpoint.best_params
                                                       : checkpoint.params;
        write_param_values(out, best);
    }
    if (!out) {
        throw DataError("write failed for '" + path.string() + "'");
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    const std::string origin = path.filename().string();

    std::array<char, 4> magic;
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw DataError(origin + ": bad magic, not a checkpoint file");
    }
    const auto version = read_le<std::uint16_t>(in, origin, "version");
    if (version != kCheckpointVersion) {
        throw DataError(origin + ": unsupported checkpoint version " + std::to_string(version));
    }

    Checkpoint ck;
    ck.config_text = read_string(in, origin, "config");
    ck.config = cnn_config_from_text(ck.config_text, origin + "/config",
                                     /*reject_unknown=*/false);
    ck.normalizer.mean_image = read_volume(in, origin, "normalizer mean image");
    ck.normalizer.max_abs = read_f64(in, origin, "normalizer max_abs");
    if (!(ck.normalizer.max_abs > 0.0) || !std::isfinite(ck.normalizer.max_abs)) {
        throw DataError(origin + ": corrupt normalizer max_abs");
    }

    read_layer_group(in, origin, "conv1", ck.params.conv1, ck.params.v_conv1_w,
                     ck.params.v_conv1_b);
    read_layer_group(in, origin, "conv2", ck.params.conv2, ck.params.v_conv2_w,
                     ck.params.v_conv2_b);
    read_layer_group(in, origin, "fc", ck.params.fc, ck.params.v_fc_w, ck.params.v_fc_b);

    std::array<char, 4> marker;
    if (in.read(marker.data(), marker.size())) {
        if (marker != kResumeMarker) {
            throw DataError(origin + ": corrupt checkpoint, unexpected trailing section");
        }
        TrainerState st;
        st.next_epoch = read_le<std::uint32_t>(in, origin, "resume epoch");
        st.best_epoch = static_cast<long>(read_le<std::uint64_t>(in, origin, "best epoch")) - 1;
        st.best_val_auc = read_f64(in, origin, "best val auc");
        st.epochs_since_improve = read_le<std::uint32_t>(in, origin, "patience counter");
        const auto n_epochs = read_le<std::uint32_t>(in, origin, "history length");
        st.history.epochs.reserve(n_epochs);
        for (std::uint32_t i = 0; i < n_epochs; ++i) {
            EpochStats e;
            e.epoch = read_le<std::uint32_t>(in, origin, "history epoch");
            e.lr = read_f64(in, origin, "history lr");
            e.train_loss = read_f64(in, origin, "history train loss");
            e.train_accuracy = read_f64(in, origin, "history train accuracy");
            e.val_loss = read_f64(in, origin, "history val loss");
            e.val_auc = read_f64(in, origin, "history val auc");
            st.history.epochs.push_back(e);
        }
        ck.best_params = read_param_values(in, origin, "best params");
        ck.trainer_state = std::move(st);
        if (in.peek() != std::istream::traits_type::eof()) {
            throw DataError(origin + ": trailing bytes after checkpoint payload");
        }
    } else if (!in.eof()) {
        throw DataError(origin + ": corrupt checkpoint, short trailing section");
    }
    return ck;
}

} // namespace volnet
