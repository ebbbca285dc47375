#include "volnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "volnet/metrics.hpp"
#include "volnet/parallel.hpp"
#include "volnet/rng.hpp"

namespace volnet {

namespace {

// Samples per gradient chunk. Fixed so the reduction order, and therefore
// every gradient bit, does not depend on how many threads are available.
constexpr std::size_t kGradChunk = 4;

CnnParams clone_param_values(const CnnParams& params) {
    CnnParams shadow;
    shadow.conv1 = LayerParams(params.conv1.weights, params.conv1.bias);
    shadow.conv2 = LayerParams(params.conv2.weights, params.conv2.bias);
    shadow.fc = LayerParams(params.fc.weights, params.fc.bias);
    return shadow;
}

void add_grads(CnnParams& into, const CnnParams& from) {
    auto add = [](Volume& a, const Volume& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    add(into.conv1.grad_weights, from.conv1.grad_weights);
    add(into.conv1.grad_bias, from.conv1.grad_bias);
    add(into.conv2.grad_weights, from.conv2.grad_weights);
    add(into.conv2.grad_bias, from.conv2.grad_bias);
    add(into.fc.grad_weights, from.fc.grad_weights);
    add(into.fc.grad_bias, from.fc.grad_bias);
}

} // namespace

double lr_at_epoch(std::size_t epoch, const CnnConfig& config) {
    const auto steps = static_cast<double>(epoch / config.lr_decay_every);
    return config.lr0 * std::pow(config.lr_decay_factor, steps);
}

double train_step(CnnParams& params, std::span<const BatchItem> batch, double lr,
                  const CnnConfig& config) {
    if (batch.empty()) {
        throw DataError("train_step requires a non-empty batch");
    }
    params.zero_grads();

    const std::size_t n = batch.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    const std::size_t n_chunks = (n + kGradChunk - 1) / kGradChunk;

    std::vector<CnnParams> chunk_grads(n_chunks);
    std::vector<double> chunk_bce(n_chunks, 0.0);

    parallel_chunks(n, kGradChunk, config.n_threads,
                    [&](std::size_t chunk, std::size_t begin, std::size_t end) {
                        CnnParams shadow = clone_param_values(params);
                        double bce_sum = 0.0;
                        for (std::size_t i = begin; i < end; ++i) {
                            Tape tape;
                            const Tape::NodeId input = tape.leaf(
                                as_network_input(*batch[i].voxels), /*needs_grad=*/false);
                            const Tape::NodeId prob =
                                network_forward(tape, input, shadow, config);
                            const double p = tape.value(prob)[0];
                            const int y = batch[i].label;
                            bce_sum += y == 1 ? -std::log(std::clamp(p, kProbEps, 1.0 - kProbEps))
                                              : -std::log(1.0 - std::clamp(p, kProbEps,
                                                                           1.0 - kProbEps));
                            const double seed = inv_n * bce_prob_gradient(p, y);
                            if (seed != 0.0) {
                                tape.backward(prob, seed);
                            }
                        }
                        chunk_grads[chunk] = std::move(shadow);
                        chunk_bce[chunk] = bce_sum;
                    });

    double bce_total = 0.0;
    for (std::size_t c = 0; c < n_chunks; ++c) {
        add_grads(params, chunk_grads[c]);
        bce_total += chunk_bce[c];
    }

    // L2 contribution, once per step: lambda * sum(theta^2) and 2*lambda*theta.
    double l2_value = 0.0;
    if (config.lambda != 0.0) {
        params.for_each_tensor([&](Volume& w, Volume& g, Volume&) {
            for (std::size_t i = 0; i < w.size(); ++i) {
                l2_value += config.lambda * w[i] * w[i];
                g[i] += 2.0 * config.lambda * w[i];
            }
        });
    }

    const double loss = bce_total * inv_n + l2_value;
    if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss (bce=" << bce_total * inv_n << ", l2=" << l2_value
            << ", lr=" << lr << "): learning rate too high or degenerate data";
        throw NumericError(msg.str());
    }

    params.for_each_tensor([&](Volume& w, Volume& g, Volume& v) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = config.momentum * v[i] + g[i];
            w[i] -= lr * v[i];
        }
    });
    return loss;
}

std::vector<double> predict_batch(const CnnConfig& config, const CnnParams& params,
                                  std::span<const Sample3D> samples) {
    std::vector<double> probs(samples.size());
    // Parameters are read-only here; each task owns its tape.
    CnnParams& mutable_params = const_cast<CnnParams&>(params);
    parallel_for(samples.size(), config.n_threads, [&](std::size_t i) {
        probs[i] = predict(config, mutable_params, samples[i].voxels);
    });
    return probs;
}

namespace {

double subject_level_auc(std::span<const Sample3D> samples, const std::vector<double>& probs) {
    std::vector<SamplePrediction> preds;
    preds.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        preds.push_back(SamplePrediction{samples[i].subject_id, samples[i].label, probs[i]});
    }
    return auc_roc(soft_vote(preds));
}

void check_no_leakage(std::span<const Sample3D> train_samples,
                      std::span<const Sample3D> val_samples) {
    std::set<std::string> train_ids;
    for (const Sample3D& s : train_samples) train_ids.insert(s.subject_id);
    for (const Sample3D& s : val_samples) {
        if (train_ids.count(s.subject_id)) {
            throw DataError("subject leakage: '" + s.subject_id +
                            "' appears in both train and validation splits");
        }
    }
}

} // namespace

TrainResult train(const CnnConfig& config, std::span<const Sample3D> train_samples,
                  std::span<const Sample3D> val_samples, const ResumePoint* resume) {
    config.validate();
    if (train_samples.empty() || val_samples.empty()) {
        throw DataError("training requires non-empty train and validation sets");
    }
    check_no_leakage(train_samples, val_samples);

    CnnParams params = resume ? resume->params : init_params(config, config.seed);
    TrainerState state = resume ? resume->state : TrainerState{};
    CnnParams best_params = resume && state.best_epoch >= 0 ? resume->best_params : params;
    bool stopped_early = false;

    const std::size_t n = train_samples.size();
    std::vector<std::size_t> order(n);

    for (std::size_t epoch = state.next_epoch; epoch < config.max_epochs; ++epoch) {
        const double lr = lr_at_epoch(epoch, config);

        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng epoch_rng(mix_seed(config.seed, epoch));
        epoch_rng.shuffle(order);

        double loss_weighted = 0.0;
        for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
            const std::size_t end = std::min(begin + config.batch_size, n);
            std::vector<BatchItem> batch;
            batch.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                batch.push_back(
                    BatchItem{&train_samples[order[i]].voxels, train_samples[order[i]].label});
            }
            const double batch_loss = train_step(params, batch, lr, config);
            loss_weighted += batch_loss * static_cast<double>(end - begin);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.train_loss = loss_weighted / static_cast<double>(n);

        const std::vector<double> train_probs = predict_batch(config, params, train_samples);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const int predicted = train_probs[i] >= 0.5 ? 1 : 0;
            if (predicted == train_samples[i].label) ++correct;
        }
        stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);

        const std::vector<double> val_probs = predict_batch(config, params, val_samples);
        std::vector<int> val_labels(val_samples.size());
        for (std::size_t i = 0; i < val_samples.size(); ++i) {
            val_labels[i] = val_samples[i].label;
        }
        std::vector<const LayerParams*> cl{&params.conv1, &params.conv2, &params.fc};
        stats.val_loss = bce_l2_value(val_probs, val_labels, {cl.data(), cl.size()},
                                      config.lambda);
        stats.val_auc = subject_level_auc(val_samples, val_probs);

        state.history.epochs.push_back(stats);

        if (state.best_epoch < 0 || stats.val_auc > state.best_val_auc) {
            state.best_val_auc = stats.val_auc;
            state.best_epoch = static_cast<long>(epoch);
            state.epochs_since_improve = 0;
            best_params = params;
        } else {
            ++state.epochs_since_improve;
            if (state.epochs_since_improve >= config.early_stop_patience) {
                state.next_epoch = epoch + 1;
                stopped_early = true;
                break;
            }
        }
        state.next_epoch = epoch + 1;
    }

    state.history.stop_reason = stopped_early ? "early_stop" : "max_epochs";
    state.history.best_epoch = state.best_epoch >= 0 ? static_cast<std::size_t>(state.best_epoch)
                                                     : 0;

    TrainResult result;
    result.history = state.history;
    result.best_params = std::move(best_params);
    result.final_params = std::move(params);
    result.end_state = std::move(state);
    return result;
}

} // namespace volnet
