#pragma once

#include <filesystem>
#include <optional>

#include "volnet/normalizer.hpp"
#include "volnet/trainer.hpp"

namespace volnet {

// Checkpoint container. Layout:
//   magic "VCKP" | u16 version | u32 length + config key-value text |
//   normalizer (mean image + max_abs) | per layer (conv1, conv2, fc):
//   weights, bias, velocity-of-weights, velocity-of-bias, each as a
//   shape-prefixed little-endian f64 array.
// An optional trailing "RSUM" section carries the early-stopping state,
// best-epoch parameter snapshot and history so an interrupted run resumes
// bit-for-bit.

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
    CnnConfig config;
    Normalizer normalizer;
    CnnParams params; // current parameters with velocity buffers

    /// Canonical key-value text stored in the file. May carry more keys
    /// than CnnConfig (the full run configuration); empty means "generate
    /// from `config` on save". Loading always fills it with the raw text.
    std::string config_text;

    // Present only in mid-run checkpoints.
    std::optional<TrainerState> trainer_state;
    std::optional<CnnParams> best_params;

    /// Resume description for train(); valid only when trainer_state is set.
    ResumePoint resume_point() const;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Canonical key-value text for the architecture/training configuration,
/// embedded in checkpoints. Parsing rejects unknown keys only when asked:
/// user-authored files want typo safety, machine-written checkpoint text
/// may carry additional pipeline keys.
std::string cnn_config_to_text(const CnnConfig& config);
CnnConfig cnn_config_from_text(const std::string& text, const std::string& origin,
                               bool reject_unknown = true);

} // namespace volnet
