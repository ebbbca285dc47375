#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "volnet/checkpoint.hpp"
#include "volnet/metrics.hpp"
#include "volnet/phantom.hpp"
#include "volnet/split.hpp"

namespace volnet::cli {

/// Full pipeline configuration: architecture and trainer settings plus the
/// data layout, windowing, run repetition and baseline knobs. Flat
/// "key = value" text with '#' comments; unknown keys are rejected.
struct RunConfig {
    CnnConfig cnn;
    std::filesystem::path data_dir;
    std::filesystem::path out_dir;
    std::uint64_t split_seed = 0;
    std::size_t window_m = 2;
    std::size_t window_s = 1;
    std::size_t n_runs = 10;
    double percentile = 95.0;
    double baseline_l2 = 1.0;
    std::size_t pca_components = 100;
    std::filesystem::path parcellation; // required by the fisherz-lr baseline

    static RunConfig from_file(const std::filesystem::path& path);
    static RunConfig from_text(const std::string& text, const std::string& origin,
                               bool reject_unknown = true);
    std::string to_text() const; // canonical form; parse(to_text()) round-trips

    void validate() const;
};

/// One cohort on disk: per-subject volume files plus ground-truth region
/// masks when the cohort is synthetic.
struct CohortIndex {
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, int>> subjects; // id, label
    std::vector<std::filesystem::path> subject_files;  // parallel to subjects
    std::vector<std::filesystem::path> mask_files;

    static CohortIndex load(const std::filesystem::path& data_dir);
    void save(const std::filesystem::path& data_dir) const;
};

PhantomSpec phantom_spec_from_file(const std::filesystem::path& path);

// Subcommand entry points. Each throws ConfigError / DataError /
// NumericError; the binary maps those to exit codes 2 / 3 / 4.

/// Writes one VOL4 series per phantom subject, one mask per region, and the
/// cohort index. Returns the number of subjects written.
std::size_t cmd_synth(const std::filesystem::path& spec_file,
                      const std::filesystem::path& out_dir);

/// Splits, windows and fits the training normalizer without training:
/// writes the split manifest, the normalizer statistics and a counts
/// summary to the output directory.
void cmd_prepare(const RunConfig& config);

/// The full protocol: for each run, split, window, normalize, train,
/// evaluate the test subjects, and write per-run artifacts; afterwards
/// writes the runs table and the "mean (std)" aggregate row.
std::vector<EvalReport> cmd_train(const RunConfig& config);

/// Evaluates a checkpoint on the test split of a manifest, soft-voting
/// sample probabilities per subject.
EvalReport cmd_eval(const std::filesystem::path& checkpoint_path,
                    const std::filesystem::path& data_dir,
                    const std::filesystem::path& manifest_path,
                    const std::filesystem::path& out_dir);

struct InterpretOutcome {
    std::vector<double> dice; // per ground-truth region, for each group
    std::size_t groups = 0;
};

/// Group-mean sensitivity maps over the test split, percentile masks, slice
/// exports and a summary table; reports Dice overlap against any cohort
/// ground-truth masks. `per_subject` averages each subject's maps before
/// the group mean instead of pooling all test samples.
InterpretOutcome cmd_interpret(const std::filesystem::path& checkpoint_path,
                               const std::filesystem::path& data_dir,
                               const std::filesystem::path& manifest_path, double percentile,
                               std::size_t axis, const std::filesystem::path& out_dir,
                               bool per_subject = false);

enum class BaselineKind { pca_lr, fisherz_lr };

BaselineKind baseline_kind_from_name(const std::string& name);

/// Same split/evaluate protocol as cmd_train with a flattened-volume
/// PCA+LR or a connectivity Fisher-z+LR pipeline; appends a row to the
/// aggregate table.
std::vector<EvalReport> cmd_baseline(const RunConfig& config, BaselineKind kind);

} // namespace volnet::cli
