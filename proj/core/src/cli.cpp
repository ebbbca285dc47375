#include "volnet/cli.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <sstream>

#include "volnet/connectivity.hpp"
#include "volnet/kvtext.hpp"
#include "volnet/logreg.hpp"
#include "volnet/normalizer.hpp"
#include "volnet/parallel.hpp"
#include "volnet/pca.hpp"
#include "volnet/sensitivity.hpp"
#include "volnet/trainer.hpp"
#include "volnet/vol4_io.hpp"

namespace volnet::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot open '" + path.string() + "' for writing");
    }
    out << text;
    if (!out) {
        throw DataError("write failed for '" + path.string() + "'");
    }
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<double> parse_csv_numbers(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) {
            throw DataError("empty element in " + what);
        }
        out.push_back(parse_double(item.substr(b, e - b + 1), what));
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// RunConfig

std::string RunConfig::to_text() const {
    KvWriter kv;
    // Architecture and trainer keys share the checkpoint's canonical order.
    std::istringstream cnn_text(cnn_config_to_text(cnn));
    std::string line;
    std::string out;
    while (std::getline(cnn_text, line)) out += line + "\n";

    kv.add("data_dir", data_dir.string());
    kv.add("out_dir", out_dir.string());
    kv.add("split_seed", static_cast<std::uint64_t>(split_seed));
    kv.add("window_m", static_cast<std::uint64_t>(window_m));
    kv.add("window_s", static_cast<std::uint64_t>(window_s));
    kv.add("n_runs", static_cast<std::uint64_t>(n_runs));
    kv.add("percentile", percentile);
    kv.add("baseline_l2", baseline_l2);
    kv.add("pca_components", static_cast<std::uint64_t>(pca_components));
    kv.add("parcellation", parcellation.string());
    return out + kv.str();
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& origin,
                               bool reject_unknown) {
    RunConfig c;
    c.cnn = cnn_config_from_text(text, origin, /*reject_unknown=*/false);

    KvReader kv(text, origin);
    // Consume the architecture keys so reject_unknown sees them as known.
    for (const char* key :
         {"input_d", "input_h", "input_w", "conv1_channels", "conv1_kernel", "conv2_channels",
          "conv2_kernel", "pool_window", "lr0", "lr_decay_factor", "lr_decay_every", "momentum",
          "lambda", "batch_size", "max_epochs", "early_stop_patience", "seed", "n_threads"}) {
        if (kv.has(key)) kv.get_string(key);
    }
    c.data_dir = kv.get_string("data_dir", c.data_dir.string());
    c.out_dir = kv.get_string("out_dir", c.out_dir.string());
    c.split_seed = kv.get_u64("split_seed", c.split_seed);
    c.window_m = kv.get_u64("window_m", c.window_m);
    c.window_s = kv.get_u64("window_s", c.window_s);
    c.n_runs = kv.get_u64("n_runs", c.n_runs);
    c.percentile = kv.get_double("percentile", c.percentile);
    c.baseline_l2 = kv.get_double("baseline_l2", c.baseline_l2);
    c.pca_components = kv.get_u64("pca_components", c.pca_components);
    c.parcellation = kv.get_string("parcellation", c.parcellation.string());
    if (reject_unknown) {
        kv.reject_unknown();
    }
    c.validate();
    return c;
}

RunConfig RunConfig::from_file(const fs::path& path) {
    try {
        return from_text(read_text_file(path), path.filename().string());
    } catch (const DataError& e) {
        throw ConfigError(e.what()); // malformed config is a config error
    }
}

void RunConfig::validate() const {
    cnn.validate();
    if (window_m == 0 || window_s == 0) {
        throw ConfigError("window_m and window_s must be positive");
    }
    if (n_runs == 0) {
        throw ConfigError("n_runs must be positive");
    }
    if (!(percentile > 0.0 && percentile < 100.0)) {
        throw ConfigError("percentile must lie in (0, 100)");
    }
    if (baseline_l2 < 0.0) {
        throw ConfigError("baseline_l2 must be non-negative");
    }
    if (pca_components == 0) {
        throw ConfigError("pca_components must be positive");
    }
}

// ---------------------------------------------------------------------------
// Cohort index

static const char* kCohortFile = "cohort.csv";

void CohortIndex::save(const fs::path& data_dir) const {
    std::ostringstream out;
    out << "#seed=" << seed << "\n";
    for (const fs::path& mask : mask_files) {
        out << "#region_mask=" << mask.generic_string() << "\n";
    }
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        out << subjects[i].first << "," << subjects[i].second << ","
            << subject_files[i].generic_string() << "\n";
    }
    write_text_file(data_dir / kCohortFile, out.str());
}

CohortIndex CohortIndex::load(const fs::path& data_dir) {
    const fs::path path = data_dir / kCohortFile;
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open cohort index '" + path.string() + "'");
    }
    CohortIndex index;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("#seed=", 0) == 0) {
                index.seed = parse_u64(line.substr(6), "cohort seed");
            } else if (line.rfind("#region_mask=", 0) == 0) {
                index.mask_files.push_back(data_dir / line.substr(13));
            }
            continue;
        }
        std::istringstream row(line);
        std::string id, label_str, file;
        if (!std::getline(row, id, ',') || !std::getline(row, label_str, ',') ||
            !std::getline(row, file)) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": expected 'subject_id,label,path'");
        }
        const int label = static_cast<int>(parse_u64(label_str, "label"));
        if (label != 0 && label != 1) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": label outside {0,1}");
        }
        index.subjects.emplace_back(id, label);
        index.subject_files.push_back(data_dir / file);
    }
    if (index.subjects.empty()) {
        throw DataError(path.string() + ": cohort index lists no subjects");
    }
    return index;
}

// ---------------------------------------------------------------------------
// Phantom spec file

PhantomSpec phantom_spec_from_file(const fs::path& path) {
    KvReader kv(read_text_file(path), path.filename().string());
    PhantomSpec spec;
    spec.n_young = kv.get_u64("n_young", 0);
    spec.n_old = kv.get_u64("n_old", 0);
    spec.frames = kv.get_u64("frames", 0);
    const auto dims = parse_csv_numbers(kv.get_string("dims", "43,51,40"), "dims");
    if (dims.size() != 3) {
        throw ConfigError("dims must be three comma-separated sizes");
    }
    for (std::size_t i = 0; i < 3; ++i) {
        spec.dims[i] = static_cast<std::size_t>(dims[i]);
    }
    spec.noise_sigma = kv.get_double("noise_sigma", 0.0);
    spec.seed = kv.get_u64("seed", 0);
    for (const std::string& key : kv.keys_with_prefix("region.")) {
        const auto fields = parse_csv_numbers(kv.get_string(key), key);
        if (fields.size() != 6) {
            throw ConfigError(key + " must be 'cz,cy,cx,radius,amp_young,amp_old'");
        }
        spec.regions.push_back(SignalRegion{{fields[0], fields[1], fields[2]},
                                            fields[3],
                                            fields[4],
                                            fields[5]});
    }
    kv.reject_unknown();
    try {
        spec.validate();
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    return spec;
}

std::size_t cmd_synth(const fs::path& spec_file, const fs::path& out_dir) {
    const PhantomSpec spec = phantom_spec_from_file(spec_file);
    const PhantomCohort cohort = generate_phantom_cohort(spec);

    fs::create_directories(out_dir);
    fs::create_directories(out_dir / "masks");

    CohortIndex index;
    index.seed = spec.seed;
    for (const Series4D& subject : cohort.subjects) {
        const fs::path file = fs::path("series") / (subject.subject_id + ".vol4");
        fs::create_directories(out_dir / "series");
        save_series(subject, out_dir / file);
        index.subjects.emplace_back(subject.subject_id, subject.label);
        index.subject_files.push_back(file);
    }
    for (std::size_t r = 0; r < cohort.region_masks.size(); ++r) {
        char name[48];
        std::snprintf(name, sizeof(name), "masks/region_%03zu.vol4", r);
        save_single_volume(cohort.region_masks[r], "region_" + std::to_string(r),
                           out_dir / name);
        index.mask_files.push_back(name);
    }
    index.save(out_dir);
    return cohort.subjects.size();
}

// ---------------------------------------------------------------------------
// Shared data assembly

namespace {

struct SampleSet {
    std::vector<Sample3D> samples;                  // all subjects, window order
    std::vector<std::pair<std::string, int>> subjects; // cohort order
};

SampleSet load_and_window(const CohortIndex& index, std::size_t m, std::size_t s) {
    SampleSet set;
    set.subjects = index.subjects;
    for (std::size_t i = 0; i < index.subjects.size(); ++i) {
        const Series4D series = load_series(index.subject_files[i]);
        if (series.subject_id != index.subjects[i].first) {
            throw DataError("cohort index and file disagree on subject id: '" +
                            index.subjects[i].first + "' vs '" + series.subject_id + "'");
        }
        auto samples = sliding_window_mean(series, m, s);
        for (auto& sample : samples) set.samples.push_back(std::move(sample));
    }
    return set;
}

struct SplitSamples {
    std::vector<Sample3D> train, val, test;
};

SplitSamples split_samples(const SampleSet& set, const SplitManifest& manifest) {
    SplitSamples out;
    for (const Sample3D& sample : set.samples) {
        switch (manifest.split_of(sample.subject_id)) {
            case Split::train: out.train.push_back(sample); break;
            case Split::val: out.val.push_back(sample); break;
            case Split::test: out.test.push_back(sample); break;
        }
    }
    return out;
}

void normalize_in_place(const Normalizer& norm, std::vector<Sample3D>& samples) {
    for (Sample3D& s : samples) s = norm.apply(s);
}

std::string history_csv(const TrainHistory& history) {
    std::string out = "epoch,lr,train_loss,train_accuracy,val_loss,val_auc\n";
    for (const EpochStats& e : history.epochs) {
        out += std::to_string(e.epoch) + "," + fmt17(e.lr) + "," + fmt17(e.train_loss) + "," +
               fmt17(e.train_accuracy) + "," + fmt17(e.val_loss) + "," + fmt17(e.val_auc) +
               "\n";
    }
    out += "# best_epoch = " + std::to_string(history.best_epoch) + "\n";
    out += "# stop_reason = " + history.stop_reason + "\n";
    return out;
}

std::string subjects_csv(const std::vector<SubjectPrediction>& subjects) {
    std::string out = "subject_id,label,probability\n";
    for (const SubjectPrediction& s : subjects) {
        out += s.subject_id + "," + std::to_string(s.label) + "," + fmt17(s.probability) + "\n";
    }
    return out;
}

std::vector<SubjectPrediction> subject_predictions(std::span<const Sample3D> samples,
                                                   const std::vector<double>& probs) {
    std::vector<SamplePrediction> preds;
    preds.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        preds.push_back(SamplePrediction{samples[i].subject_id, samples[i].label, probs[i]});
    }
    return soft_vote(preds);
}

std::string run_dir_name(std::size_t run) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "run_%03zu", run);
    return buf;
}

void write_runs_csv(const fs::path& path, const std::vector<EvalReport>& reports) {
    std::string out = std::string("run,") + EvalReport::csv_header() + "\n";
    for (std::size_t r = 0; r < reports.size(); ++r) {
        out += std::to_string(r) + "," + reports[r].csv_row() + "\n";
    }
    write_text_file(path, out);
}

// Aggregate table: one row per model, "mean (std)" cells. Rewritten on
// every update so reruns are byte-identical; an existing row for the same
// model is replaced in place.
void update_aggregate(const fs::path& out_dir, const std::string& model,
                      const std::vector<EvalReport>& reports) {
    const RunAggregate agg = aggregate_runs(reports);
    const std::string row = model + "," + agg.f1.formatted() + "," + agg.auc.formatted();

    std::vector<std::string> rows;
    const fs::path path = out_dir / "aggregate.csv";
    if (fs::exists(path)) {
        std::istringstream in(read_text_file(path));
        std::string line;
        std::getline(in, line); // header
        while (std::getline(in, line)) {
            if (!line.empty()) rows.push_back(line);
        }
    }
    bool replaced = false;
    for (std::string& existing : rows) {
        if (existing.rfind(model + ",", 0) == 0) {
            existing = row;
            replaced = true;
        }
    }
    if (!replaced) rows.push_back(row);

    std::string out = "model,f1,auc\n";
    for (const std::string& r : rows) out += r + "\n";
    write_text_file(path, out);
}

} // namespace

// ---------------------------------------------------------------------------
// prepare

void cmd_prepare(const RunConfig& config) {
    config.validate();
    const CohortIndex index = CohortIndex::load(config.data_dir);
    fs::create_directories(config.out_dir);

    const SplitManifest manifest =
        stratified_subject_split(index.subjects, {0.8, 0.1, 0.1}, config.split_seed);
    save_manifest(manifest, index.subjects, config.out_dir / "split.csv");

    const SampleSet set = load_and_window(index, config.window_m, config.window_s);
    SplitSamples splits = split_samples(set, manifest);
    const Normalizer norm = fit_normalizer(splits.train);
    save_single_volume(norm.mean_image, "train_mean", config.out_dir / "mean_image.vol4");

    KvWriter kv;
    kv.add("subjects", static_cast<std::uint64_t>(index.subjects.size()));
    kv.add("train_samples", static_cast<std::uint64_t>(splits.train.size()));
    kv.add("val_samples", static_cast<std::uint64_t>(splits.val.size()));
    kv.add("test_samples", static_cast<std::uint64_t>(splits.test.size()));
    kv.add("window_m", static_cast<std::uint64_t>(config.window_m));
    kv.add("window_s", static_cast<std::uint64_t>(config.window_s));
    kv.add("max_abs", norm.max_abs);
    write_text_file(config.out_dir / "prepare.txt", kv.str());
}

// ---------------------------------------------------------------------------
// train

std::vector<EvalReport> cmd_train(const RunConfig& config) {
    config.validate();
    const CohortIndex index = CohortIndex::load(config.data_dir);
    fs::create_directories(config.out_dir);
    const SampleSet set = load_and_window(index, config.window_m, config.window_s);

    std::vector<EvalReport> reports;
    for (std::size_t run = 0; run < config.n_runs; ++run) {
        RunConfig run_config = config;
        run_config.split_seed = config.split_seed + run;
        run_config.cnn.seed = config.cnn.seed + run;
        run_config.n_runs = 1;

        const fs::path run_dir = config.out_dir / run_dir_name(run);
        fs::create_directories(run_dir);

        const SplitManifest manifest =
            stratified_subject_split(index.subjects, {0.8, 0.1, 0.1}, run_config.split_seed);
        save_manifest(manifest, index.subjects, run_dir / "split.csv");

        SplitSamples splits = split_samples(set, manifest);
        if (splits.test.empty()) {
            throw DataError("test split is empty");
        }
        const Normalizer norm = fit_normalizer(splits.train);
        normalize_in_place(norm, splits.train);
        normalize_in_place(norm, splits.val);
        normalize_in_place(norm, splits.test);

        TrainResult result = train(run_config.cnn, splits.train, splits.val);
        write_text_file(run_dir / "history.csv", history_csv(result.history));

        const std::vector<double> probs =
            predict_batch(run_config.cnn, result.best_params, splits.test);
        const auto subjects = subject_predictions(splits.test, probs);
        const EvalReport report = evaluate_subjects(subjects);
        write_text_file(run_dir / "report.txt", report.to_kv_text());
        write_text_file(run_dir / "subjects.csv", subjects_csv(subjects));

        Checkpoint checkpoint;
        checkpoint.config = run_config.cnn;
        checkpoint.config_text = run_config.to_text();
        checkpoint.normalizer = norm;
        checkpoint.params = std::move(result.best_params);
        save_checkpoint(checkpoint, run_dir / "checkpoint.vckp");

        reports.push_back(report);
    }

    write_runs_csv(config.out_dir / "runs.csv", reports);
    update_aggregate(config.out_dir, "cnn", reports);
    return reports;
}

// ---------------------------------------------------------------------------
// eval

namespace {

struct LoadedCheckpoint {
    Checkpoint checkpoint;
    RunConfig run_config;
};

LoadedCheckpoint load_run_checkpoint(const fs::path& path) {
    LoadedCheckpoint lc{load_checkpoint(path), {}};
    lc.run_config = RunConfig::from_text(lc.checkpoint.config_text, path.filename().string(),
                                         /*reject_unknown=*/false);
    return lc;
}

std::vector<Sample3D> test_samples_for(const CohortIndex& index, const SplitManifest& manifest,
                                       const RunConfig& run_config,
                                       const Normalizer& norm) {
    std::vector<Sample3D> test;
    for (std::size_t i = 0; i < index.subjects.size(); ++i) {
        if (manifest.split_of(index.subjects[i].first) != Split::test) continue;
        const Series4D series = load_series(index.subject_files[i]);
        for (Sample3D& sample :
             sliding_window_mean(series, run_config.window_m, run_config.window_s)) {
            test.push_back(norm.apply(sample));
        }
    }
    if (test.empty()) {
        throw DataError("test split is empty");
    }
    return test;
}

} // namespace

EvalReport cmd_eval(const fs::path& checkpoint_path, const fs::path& data_dir,
                    const fs::path& manifest_path, const fs::path& out_dir) {
    LoadedCheckpoint lc = load_run_checkpoint(checkpoint_path);
    const CohortIndex index = CohortIndex::load(data_dir);
    const SplitManifest manifest = load_manifest(manifest_path);

    const std::vector<Sample3D> test =
        test_samples_for(index, manifest, lc.run_config, lc.checkpoint.normalizer);

    const std::vector<double> probs =
        predict_batch(lc.checkpoint.config, lc.checkpoint.params, test);
    const auto subjects = subject_predictions(test, probs);
    const EvalReport report = evaluate_subjects(subjects);

    fs::create_directories(out_dir);
    write_text_file(out_dir / "report.txt", report.to_kv_text());
    write_text_file(out_dir / "subjects.csv", subjects_csv(subjects));
    return report;
}

// ---------------------------------------------------------------------------
// interpret

InterpretOutcome cmd_interpret(const fs::path& checkpoint_path, const fs::path& data_dir,
                               const fs::path& manifest_path, double percentile,
                               std::size_t axis, const fs::path& out_dir, bool per_subject) {
    if (!(percentile > 0.0 && percentile < 100.0)) {
        throw ConfigError("percentile must lie in (0, 100)");
    }
    LoadedCheckpoint lc = load_run_checkpoint(checkpoint_path);
    const CohortIndex index = CohortIndex::load(data_dir);
    const SplitManifest manifest = load_manifest(manifest_path);

    const std::vector<Sample3D> test =
        test_samples_for(index, manifest, lc.run_config, lc.checkpoint.normalizer);

    std::array<std::vector<const Sample3D*>, 2> by_group;
    for (const Sample3D& s : test) {
        by_group[static_cast<std::size_t>(s.label)].push_back(&s);
    }
    for (int g = 0; g < 2; ++g) {
        if (by_group[static_cast<std::size_t>(g)].empty()) {
            throw DataError("group " + std::to_string(g) + " absent from the test split");
        }
    }

    fs::create_directories(out_dir);
    fs::create_directories(out_dir / "slices");

    std::vector<Volume> truth_masks;
    for (const fs::path& mask_file : index.mask_files) {
        truth_masks.push_back(load_single_volume(mask_file));
    }

    InterpretOutcome outcome;
    outcome.groups = 2;
    std::string summary = "group,n_samples,threshold_percentile,threshold_value,mask_voxels,"
                          "peak_z,peak_y,peak_x,peak_value";
    for (std::size_t r = 0; r < truth_masks.size(); ++r) {
        summary += ",dice_region_" + std::to_string(r);
    }
    summary += "\n";

    for (int g = 0; g < 2; ++g) {
        const auto& members = by_group[static_cast<std::size_t>(g)];
        std::vector<SensitivityMap> maps(members.size());
        parallel_for(members.size(), lc.checkpoint.config.n_threads, [&](std::size_t i) {
            maps[i] = sensitivity_map(lc.checkpoint.config, lc.checkpoint.params, *members[i],
                                      g);
        });

        GroupSensitivity gs = per_subject ? aggregate_group_per_subject(maps, g)
                                          : aggregate_group(maps, g);
        const Volume mask = threshold_regions(gs, percentile);

        const std::string tag = "group" + std::to_string(g);
        save_single_volume(gs.mean_map, tag + "_mean", out_dir / (tag + "_mean.vol4"));
        save_single_volume(mask, tag + "_mask", out_dir / (tag + "_mask.vol4"));
        export_slices(gs.mean_map, axis, out_dir / "slices" / (tag + "_mean"), &mask);

        std::size_t mask_voxels = 0;
        std::size_t peak = 0;
        for (std::size_t v = 0; v < mask.size(); ++v) {
            mask_voxels += mask[v] != 0.0;
            if (gs.mean_map[v] > gs.mean_map[peak]) peak = v;
        }
        const std::size_t dy = gs.mean_map.dim(1), dx = gs.mean_map.dim(2);
        summary += std::to_string(g) + "," + std::to_string(gs.n_samples) + "," +
                   fmt17(percentile) + "," + fmt17(gs.threshold_value) + "," +
                   std::to_string(mask_voxels) + "," + std::to_string(peak / (dy * dx)) + "," +
                   std::to_string(peak / dx % dy) + "," + std::to_string(peak % dx) + "," +
                   fmt17(gs.mean_map[peak]);
        for (const Volume& truth : truth_masks) {
            const double dice = dice_score(mask, truth);
            outcome.dice.push_back(dice);
            summary += "," + fmt17(dice);
        }
        summary += "\n";
    }
    write_text_file(out_dir / "summary.csv", summary);
    return outcome;
}

// ---------------------------------------------------------------------------
// baselines

BaselineKind baseline_kind_from_name(const std::string& name) {
    if (name == "pca-lr") return BaselineKind::pca_lr;
    if (name == "fisherz-lr") return BaselineKind::fisherz_lr;
    throw ConfigError("unknown baseline kind '" + name + "' (expected pca-lr or fisherz-lr)");
}

namespace {

Volume flatten_samples(std::span<const Sample3D> samples) {
    if (samples.empty()) {
        throw DataError("cannot flatten an empty sample list");
    }
    const std::size_t d = samples.front().voxels.size();
    Volume matrix({samples.size(), d});
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].voxels.size() != d) {
            throw ShapeError("sample volumes differ in size");
        }
        std::copy(samples[i].voxels.values().begin(), samples[i].voxels.values().end(),
                  matrix.data() + i * d);
    }
    return matrix;
}

std::vector<int> labels_of(std::span<const Sample3D> samples) {
    std::vector<int> labels(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) labels[i] = samples[i].label;
    return labels;
}

std::string features_csv(const Volume& features, std::span<const Sample3D> samples) {
    std::string out = "subject_id,label,features...\n";
    const std::size_t d = features.dim(1);
    for (std::size_t i = 0; i < features.dim(0); ++i) {
        out += samples[i].subject_id + "," + std::to_string(samples[i].label);
        for (std::size_t j = 0; j < d; ++j) {
            out += "," + fmt17(features[i * d + j]);
        }
        out += "\n";
    }
    return out;
}

std::string connectivity_csv(const ConnectivityMatrix& cm) {
    const std::size_t r = cm.z.dim(0);
    std::string out;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            out += (j ? "," : "") + fmt17(cm.z[i * r + j]);
        }
        out += "\n";
    }
    return out;
}

// Binary container shared by both baseline pipelines.
constexpr std::array<char, 4> kBaselineMagic = {'V', 'B', 'L', 'M'};

template <typename T>
void write_le(std::ostream& out, T value) {
    char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    }
    out.write(bytes, sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::string& origin) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
        throw DataError(origin + ": truncated baseline model");
    }
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(bytes[i]) << (8 * i);
    }
    return value;
}

void write_f64_vec(std::ostream& out, std::span<const double> values) {
    write_le<std::uint64_t>(out, values.size());
    for (double v : values) write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

std::vector<double> read_f64_vec(std::istream& in, const std::string& origin) {
    const auto n = read_le<std::uint64_t>(in, origin);
    std::vector<double> out(n);
    for (auto& v : out) v = std::bit_cast<double>(read_le<std::uint64_t>(in, origin));
    return out;
}

struct PcaLrModel {
    ColumnMap columns;
    PcaModel pca;
    LogRegModel logreg;
};

void save_pca_lr(const PcaLrModel& model, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out.write(kBaselineMagic.data(), kBaselineMagic.size());
    write_le<std::uint16_t>(out, 1);
    write_le<std::uint8_t>(out, 0); // kind: pca-lr
    write_le<std::uint64_t>(out, model.columns.original_dim);
    write_le<std::uint64_t>(out, model.columns.kept.size());
    for (std::size_t idx : model.columns.kept) write_le<std::uint64_t>(out, idx);
    write_f64_vec(out, model.pca.mean);
    write_le<std::uint64_t>(out, model.pca.components.dim(0));
    write_le<std::uint64_t>(out, model.pca.components.dim(1));
    write_f64_vec(out, model.pca.components.values());
    write_f64_vec(out, model.pca.explained_variance);
    write_f64_vec(out, model.logreg.weights);
    write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(model.logreg.bias));
    write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(model.logreg.l2));
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

PcaLrModel load_pca_lr(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    const std::string origin = path.filename().string();
    std::array<char, 4> magic;
    if (!in.read(magic.data(), magic.size()) || magic != kBaselineMagic) {
        throw DataError(origin + ": bad magic, not a baseline model");
    }
    if (read_le<std::uint16_t>(in, origin) != 1) {
        throw DataError(origin + ": unsupported baseline model version");
    }
    if (read_le<std::uint8_t>(in, origin) != 0) {
        throw DataError(origin + ": not a pca-lr model");
    }
    PcaLrModel model;
    model.columns.original_dim = read_le<std::uint64_t>(in, origin);
    const auto kept = read_le<std::uint64_t>(in, origin);
    model.columns.kept.resize(kept);
    for (auto& idx : model.columns.kept) idx = read_le<std::uint64_t>(in, origin);
    model.pca.mean = read_f64_vec(in, origin);
    const auto k = read_le<std::uint64_t>(in, origin);
    const auto d = read_le<std::uint64_t>(in, origin);
    model.pca.components = Volume({k, d}, read_f64_vec(in, origin));
    model.pca.explained_variance = read_f64_vec(in, origin);
    model.logreg.weights = read_f64_vec(in, origin);
    model.logreg.bias = std::bit_cast<double>(read_le<std::uint64_t>(in, origin));
    model.logreg.l2 = std::bit_cast<double>(read_le<std::uint64_t>(in, origin));
    return model;
}

std::vector<EvalReport> run_baseline_protocol(
    const RunConfig& config, const std::string& model_name, const CohortIndex& index,
    const std::function<std::vector<SubjectPrediction>(const SplitManifest&,
                                                       const fs::path&)>& run_fn) {
    const fs::path base_dir = config.out_dir / ("baseline_" + model_name);
    fs::create_directories(base_dir);

    std::vector<EvalReport> reports;
    for (std::size_t run = 0; run < config.n_runs; ++run) {
        const fs::path run_dir = base_dir / run_dir_name(run);
        fs::create_directories(run_dir);
        const SplitManifest manifest = stratified_subject_split(
            index.subjects, {0.8, 0.1, 0.1}, config.split_seed + run);
        save_manifest(manifest, index.subjects, run_dir / "split.csv");

        const auto subjects = run_fn(manifest, run_dir);
        const EvalReport report = evaluate_subjects(subjects);
        write_text_file(run_dir / "report.txt", report.to_kv_text());
        write_text_file(run_dir / "subjects.csv", subjects_csv(subjects));
        reports.push_back(report);
    }
    write_runs_csv(base_dir / "runs.csv", reports);
    update_aggregate(config.out_dir, model_name, reports);
    return reports;
}

} // namespace

std::vector<EvalReport> cmd_baseline(const RunConfig& config, BaselineKind kind) {
    config.validate();
    const CohortIndex index = CohortIndex::load(config.data_dir);
    fs::create_directories(config.out_dir);

    if (kind == BaselineKind::pca_lr) {
        const SampleSet set = load_and_window(index, config.window_m, config.window_s);
        return run_baseline_protocol(
            config, "pca-lr", index,
            [&](const SplitManifest& manifest, const fs::path& run_dir) {
                SplitSamples splits = split_samples(set, manifest);
                if (splits.test.empty()) throw DataError("test split is empty");

                PcaLrModel model;
                const Volume train_matrix = flatten_samples(splits.train);
                model.columns = fit_zero_column_removal(train_matrix);
                const Volume train_reduced = remove_zero_columns(train_matrix, model.columns);
                const std::size_t k =
                    std::min(config.pca_components,
                             std::min(train_reduced.dim(0) - 1, train_reduced.dim(1)));
                model.pca = pca_fit(train_reduced, k);
                const Volume train_features = pca_transform(model.pca, train_reduced);
                model.logreg =
                    logreg_train(train_features, labels_of(splits.train), config.baseline_l2);

                const Volume test_features = pca_transform(
                    model.pca,
                    remove_zero_columns(flatten_samples(splits.test), model.columns));
                const std::vector<double> probs = logreg_predict(model.logreg, test_features);

                save_pca_lr(model, run_dir / "model.vblm");
                write_text_file(run_dir / "features_test.csv",
                                features_csv(test_features, splits.test));

                std::vector<SamplePrediction> preds;
                for (std::size_t i = 0; i < splits.test.size(); ++i) {
                    preds.push_back(SamplePrediction{splits.test[i].subject_id,
                                                     splits.test[i].label, probs[i]});
                }
                return soft_vote(preds);
            });
    }

    // fisherz-lr: one connectivity feature vector per subject.
    if (config.parcellation.empty()) {
        throw ConfigError("fisherz-lr requires a parcellation file");
    }
    Parcellation parc;
    parc.labels = load_single_volume(config.parcellation);
    double max_label = 0.0;
    for (double v : parc.labels.values()) max_label = std::max(max_label, v);
    parc.region_count = static_cast<std::size_t>(max_label);
    parc.validate();

    const fs::path conn_dir = config.out_dir / "baseline_fisherz-lr" / "connectivity";
    fs::create_directories(conn_dir);

    std::vector<std::vector<double>> features(index.subjects.size());
    for (std::size_t i = 0; i < index.subjects.size(); ++i) {
        const Series4D series = load_series(index.subject_files[i]);
        const ConnectivityMatrix cm = fisher_z(region_time_series(series, parc));
        features[i] = cm.upper_triangle();
        write_text_file(conn_dir / (index.subjects[i].first + ".csv"), connectivity_csv(cm));
    }
    const std::size_t feat_dim = features.front().size();

    return run_baseline_protocol(
        config, "fisherz-lr", index,
        [&](const SplitManifest& manifest, const fs::path& run_dir) {
            std::vector<std::size_t> train_rows, test_rows;
            for (std::size_t i = 0; i < index.subjects.size(); ++i) {
                switch (manifest.split_of(index.subjects[i].first)) {
                    case Split::train: train_rows.push_back(i); break;
                    case Split::test: test_rows.push_back(i); break;
                    case Split::val: break;
                }
            }
            if (test_rows.empty()) throw DataError("test split is empty");

            auto gather = [&](const std::vector<std::size_t>& rows) {
                Volume matrix({rows.size(), feat_dim});
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    std::copy(features[rows[i]].begin(), features[rows[i]].end(),
                              matrix.data() + i * feat_dim);
                }
                return matrix;
            };
            std::vector<int> train_labels, test_labels;
            for (std::size_t i : train_rows) train_labels.push_back(index.subjects[i].second);
            for (std::size_t i : test_rows) test_labels.push_back(index.subjects[i].second);

            const LogRegModel logreg =
                logreg_train(gather(train_rows), train_labels, config.baseline_l2);
            const std::vector<double> probs = logreg_predict(logreg, gather(test_rows));

            std::vector<SamplePrediction> preds;
            for (std::size_t i = 0; i < test_rows.size(); ++i) {
                preds.push_back(SamplePrediction{index.subjects[test_rows[i]].first,
                                                 test_labels[i], probs[i]});
            }
            return soft_vote(preds);
        });
}

} // namespace volnet::cli
