#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include "volnet/cli.hpp"

namespace {

using namespace volnet;

// Command-line values layered over the config file.
struct Overrides {
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t window = 0;
    std::size_t stride = 0;
    double percentile = 0.0;
    std::size_t runs = 0;
    bool has_seed = false, has_window = false, has_stride = false;
    bool has_percentile = false, has_runs = false;
};

cli::RunConfig resolve_config(const Overrides& o) {
    cli::RunConfig config = o.config_path.empty()
                                ? cli::RunConfig{}
                                : cli::RunConfig::from_file(o.config_path);
    if (!o.out.empty()) config.out_dir = o.out;
    if (o.has_seed) config.split_seed = o.seed;
    if (o.has_window) config.window_m = o.window;
    if (o.has_stride) config.window_s = o.stride;
    if (o.has_percentile) config.percentile = o.percentile;
    if (o.has_runs) config.n_runs = o.runs;
    config.validate();
    return config;
}

void add_override_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "Run configuration file");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--seed", o.seed, "Base split seed")->each([&](const std::string&) {
        o.has_seed = true;
    });
    cmd->add_option("--window", o.window, "Sliding window size m")
        ->each([&](const std::string&) { o.has_window = true; });
    cmd->add_option("--stride", o.stride, "Sliding window stride s")
        ->each([&](const std::string&) { o.has_stride = true; });
    cmd->add_option("--percentile", o.percentile, "Sensitivity mask percentile")
        ->each([&](const std::string&) { o.has_percentile = true; });
    cmd->add_option("--runs", o.runs, "Number of repeated runs")
        ->each([&](const std::string&) { o.has_runs = true; });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Volumetric CNN pipeline: phantom synthesis, training, evaluation,\n"
                 "sensitivity interpretation and classical baselines"};
    app.require_subcommand(1);

    // synth
    std::string synth_spec, synth_out;
    CLI::App* synth = app.add_subcommand("synth", "Generate a phantom cohort");
    synth->add_option("spec", synth_spec, "Phantom spec file")->required();
    synth->add_option("--out", synth_out, "Cohort output directory")->required();

    // prepare
    Overrides prep_o;
    CLI::App* prepare = app.add_subcommand("prepare", "Split, window and fit the normalizer");
    add_override_flags(prepare, prep_o);

    // train
    Overrides train_o;
    CLI::App* train_cmd = app.add_subcommand("train", "Train CNNs over repeated runs");
    add_override_flags(train_cmd, train_o);

    // eval
    std::string eval_ckpt, eval_data, eval_manifest, eval_out;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a test split");
    eval_cmd->add_option("checkpoint", eval_ckpt)->required();
    eval_cmd->add_option("--data", eval_data, "Cohort directory")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "Split manifest")->required();
    eval_cmd->add_option("--out", eval_out, "Output directory")->required();

    // interpret
    std::string int_ckpt, int_data, int_manifest, int_out;
    double int_percentile = 95.0;
    std::size_t int_axis = 0;
    CLI::App* interpret_cmd =
        app.add_subcommand("interpret", "Group sensitivity maps and masks");
    interpret_cmd->add_option("checkpoint", int_ckpt)->required();
    interpret_cmd->add_option("--data", int_data, "Cohort directory")->required();
    interpret_cmd->add_option("--manifest", int_manifest, "Split manifest")->required();
    interpret_cmd->add_option("--out", int_out, "Output directory")->required();
    interpret_cmd->add_option("--percentile", int_percentile, "Mask percentile");
    interpret_cmd->add_option("--axis", int_axis, "Slice export axis (0, 1 or 2)");
    bool int_per_subject = false;
    interpret_cmd->add_flag("--per-subject", int_per_subject,
                            "Average per subject before the group mean");

    // baseline
    Overrides base_o;
    std::string baseline_kind;
    CLI::App* baseline_cmd = app.add_subcommand("baseline", "Classical comparison pipelines");
    baseline_cmd->add_option("kind", baseline_kind, "pca-lr or fisherz-lr")->required();
    add_override_flags(baseline_cmd, base_o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const std::size_t n = cli::cmd_synth(synth_spec, synth_out);
            std::printf("wrote %zu subjects to %s\n", n, synth_out.c_str());
        } else if (prepare->parsed()) {
            cli::cmd_prepare(resolve_config(prep_o));
        } else if (train_cmd->parsed()) {
            const auto reports = cli::cmd_train(resolve_config(train_o));
            const auto agg = aggregate_runs(reports);
            std::printf("cnn: f1 %s auc %s over %zu runs\n", agg.f1.formatted().c_str(),
                        agg.auc.formatted().c_str(), reports.size());
        } else if (eval_cmd->parsed()) {
            const EvalReport report = cli::cmd_eval(eval_ckpt, eval_data, eval_manifest,
                                                    eval_out);
            std::printf("f1 %.4f auc %.4f\n", report.f1, report.auc);
        } else if (interpret_cmd->parsed()) {
            cli::cmd_interpret(int_ckpt, int_data, int_manifest, int_percentile, int_axis,
                               int_out, int_per_subject);
        } else if (baseline_cmd->parsed()) {
            const auto kind = cli::baseline_kind_from_name(baseline_kind);
            const auto reports = cli::cmd_baseline(resolve_config(base_o), kind);
            const auto agg = aggregate_runs(reports);
            std::printf("%s: f1 %s auc %s over %zu runs\n", baseline_kind.c_str(),
                        agg.f1.formatted().c_str(), agg.auc.formatted().c_str(),
                        reports.size());
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
