// Batch driver: generate/ingest datasets, execute experiment plans, render
// reports. Every verb is deterministic given its inputs and seeds.
#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "cmtn/errors.hpp"
#include "cmtn/experiment.hpp"
#include "cmtn/textio.hpp"

namespace {

// Lift the capacity/optimizer knobs from a profile while keeping what the
// plan chose (variant, task, epochs, window, seeds).
void apply_profile(cmtn::TrainingConfig& cfg, const cmtn::TrainingConfig& profile) {
    cfg.batch_size = profile.batch_size;
    cfg.learning_rate = profile.learning_rate;
    cfg.lambda = profile.lambda;
    cfg.dropout_rate = profile.dropout_rate;
    cfg.features = profile.features;
    cfg.hidden = profile.hidden;
    cfg.attn_width = profile.attn_width;
    cfg.mlp_width = profile.mlp_width;
    cfg.desk_scale = profile.desk_scale;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"causal-mechanism transfer experiments on multivariate time series"};
    app.require_subcommand(1);

    std::string config_path, plan_path, out_path, raw_csv;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool desk = false, paper = false;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "override the configured seed")
            ->each([&](const std::string&) { seed_set = true; });
    };

    CLI::App* generate = app.add_subcommand("generate", "write a shifted source/target dataset pair");
    generate->add_option("--config", config_path, "generator spec file")->required();
    generate->add_option("--out", out_path, "output directory")->required();
    add_seed(generate);

    CLI::App* train = app.add_subcommand("train", "run every entry of an experiment plan");
    train->add_option("--plan", plan_path, "experiment plan file")->required();
    train->add_option("--out", out_path, "results directory")->required();
    add_seed(train);
    train->add_flag("--desk-scale", desk, "force the small CPU-budget profile on all entries");
    train->add_flag("--paper-scale", paper, "force the full-size profile on all entries");

    CLI::App* report = app.add_subcommand("report", "summarize results into comparison tables");
    report->add_option("results_dir", config_path, "directory of .result files")->required();
    report->add_option("--out", out_path, "report output directory")->required();

    CLI::App* ingest = app.add_subcommand("ingest", "window a raw CSV into dataset files");
    ingest->add_option("csv", raw_csv, "raw readings CSV")->required();
    ingest->add_option("--config", config_path, "ingest schema file")->required();
    ingest->add_option("--out", out_path, "output file prefix")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) {
            cmtn::GenerateSpec spec = cmtn::parse_generate_spec(cmtn::read_text_file(config_path));
            if (seed_set) spec.seed = seed;
            cmtn::cmd_generate(spec, out_path);
            std::printf("wrote 4 dataset files + manifest under %s\n", out_path.c_str());
        } else if (train->parsed()) {
            if (desk && paper)
                throw cmtn::UsageError("--desk-scale and --paper-scale are mutually exclusive");
            cmtn::ExperimentPlan plan = cmtn::parse_plan(cmtn::read_text_file(plan_path));
            for (cmtn::ExperimentEntry& entry : plan.entries) {
                const cmtn::Variant v = entry.config.variant;
                const cmtn::Task t = entry.config.task;
                if (desk) apply_profile(entry.config, cmtn::TrainingConfig::desk_profile(v, t));
                if (paper) apply_profile(entry.config, cmtn::TrainingConfig::paper_profile(v, t));
                if (seed_set) entry.data_seed = seed;
            }
            const int aborted = cmtn::cmd_train(plan, out_path);
            std::printf("%zu entries, %d aborted; results under %s\n", plan.entries.size(),
                        aborted, out_path.c_str());
            return aborted > 0 ? 1 : 0;
        } else if (report->parsed()) {
            cmtn::cmd_report(config_path, out_path);
            std::printf("report written under %s\n", out_path.c_str());
        } else if (ingest->parsed()) {
            cmtn::IngestSchema schema = cmtn::parse_ingest_schema(cmtn::read_text_file(config_path));
            cmtn::cmd_ingest(raw_csv, schema, out_path);
            std::printf("wrote %s_train.csv and %s_test.csv\n", out_path.c_str(), out_path.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
