#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmtn/data.hpp"
#include "cmtn/metrics.hpp"
#include "cmtn/synthbench.hpp"
#include "cmtn/trainer.hpp"

namespace cmtn {

// Per-sensor affine normalization fitted on training readings (source and
// target pooled, so the inter-domain shift survives in shape but the inputs
// stay in the recurrent layers' useful range).
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stdev; // floored away from zero
    double label_mean = 0.0;   // regression targets are trained in z-space
    double label_stdev = 1.0;  // identity unless fit_labels ran

    static Standardizer fit(const std::vector<const DomainDataset*>& sets);
    void fit_labels(const DomainDataset& labelled); // source train, regression
    DomainDataset apply(const DomainDataset& ds) const; // readings only
    DomainDataset apply_labels(const DomainDataset& ds) const;
    double invert_label(double z) const { return z * label_stdev + label_mean; }
    std::string serialize() const; // kv lines, for config echoes
};

// Time-ordered split: first floor(fraction * n) samples train, rest test.
std::pair<DomainDataset, DomainDataset> split_time(const DomainDataset& ds, double fraction);

struct ExperimentEntry {
    std::string name;
    std::string suite;       // VALUE_SHIFT/...; empty when dataset paths are used
    std::string source_train, source_test; // CSV paths, used when suite is empty
    std::string target_train, target_test;
    std::vector<std::uint64_t> seeds; // distinct run seeds
    std::uint64_t data_seed = 1;
    int samples = 1500; // per domain, before the split
    TrainingConfig config; // variant/task/widths/optimizer knobs
};

struct ExperimentPlan {
    std::vector<ExperimentEntry> entries;
};

// Sectioned text: every `[entry]` opens an entry; inside, entry keys
// (name, suite, source_train, ..., seeds, data_seed, samples) plus any
// training-config keys. Unknown keys are rejected.
ExperimentPlan parse_plan(const std::string& text);

struct RunRecord {
    std::uint64_t seed = 0;
    double train_seconds = 0.0;
    double final_label_loss = 0.0;
    double final_domain_loss = 0.0;
    MetricReport source_test;
    MetricReport target_test;
    std::vector<double> mean_gamma; // per window position, target test
    std::vector<double> mean_alpha; // per feature column, target test
    CmtnParams params;              // trained parameters (not serialized in results)
    std::string standardizer_text;  // echo for checkpointing
};

struct EntryResult {
    ExperimentEntry entry;
    std::vector<RunRecord> runs;
};

// Prepare data (generate or load, split, balance, standardize) and train
// once per seed, evaluating both test splits.
EntryResult run_entry(const ExperimentEntry& entry);

MetricReport evaluate(const CmtnParams& params, const ModelConfig& cfg, const DomainDataset& test);

double median(std::vector<double> v); // empty input is an UsageError

// One results file per entry (text, atomic). Checkpoints are written
// separately by the caller.
void write_entry_result(const std::string& path, const EntryResult& result);
EntryResult read_entry_result(const std::string& path); // entry.config partially echoed

// Generator-config file for `generate`: flat kv
// (suite, sensors, window, samples, task, seed, train_fraction).
struct GenerateSpec {
    std::string suite = "VALUE_SHIFT";
    int sensors = 4;
    int window = 6;
    int samples = 1500;
    Task task = Task::Regression;
    std::uint64_t seed = 1;
    double train_fraction = 0.8;
};
GenerateSpec parse_generate_spec(const std::string& text);

// Writes source/target train/test CSVs plus manifest.txt; byte-identical on
// regeneration with the same spec.
void cmd_generate(const GenerateSpec& spec, const std::string& out_dir);

// Runs a plan, writing <name>.result and <name>.seed<seed>.ckpt per entry.
// Returns the number of aborted entries (0 means full success).
int cmd_train(const ExperimentPlan& plan, const std::string& out_dir);

// Reads every *.result under results_dir and writes table.txt, table.csv,
// and seq_auc.csv (when some variant/suite group sweeps window lengths).
void cmd_report(const std::string& results_dir, const std::string& out_dir);

// Raw CSV -> windowed dataset files. Schema file keys: timestamp, sensors,
// delta, label, domain, window, train_fraction.
struct IngestSchema {
    std::string timestamp_column;
    std::vector<std::string> sensor_columns;
    std::vector<std::string> delta_columns; // subset of sensor_columns
    std::string label_column;
    DomainTag domain = DomainTag::Source;
    int window = 6;
    double train_fraction = 0.8;
};
IngestSchema parse_ingest_schema(const std::string& text);
void cmd_ingest(const std::string& csv_path, const IngestSchema& schema,
                const std::string& out_prefix);

} // namespace cmtn
