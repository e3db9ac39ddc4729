#include "cmtn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "cmtn/checkpoint.hpp"
#include "cmtn/errors.hpp"
#include "cmtn/rng.hpp"
#include "cmtn/textio.hpp"

namespace cmtn {

Standardizer Standardizer::fit(const std::vector<const DomainDataset*>& sets) {
    if (sets.empty()) throw UsageError("standardizer needs at least one dataset");
    const int sensors = sets.front()->sensors();
    std::vector<double> sum(static_cast<std::size_t>(sensors), 0.0);
    std::vector<double> sq(static_cast<std::size_t>(sensors), 0.0);
    double n = 0.0;
    for (const DomainDataset* ds : sets) {
        if (ds->sensors() != sensors)
            throw UsageError("standardizer inputs disagree on the sensor count");
        for (const TimeSeriesSample& s : ds->samples)
            for (int t = 0; t < ds->window(); ++t)
                for (int k = 0; k < sensors; ++k) {
                    sum[static_cast<std::size_t>(k)] += s.x.at(t, k);
                    sq[static_cast<std::size_t>(k)] += s.x.at(t, k) * s.x.at(t, k);
                }
        n += static_cast<double>(ds->samples.size() * static_cast<std::size_t>(ds->window()));
    }
    if (n == 0.0) throw UsageError("standardizer needs at least one sample");
    Standardizer out;
    out.mean.resize(static_cast<std::size_t>(sensors));
    out.stdev.resize(static_cast<std::size_t>(sensors));
    for (int k = 0; k < sensors; ++k) {
        const std::size_t i = static_cast<std::size_t>(k);
        out.mean[i] = sum[i] / n;
        const double var = std::max(0.0, sq[i] / n - out.mean[i] * out.mean[i]);
        out.stdev[i] = std::max(std::sqrt(var), 1e-9);
    }
    return out;
}

DomainDataset Standardizer::apply(const DomainDataset& ds) const {
    if (ds.sensors() != static_cast<int>(mean.size()))
        throw UsageError("standardizer was fitted on a different sensor count");
    DomainDataset out;
    out.domain = ds.domain;
    out.samples.reserve(ds.samples.size());
    for (const TimeSeriesSample& s : ds.samples) {
        std::vector<double> vals(s.x.values());
        const int sensors = ds.sensors();
        for (int t = 0; t < ds.window(); ++t)
            for (int k = 0; k < sensors; ++k) {
                double& v = vals[static_cast<std::size_t>(t * sensors + k)];
                v = (v - mean[static_cast<std::size_t>(k)]) / stdev[static_cast<std::size_t>(k)];
            }
        TimeSeriesSample copy = s;
        copy.x = Tensor(s.x.shape(), std::move(vals));
        out.samples.push_back(std::move(copy));
    }
    return out;
}

void Standardizer::fit_labels(const DomainDataset& labelled) {
    if (labelled.samples.empty()) throw UsageError("label scaling needs at least one sample");
    double sum = 0.0, sq = 0.0;
    for (const TimeSeriesSample& s : labelled.samples) {
        sum += s.label;
        sq += s.label * s.label;
    }
    const double n = static_cast<double>(labelled.samples.size());
    label_mean = sum / n;
    label_stdev = std::max(std::sqrt(std::max(0.0, sq / n - label_mean * label_mean)), 1e-9);
}

DomainDataset Standardizer::apply_labels(const DomainDataset& ds) const {
    DomainDataset out = ds;
    for (TimeSeriesSample& s : out.samples) s.label = (s.label - label_mean) / label_stdev;
    return out;
}

std::string Standardizer::serialize() const {
    std::ostringstream out;
    out << "standardize_mean =";
    for (double m : mean) out << ' ' << format_double(m);
    out << "\nstandardize_stdev =";
    for (double s : stdev) out << ' ' << format_double(s);
    out << "\nlabel_mean = " << format_double(label_mean);
    out << "\nlabel_stdev = " << format_double(label_stdev) << '\n';
    return out.str();
}

std::pair<DomainDataset, DomainDataset> split_time(const DomainDataset& ds, double fraction) {
    if (fraction <= 0.0 || fraction >= 1.0)
        throw ConfigError("train fraction must lie strictly between 0 and 1");
    const std::size_t boundary =
        static_cast<std::size_t>(std::floor(fraction * static_cast<double>(ds.samples.size())));
    DomainDataset train, test;
    train.domain = test.domain = ds.domain;
    train.samples.assign(ds.samples.begin(), ds.samples.begin() + static_cast<std::ptrdiff_t>(boundary));
    test.samples.assign(ds.samples.begin() + static_cast<std::ptrdiff_t>(boundary), ds.samples.end());
    return {std::move(train), std::move(test)};
}

namespace {

std::vector<std::string> clean_lines(const std::string& text) {
    std::vector<std::string> out;
    for (const std::string& raw : split(text, '\n')) {
        std::string line = raw;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        out.push_back(trim(line));
    }
    return out;
}

std::pair<std::string, std::string> key_value(const std::string& line) {
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
        throw ConfigError("expected 'key = value', got '" + line + "'");
    return {trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
}

std::vector<std::string> word_list(const std::string& value) {
    std::vector<std::string> out;
    for (const std::string& w : split(value, ' '))
        if (!trim(w).empty()) out.push_back(trim(w));
    return out;
}

const std::set<std::string> kSuiteNames = {"VALUE_SHIFT", "LAG_SHIFT", "MIX_SHIFT", "ALL_SHIFT"};

void finish_entry(ExperimentEntry& entry, std::string& config_blob,
                  std::vector<ExperimentEntry>& done) {
    if (entry.name.empty()) throw ConfigError("plan entry is missing a name");
    for (const ExperimentEntry& e : done)
        if (e.name == entry.name) throw ConfigError("duplicate plan entry name '" + entry.name + "'");
    if (entry.seeds.empty())
        throw ConfigError("plan entry '" + entry.name + "' needs a seeds list");
    std::set<std::uint64_t> unique(entry.seeds.begin(), entry.seeds.end());
    if (unique.size() != entry.seeds.size())
        throw ConfigError("plan entry '" + entry.name + "' repeats a seed");
    const bool has_paths = !entry.source_train.empty() || !entry.source_test.empty() ||
                           !entry.target_train.empty() || !entry.target_test.empty();
    if (entry.suite.empty() == !has_paths)
        throw ConfigError("plan entry '" + entry.name +
                          "' must set either a suite or the four dataset paths");
    if (!entry.suite.empty() && kSuiteNames.count(entry.suite) == 0)
        throw ConfigError("plan entry '" + entry.name + "' names unknown suite '" + entry.suite + "'");
    if (has_paths && (entry.source_train.empty() || entry.source_test.empty() ||
                      entry.target_train.empty() || entry.target_test.empty()))
        throw ConfigError("plan entry '" + entry.name + "' must give all four dataset paths");
    if (entry.samples < 10)
        throw ConfigError("plan entry '" + entry.name + "' needs at least 10 samples per domain");
    try {
        entry.config = parse_training_config(config_blob);
    } catch (const std::exception& e) {
        throw ConfigError("plan entry '" + entry.name + "': " + e.what());
    }
    config_blob.clear();
    done.push_back(entry);
    entry = ExperimentEntry{};
}

} // namespace

ExperimentPlan parse_plan(const std::string& text) {
    ExperimentPlan plan;
    ExperimentEntry current;
    std::string config_blob;
    bool inside = false;
    for (const std::string& line : clean_lines(text)) {
        if (line.empty()) continue;
        if (line == "[entry]") {
            if (inside) finish_entry(current, config_blob, plan.entries);
            inside = true;
            continue;
        }
        if (line.front() == '[')
            throw ConfigError("unknown plan section '" + line + "'; only [entry] is recognized");
        if (!inside) throw ConfigError("plan keys must appear inside an [entry] section");
        auto [key, value] = key_value(line);
        if (key == "name") current.name = value;
        else if (key == "suite") current.suite = value;
        else if (key == "source_train") current.source_train = value;
        else if (key == "source_test") current.source_test = value;
        else if (key == "target_train") current.target_train = value;
        else if (key == "target_test") current.target_test = value;
        else if (key == "data_seed") current.data_seed = static_cast<std::uint64_t>(parse_integer(value, key));
        else if (key == "samples") current.samples = static_cast<int>(parse_integer(value, key));
        else if (key == "seeds") {
            for (const std::string& w : word_list(value))
                current.seeds.push_back(static_cast<std::uint64_t>(parse_integer(w, "seeds")));
        } else {
            config_blob += key + " = " + value + "\n"; // training-config key; validated on close
        }
    }
    if (inside) finish_entry(current, config_blob, plan.entries);
    if (plan.entries.empty()) throw ConfigError("plan has no [entry] sections");
    return plan;
}

namespace {

struct EvalTraces {
    std::vector<double> mean_gamma;
    std::vector<double> mean_alpha;
};

MetricReport evaluate_impl(const CmtnParams& params, const ModelConfig& cfg,
                           const DomainDataset& test, const Standardizer* scaler,
                           EvalTraces* traces) {
    if (test.samples.empty()) throw UsageError("evaluation needs a nonempty test set");
    MetricReport report;
    std::vector<double> truth, predicted, scores;
    std::vector<int> pred_cls, truth_cls;
    std::vector<double> gamma_sum, alpha_sum;
    std::size_t trace_count = 0;

    for (const TimeSeriesSample& s : test.samples) {
        ForwardRecord rec = forward(params, cfg, s, ForwardOptions{});
        if (cfg.task == Task::Regression) {
            truth.push_back(s.label);
            const double z = rec.label_out.scalar_value();
            predicted.push_back(scaler ? scaler->invert_label(z) : z);
        } else {
            const double z0 = rec.label_out[0], z1 = rec.label_out[1];
            scores.push_back(1.0 / (1.0 + std::exp(z0 - z1))); // P(fault)
            pred_cls.push_back(z1 > z0 ? 1 : 0);
            truth_cls.push_back(s.label_class);
        }
        if (traces) {
            if (rec.gamma.defined()) {
                const auto& g = rec.gamma.values();
                gamma_sum.resize(std::max(gamma_sum.size(), g.size()), 0.0);
                for (std::size_t i = 0; i < g.size(); ++i) gamma_sum[i] += g[i];
            }
            if (rec.alpha.defined()) {
                const int width = rec.alpha.dim(1);
                alpha_sum.resize(static_cast<std::size_t>(width), 0.0);
                for (int tt = 0; tt < rec.alpha.dim(0); ++tt)
                    for (int k = 0; k < width; ++k)
                        alpha_sum[static_cast<std::size_t>(k)] +=
                            rec.alpha.at(tt, k) / static_cast<double>(rec.alpha.dim(0));
            }
            ++trace_count;
        }
    }

    report.n_total = static_cast<int>(test.samples.size());
    if (cfg.task == Task::Regression) {
        report.mape = mape(truth, predicted);
    } else {
        for (int c : truth_cls) (c == 1 ? report.n_positive : report.n_negative)++;
        report.accuracy = accuracy(pred_cls, truth_cls);
        report.auc = auc(scores, truth_cls);
    }
    if (traces && trace_count > 0) {
        traces->mean_gamma = gamma_sum;
        traces->mean_alpha = alpha_sum;
        for (double& v : traces->mean_gamma) v /= static_cast<double>(trace_count);
        for (double& v : traces->mean_alpha) v /= static_cast<double>(trace_count);
    }
    return report;
}

} // namespace

MetricReport evaluate(const CmtnParams& params, const ModelConfig& cfg, const DomainDataset& test) {
    return evaluate_impl(params, cfg, test, nullptr, nullptr);
}

double median(std::vector<double> v) {
    if (v.empty()) throw UsageError("median of an empty list");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

EntryResult run_entry(const ExperimentEntry& entry) {
    DomainDataset src_train, src_test, tgt_train, tgt_test;
    if (!entry.suite.empty()) {
        ShiftPair pair = make_shift_pair(entry.suite, entry.data_seed);
        GeneratorConfig g;
        g.sensors = 4;
        g.window = entry.config.window;
        g.samples = entry.samples;
        g.task = entry.config.task;
        g.seed = entry.data_seed;
        GeneratedDomain src = generate_domain(pair.source, g);
        GeneratedDomain tgt = generate_domain(pair.target, g);
        std::tie(src_train, src_test) = split_time(src.dataset, 0.8);
        std::tie(tgt_train, tgt_test) = split_time(tgt.dataset, 0.8);
    } else {
        src_train = read_dataset_csv(entry.source_train);
        src_test = read_dataset_csv(entry.source_test);
        tgt_train = read_dataset_csv(entry.target_train);
        tgt_test = read_dataset_csv(entry.target_test);
    }

    if (entry.config.task == Task::Classification)
        src_train = downsample_normals(src_train, rng::mix(entry.data_seed, "balance"));

    Standardizer standardizer = Standardizer::fit({&src_train, &tgt_train});
    if (entry.config.task == Task::Regression) {
        standardizer.fit_labels(src_train);
        src_train = standardizer.apply_labels(src_train); // trained in z-space
    }
    src_train = standardizer.apply(src_train);
    src_test = standardizer.apply(src_test);
    tgt_train = standardizer.apply(tgt_train);
    tgt_test = standardizer.apply(tgt_test);

    EntryResult result;
    result.entry = entry;
    result.entry.config.sensors = src_train.sensors(); // the data decides
    result.entry.config.window = src_train.window();
    const bool adaptive = has_domain_head(entry.config.variant);
    for (std::uint64_t seed : entry.seeds) {
        TrainingConfig cfg = result.entry.config;
        cfg.seed = seed;
        TrainResult tr = train(cfg, src_train, adaptive ? &tgt_train : nullptr);

        RunRecord run;
        run.seed = seed;
        run.train_seconds = tr.wall_seconds;
        if (!tr.history.empty()) {
            run.final_label_loss = tr.history.back().label_loss;
            run.final_domain_loss = tr.history.back().domain_loss;
        }
        const ModelConfig mc = cfg.model_config();
        run.source_test = evaluate_impl(tr.params, mc, src_test, &standardizer, nullptr);
        EvalTraces traces;
        run.target_test = evaluate_impl(tr.params, mc, tgt_test, &standardizer, &traces);
        run.mean_gamma = std::move(traces.mean_gamma);
        run.mean_alpha = std::move(traces.mean_alpha);
        run.params = std::move(tr.params);
        run.standardizer_text = standardizer.serialize();
        result.runs.push_back(std::move(run));
    }
    return result;
}

namespace {

void write_metric_lines(std::ostringstream& out, const std::string& side, const MetricReport& r) {
    out << side << "_counts " << r.n_positive << ' ' << r.n_negative << ' ' << r.n_total << '\n';
    if (r.mape) out << side << "_mape " << format_double(*r.mape) << '\n';
    if (r.accuracy) out << side << "_accuracy " << format_double(*r.accuracy) << '\n';
    if (r.auc) out << side << "_auc " << format_double(*r.auc) << '\n';
}

void write_series(std::ostringstream& out, const std::string& key, const std::vector<double>& v) {
    if (v.empty()) return;
    out << key;
    for (double x : v) out << ' ' << format_double(x);
    out << '\n';
}

} // namespace

void write_entry_result(const std::string& path, const EntryResult& result) {
    std::ostringstream out;
    out << "cmtn_result v1\n";
    out << "name " << result.entry.name << '\n';
    out << "variant " << to_string(result.entry.config.variant) << '\n';
    out << "task " << to_string(result.entry.config.task) << '\n';
    out << "suite " << (result.entry.suite.empty() ? "-" : result.entry.suite) << '\n';
    out << "window " << result.entry.config.window << '\n';
    out << "samples " << result.entry.samples << '\n';
    out << "data_seed " << result.entry.data_seed << '\n';
    out << "runs " << result.runs.size() << '\n';
    for (const RunRecord& run : result.runs) {
        out << "run\n";
        out << "seed " << run.seed << '\n';
        out << "train_seconds " << format_double(run.train_seconds) << '\n';
        out << "final_label_loss " << format_double(run.final_label_loss) << '\n';
        out << "final_domain_loss " << format_double(run.final_domain_loss) << '\n';
        write_metric_lines(out, "source", run.source_test);
        write_metric_lines(out, "target", run.target_test);
        write_series(out, "mean_gamma", run.mean_gamma);
        write_series(out, "mean_alpha", run.mean_alpha);
        out << "end_run\n";
    }
    out << "end\n";
    atomic_write_text(path, out.str());
}

namespace {

std::vector<double> parse_series(const std::vector<std::string>& words, std::size_t from,
                                 const std::string& what) {
    std::vector<double> out;
    for (std::size_t i = from; i < words.size(); ++i) out.push_back(parse_double(words[i], what));
    return out;
}

} // namespace

EntryResult read_entry_result(const std::string& path) {
    const std::vector<std::string> lines = split(read_text_file(path), '\n');
    std::size_t pos = 0;
    auto next = [&]() -> const std::string& {
        while (pos < lines.size() && trim(lines[pos]).empty()) ++pos;
        if (pos >= lines.size()) throw DataError(path + ": truncated result file");
        return lines[pos++];
    };
    if (trim(next()) != "cmtn_result v1")
        throw DataError(path + ": not a result file (bad magic line)");

    EntryResult result;
    auto header_field = [&](const std::string& key) {
        const std::string line = trim(next());
        if (line.rfind(key + " ", 0) != 0)
            throw DataError(path + ": expected '" + key + "', got '" + line + "'");
        return line.substr(key.size() + 1);
    };
    result.entry.name = header_field("name");
    result.entry.config.variant = variant_from_string(header_field("variant"));
    result.entry.config.task = task_from_string(header_field("task"));
    const std::string suite = header_field("suite");
    result.entry.suite = suite == "-" ? "" : suite;
    result.entry.config.window = static_cast<int>(parse_integer(header_field("window"), "window"));
    result.entry.samples = static_cast<int>(parse_integer(header_field("samples"), "samples"));
    result.entry.data_seed =
        static_cast<std::uint64_t>(parse_integer(header_field("data_seed"), "data_seed"));
    const long long n_runs = parse_integer(header_field("runs"), "runs");

    for (long long r = 0; r < n_runs; ++r) {
        if (trim(next()) != "run") throw DataError(path + ": expected a 'run' block");
        RunRecord run;
        while (true) {
            const std::string line = trim(next());
            if (line == "end_run") break;
            const std::vector<std::string> words = word_list(line);
            if (words.empty()) continue;
            const std::string& key = words[0];
            auto one = [&](const std::string& what) {
                if (words.size() != 2) throw DataError(path + ": malformed '" + what + "' line");
                return words[1];
            };
            if (key == "seed") run.seed = static_cast<std::uint64_t>(parse_integer(one(key), key));
            else if (key == "train_seconds") run.train_seconds = parse_double(one(key), key);
            else if (key == "final_label_loss") run.final_label_loss = parse_double(one(key), key);
            else if (key == "final_domain_loss") run.final_domain_loss = parse_double(one(key), key);
            else if (key == "source_counts" || key == "target_counts") {
                if (words.size() != 4) throw DataError(path + ": malformed '" + key + "' line");
                MetricReport& m = key[0] == 's' ? run.source_test : run.target_test;
                m.n_positive = static_cast<int>(parse_integer(words[1], key));
                m.n_negative = static_cast<int>(parse_integer(words[2], key));
                m.n_total = static_cast<int>(parse_integer(words[3], key));
            } else if (key == "source_mape") run.source_test.mape = parse_double(one(key), key);
            else if (key == "source_accuracy") run.source_test.accuracy = parse_double(one(key), key);
            else if (key == "source_auc") run.source_test.auc = parse_double(one(key), key);
            else if (key == "target_mape") run.target_test.mape = parse_double(one(key), key);
            else if (key == "target_accuracy") run.target_test.accuracy = parse_double(one(key), key);
            else if (key == "target_auc") run.target_test.auc = parse_double(one(key), key);
            else if (key == "mean_gamma") run.mean_gamma = parse_series(words, 1, key);
            else if (key == "mean_alpha") run.mean_alpha = parse_series(words, 1, key);
            else throw DataError(path + ": unknown result key '" + key + "'");
        }
        result.runs.push_back(std::move(run));
    }
    if (trim(next()) != "end") throw DataError(path + ": missing final 'end'");
    return result;
}

GenerateSpec parse_generate_spec(const std::string& text) {
    GenerateSpec spec;
    std::set<std::string> seen;
    for (const std::string& line : clean_lines(text)) {
        if (line.empty()) continue;
        auto [key, value] = key_value(line);
        if (!seen.insert(key).second)
            throw ConfigError("duplicate generator config key '" + key + "'");
        if (key == "suite") spec.suite = value;
        else if (key == "sensors") spec.sensors = static_cast<int>(parse_integer(value, key));
        else if (key == "window") spec.window = static_cast<int>(parse_integer(value, key));
        else if (key == "samples") spec.samples = static_cast<int>(parse_integer(value, key));
        else if (key == "task") spec.task = task_from_string(value);
        else if (key == "seed") spec.seed = static_cast<std::uint64_t>(parse_integer(value, key));
        else if (key == "train_fraction") spec.train_fraction = parse_double(value, key);
        else throw ConfigError("unknown generator config key '" + key + "'");
    }
    if (kSuiteNames.count(spec.suite) == 0)
        throw ConfigError("unknown suite '" + spec.suite + "'");
    if (spec.sensors != 4)
        throw ConfigError("shift suites are defined for 4 sensors; got " +
                          std::to_string(spec.sensors));
    return spec;
}

namespace {

std::string spec_block(const DomainSpec& spec) {
    std::ostringstream out;
    out << "#   lag " << spec.lag << ", noise " << format_double(spec.noise) << ", mix_threshold "
        << format_double(spec.mix_threshold) << ", fault_threshold "
        << format_double(spec.fault_threshold) << "\n#   scale";
    for (double a : spec.scale) out << ' ' << format_double(a);
    out << "\n#   offset";
    for (double b : spec.offset) out << ' ' << format_double(b);
    out << '\n';
    return out.str();
}

} // namespace

void cmd_generate(const GenerateSpec& spec, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    ShiftPair pair = make_shift_pair(spec.suite, spec.seed);
    GeneratorConfig g;
    g.sensors = spec.sensors;
    g.window = spec.window;
    g.samples = spec.samples;
    g.task = spec.task;
    g.seed = spec.seed;
    GeneratedDomain src = generate_domain(pair.source, g);
    GeneratedDomain tgt = generate_domain(pair.target, g);
    auto [src_train, src_test] = split_time(src.dataset, spec.train_fraction);
    auto [tgt_train, tgt_test] = split_time(tgt.dataset, spec.train_fraction);

    const std::filesystem::path dir(out_dir);
    write_dataset_csv((dir / "source_train.csv").string(), src_train);
    write_dataset_csv((dir / "source_test.csv").string(), src_test);
    write_dataset_csv((dir / "target_train.csv").string(), tgt_train);
    write_dataset_csv((dir / "target_test.csv").string(), tgt_test);

    // The manifest is itself a valid generator config, so rerunning with it
    // reproduces the same bytes; the comments document the derived specs.
    std::ostringstream m;
    m << "# dataset manifest: regenerate with the same tool and this file as --config\n";
    m << "suite = " << spec.suite << '\n';
    m << "sensors = " << spec.sensors << '\n';
    m << "window = " << spec.window << '\n';
    m << "samples = " << spec.samples << '\n';
    m << "task = " << to_string(spec.task) << '\n';
    m << "seed = " << spec.seed << '\n';
    m << "train_fraction = " << format_double(spec.train_fraction) << '\n';
    m << "# source spec:\n" << spec_block(pair.source);
    m << "# target spec:\n" << spec_block(pair.target);
    m << "# files: source_train.csv source_test.csv target_train.csv target_test.csv\n";
    m << "# split: " << src_train.samples.size() << " train / " << src_test.samples.size()
      << " test per domain\n";
    atomic_write_text((dir / "manifest.txt").string(), m.str());
}

int cmd_train(const ExperimentPlan& plan, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    int aborted = 0;
    for (const ExperimentEntry& entry : plan.entries) {
        try {
            EntryResult result = run_entry(entry);
            write_entry_result((dir / (entry.name + ".result")).string(), result);
            for (const RunRecord& run : result.runs) {
                TrainingConfig echo = result.entry.config; // sensors/window synced to data
                echo.seed = run.seed;
                const std::string blob = serialize_training_config(echo) + run.standardizer_text;
                save_checkpoint((dir / (entry.name + ".seed" + std::to_string(run.seed) + ".ckpt")).string(),
                                run.params, echo.model_config(), blob);
            }
        } catch (const std::exception& e) {
            std::fprintf(stderr, "entry '%s' aborted: %s\n", entry.name.c_str(), e.what());
            ++aborted;
        }
    }
    return aborted;
}

namespace {

struct ReportRow {
    std::string name, variant, task, suite;
    int window = 0;
    std::size_t runs = 0;
    std::optional<double> target_mape, target_accuracy, target_auc;
    std::optional<double> source_mape, source_accuracy, source_auc;
    std::vector<double> gamma_med, alpha_med;
};

std::optional<double> median_of(const std::vector<RunRecord>& runs,
                                std::optional<double> MetricReport::*field, bool target) {
    std::vector<double> vals;
    for (const RunRecord& r : runs) {
        const MetricReport& m = target ? r.target_test : r.source_test;
        if (m.*field) vals.push_back(*(m.*field));
    }
    if (vals.empty()) return std::nullopt;
    return median(vals);
}

std::vector<double> componentwise_median(const std::vector<RunRecord>& runs,
                                         std::vector<double> RunRecord::*series) {
    std::size_t width = 0;
    for (const RunRecord& r : runs) width = std::max(width, (r.*series).size());
    std::vector<double> out;
    for (std::size_t i = 0; i < width; ++i) {
        std::vector<double> vals;
        for (const RunRecord& r : runs)
            if (i < (r.*series).size()) vals.push_back((r.*series)[i]);
        out.push_back(median(vals));
    }
    return out;
}

std::string cell(const std::optional<double>& v) {
    return v ? format_double(*v) : "-";
}

} // namespace

void cmd_report(const std::string& results_dir, const std::string& out_dir) {
    std::vector<EntryResult> results;
    if (std::filesystem::is_directory(results_dir)) {
        std::vector<std::string> paths;
        for (const auto& e : std::filesystem::directory_iterator(results_dir))
            if (e.is_regular_file() && e.path().extension() == ".result")
                paths.push_back(e.path().string());
        std::sort(paths.begin(), paths.end());
        for (const std::string& p : paths) results.push_back(read_entry_result(p));
    }
    if (results.empty())
        throw UsageError("no .result files under '" + results_dir + "'; run training first");

    std::vector<ReportRow> rows;
    for (const EntryResult& r : results) {
        ReportRow row;
        row.name = r.entry.name;
        row.variant = to_string(r.entry.config.variant);
        row.task = to_string(r.entry.config.task);
        row.suite = r.entry.suite.empty() ? "-" : r.entry.suite;
        row.window = r.entry.config.window;
        row.runs = r.runs.size();
        row.target_mape = median_of(r.runs, &MetricReport::mape, true);
        row.target_accuracy = median_of(r.runs, &MetricReport::accuracy, true);
        row.target_auc = median_of(r.runs, &MetricReport::auc, true);
        row.source_mape = median_of(r.runs, &MetricReport::mape, false);
        row.source_accuracy = median_of(r.runs, &MetricReport::accuracy, false);
        row.source_auc = median_of(r.runs, &MetricReport::auc, false);
        row.gamma_med = componentwise_median(r.runs, &RunRecord::mean_gamma);
        row.alpha_med = componentwise_median(r.runs, &RunRecord::mean_alpha);
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        return std::tie(a.variant, a.suite, a.window, a.name) <
               std::tie(b.variant, b.suite, b.window, b.name);
    });

    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);

    const std::vector<std::string> headers = {
        "entry",       "variant",     "task",        "suite",       "window",     "runs",
        "target_mape", "target_accuracy", "target_auc", "source_mape", "source_accuracy", "source_auc"};
    std::vector<std::vector<std::string>> table;
    for (const ReportRow& r : rows)
        table.push_back({r.name, r.variant, r.task, r.suite, std::to_string(r.window),
                         std::to_string(r.runs), cell(r.target_mape), cell(r.target_accuracy),
                         cell(r.target_auc), cell(r.source_mape), cell(r.source_accuracy),
                         cell(r.source_auc)});

    std::vector<std::size_t> width(headers.size());
    for (std::size_t c = 0; c < headers.size(); ++c) {
        width[c] = headers[c].size();
        for (const auto& row : table) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream txt;
    txt << "variant comparison (medians over runs)\n";
    auto emit_row = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c)
            txt << std::left << std::setw(static_cast<int>(width[c]) + 2) << cells[c];
        txt << '\n';
    };
    emit_row(headers);
    for (const auto& row : table) emit_row(row);

    txt << "\nattention summaries (componentwise medians over runs)\n";
    for (const ReportRow& r : rows) {
        if (!r.gamma_med.empty()) {
            txt << r.name << " mean_gamma_per_position:";
            for (double v : r.gamma_med) txt << ' ' << format_double(v);
            txt << '\n';
        }
        if (!r.alpha_med.empty()) {
            txt << r.name << " mean_alpha_per_feature:";
            for (double v : r.alpha_med) txt << ' ' << format_double(v);
            txt << '\n';
        }
    }
    atomic_write_text((dir / "table.txt").string(), txt.str());

    std::ostringstream csv;
    for (std::size_t c = 0; c < headers.size(); ++c)
        csv << headers[c] << (c + 1 == headers.size() ? '\n' : ',');
    for (const auto& row : table)
        for (std::size_t c = 0; c < row.size(); ++c)
            csv << row[c] << (c + 1 == row.size() ? '\n' : ',');
    atomic_write_text((dir / "table.csv").string(), csv.str());

    // Sequence-length series: any variant/suite pair observed at 2+ windows.
    std::map<std::pair<std::string, std::string>, std::map<int, double>> series;
    for (const ReportRow& r : rows)
        if (r.target_auc) series[{r.variant, r.suite}][r.window] = *r.target_auc;
    std::ostringstream seq;
    seq << "variant,suite,window,target_auc_median\n";
    bool any_series = false;
    for (const auto& [key, points] : series) {
        if (points.size() < 2) continue;
        any_series = true;
        for (const auto& [w, v] : points)
            seq << key.first << ',' << key.second << ',' << w << ',' << format_double(v) << '\n';
    }
    if (any_series) atomic_write_text((dir / "seq_auc.csv").string(), seq.str());
}

IngestSchema parse_ingest_schema(const std::string& text) {
    IngestSchema schema;
    std::set<std::string> seen;
    for (const std::string& line : clean_lines(text)) {
        if (line.empty()) continue;
        auto [key, value] = key_value(line);
        if (!seen.insert(key).second) throw ConfigError("duplicate schema key '" + key + "'");
        if (key == "timestamp") schema.timestamp_column = value;
        else if (key == "sensors") schema.sensor_columns = word_list(value);
        else if (key == "delta") schema.delta_columns = word_list(value);
        else if (key == "label") schema.label_column = value;
        else if (key == "domain") {
            if (value == "source") schema.domain = DomainTag::Source;
            else if (value == "target") schema.domain = DomainTag::Target;
            else throw ConfigError("schema domain must be source or target, got '" + value + "'");
        } else if (key == "window") schema.window = static_cast<int>(parse_integer(value, key));
        else if (key == "train_fraction") schema.train_fraction = parse_double(value, key);
        else throw ConfigError("unknown schema key '" + key + "'");
    }
    if (schema.timestamp_column.empty()) throw ConfigError("schema needs a timestamp column");
    if (schema.sensor_columns.empty()) throw ConfigError("schema needs a sensors list");
    if (schema.label_column.empty()) throw ConfigError("schema needs a label column");
    if (schema.window < 2) throw ConfigError("schema window must be at least 2");
    for (const std::string& d : schema.delta_columns)
        if (std::find(schema.sensor_columns.begin(), schema.sensor_columns.end(), d) ==
            schema.sensor_columns.end())
            throw ConfigError("delta column '" + d + "' is not in the sensors list");
    return schema;
}

void cmd_ingest(const std::string& csv_path, const IngestSchema& schema,
                const std::string& out_prefix) {
    const std::vector<std::string> lines = split(read_text_file(csv_path), '\n');
    std::size_t row_end = lines.size();
    while (row_end > 0 && trim(lines[row_end - 1]).empty()) --row_end;
    if (row_end < 2) throw DataError(csv_path + ": needs a header and at least one data row");

    const std::vector<std::string> header = split(trim(lines[0]), ',');
    auto column_index = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (trim(header[i]) == name) return i;
        throw DataError(csv_path + ": column '" + name + "' missing from the header");
    };
    const std::size_t ts_col = column_index(schema.timestamp_column);
    const std::size_t label_col = column_index(schema.label_column);
    std::vector<std::size_t> sensor_cols;
    for (const std::string& s : schema.sensor_columns) sensor_cols.push_back(column_index(s));
    std::vector<bool> is_delta(schema.sensor_columns.size(), false);
    for (std::size_t k = 0; k < schema.sensor_columns.size(); ++k)
        is_delta[k] = std::find(schema.delta_columns.begin(), schema.delta_columns.end(),
                                schema.sensor_columns[k]) != schema.delta_columns.end();

    const std::size_t n_rows = row_end - 1;
    std::vector<double> timestamps(n_rows), labels(n_rows);
    std::vector<std::vector<double>> readings(n_rows,
                                              std::vector<double>(sensor_cols.size()));
    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::vector<std::string> cells = split(trim(lines[r + 1]), ',');
        if (cells.size() != header.size())
            throw DataError(csv_path + " line " + std::to_string(r + 2) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        const std::string where = csv_path + " line " + std::to_string(r + 2);
        timestamps[r] = parse_double(trim(cells[ts_col]), where + " timestamp");
        labels[r] = parse_double(trim(cells[label_col]), where + " label");
        for (std::size_t k = 0; k < sensor_cols.size(); ++k)
            readings[r][k] = parse_double(trim(cells[sensor_cols[k]]), where);
        if (r > 0 && timestamps[r] <= timestamps[r - 1])
            throw DataError(csv_path + " line " + std::to_string(r + 2) +
                            ": timestamps are not strictly increasing");
    }

    // Delta transform consumes the first row for every column.
    const bool any_delta = !schema.delta_columns.empty();
    const std::size_t start = any_delta ? 1 : 0;
    std::vector<std::vector<double>> transformed;
    std::vector<double> kept_labels;
    for (std::size_t r = start; r < n_rows; ++r) {
        std::vector<double> row = readings[r];
        if (any_delta)
            for (std::size_t k = 0; k < row.size(); ++k)
                if (is_delta[k]) row[k] = readings[r][k] - readings[r - 1][k];
        transformed.push_back(std::move(row));
        kept_labels.push_back(labels[r]);
    }

    const int N = schema.window;
    if (transformed.size() < static_cast<std::size_t>(N))
        throw DataError(csv_path + ": only " + std::to_string(transformed.size()) +
                        " usable rows; windows of " + std::to_string(N) + " need more");
    const std::size_t n_windows = transformed.size() - static_cast<std::size_t>(N) + 1;

    DomainDataset all;
    all.domain = schema.domain;
    const int sensors = static_cast<int>(sensor_cols.size());
    for (std::size_t w = 0; w < n_windows; ++w) {
        std::vector<double> vals(static_cast<std::size_t>(N * sensors));
        for (int t = 0; t < N; ++t)
            for (int k = 0; k < sensors; ++k)
                vals[static_cast<std::size_t>(t * sensors + k)] =
                    transformed[w + static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
        TimeSeriesSample sample;
        sample.x = Tensor({N, sensors}, std::move(vals));
        sample.label = kept_labels[w + static_cast<std::size_t>(N) - 1];
        sample.label_class = static_cast<int>(std::llround(sample.label));
        sample.domain = schema.domain;
        all.samples.push_back(std::move(sample));
    }

    auto [train, test] = split_time(all, schema.train_fraction);
    if (train.samples.empty() || test.samples.empty())
        throw DataError(csv_path + ": " + std::to_string(n_windows) +
                        " windows is too few for a train/test split");
    write_dataset_csv(out_prefix + "_train.csv", train);
    write_dataset_csv(out_prefix + "_test.csv", test);
}

} // namespace cmtn
