#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cmtn/checkpoint.hpp"
#include "cmtn/errors.hpp"
#include "cmtn/experiment.hpp"
#include "cmtn/textio.hpp"

using namespace cmtn;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("cmtn_exp_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

DomainDataset tiny_dataset(int n, int window, int sensors, DomainTag tag, double base) {
    DomainDataset ds;
    ds.domain = tag;
    for (int i = 0; i < n; ++i) {
        std::vector<double> vals;
        for (int t = 0; t < window; ++t)
            for (int k = 0; k < sensors; ++k)
                vals.push_back(base + i + 0.25 * t + 10.0 * k);
        TimeSeriesSample s;
        s.x = Tensor({window, sensors}, std::move(vals));
        s.label = 1.0 + 0.1 * i;
        s.label_class = i % 2;
        s.domain = tag;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

std::string basic_plan_entry(const std::string& name, const std::string& extra) {
    std::ostringstream out;
    out << "[entry]\n"
        << "name = " << name << "\n"
        << "suite = ALL_SHIFT\n"
        << "seeds = 1 2\n"
        << "samples = 80\n"
        << "variant = CMTN\n"
        << "task = regression\n"
        << extra;
    return out.str();
}

// CSV in the raw-ingest shape (not the dataset exchange format).
std::string raw_csv(int rows) {
    std::ostringstream out;
    out << "ts,a,b,load,y\n";
    for (int i = 0; i < rows; ++i)
        out << i << ',' << 0.5 * i << ',' << (100.0 - i) << ',' << i * i << ',' << (i % 2) << '\n';
    return out.str();
}

} // namespace

TEST_CASE("time split keeps order and uses the floor boundary") {
    DomainDataset ds = tiny_dataset(10, 3, 2, DomainTag::Source, 0.0);
    auto [train, test] = split_time(ds, 0.8);
    CHECK(train.samples.size() == 8);
    CHECK(test.samples.size() == 2);
    CHECK(train.samples[0].label == ds.samples[0].label);
    CHECK(test.samples[0].label == ds.samples[8].label);
    CHECK(test.samples[1].label == ds.samples[9].label);

    auto [t95, e95] = split_time(tiny_dataset(95, 3, 2, DomainTag::Source, 0.0), 0.8);
    CHECK(t95.samples.size() == 76); // floor(0.8 * 95)
    CHECK(e95.samples.size() == 19);

    CHECK_THROWS_AS(split_time(ds, 0.0), ConfigError);
    CHECK_THROWS_AS(split_time(ds, 1.0), ConfigError);
}

TEST_CASE("standardizer pools its input sets and floors the spread") {
    DomainDataset a, b;
    a.domain = DomainTag::Source;
    b.domain = DomainTag::Target;
    // Channel 0 varies, channel 1 is constant everywhere.
    auto sample = [](double v0, DomainTag tag) {
        TimeSeriesSample s;
        s.x = Tensor({2, 2}, {v0, 7.0, v0 + 2.0, 7.0});
        s.domain = tag;
        return s;
    };
    a.samples = {sample(0.0, DomainTag::Source), sample(4.0, DomainTag::Source)};
    b.samples = {sample(10.0, DomainTag::Target)};

    Standardizer st = Standardizer::fit({&a, &b});
    // Channel 0 readings: 0,2,4,6,10,12 -> mean 17/3.
    CHECK(st.mean[0] == doctest::Approx(17.0 / 3.0).epsilon(1e-12));
    CHECK(st.mean[1] == doctest::Approx(7.0).epsilon(1e-12));
    CHECK(st.stdev[0] > 1.0);
    CHECK(st.stdev[1] == 1e-9); // constant channel hits the floor

    DomainDataset az = st.apply(a);
    double mean0 = 0.0;
    for (const auto& s : az.samples) mean0 += s.x.at(0, 0) + s.x.at(1, 0);
    // Not centered exactly (fit pooled b too), but finite and shifted down.
    CHECK(std::isfinite(mean0));
    CHECK(az.samples[0].x.at(0, 1) == doctest::Approx(0.0)); // (7-7)/floor
    CHECK(az.samples[0].label == a.samples[0].label);        // labels untouched

    const std::string text = st.serialize();
    CHECK(text.find("standardize_mean =") != std::string::npos);
    CHECK(text.find("standardize_stdev =") != std::string::npos);

    DomainDataset wrong = tiny_dataset(2, 2, 3, DomainTag::Source, 0.0);
    CHECK_THROWS_AS(st.apply(wrong), UsageError);
    CHECK_THROWS_AS(Standardizer::fit({}), UsageError);
}

TEST_CASE("median handles odd, even, and empty inputs") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(median({5.0}) == 5.0);
    CHECK_THROWS_AS(median({}), UsageError);
}

TEST_CASE("plan parser fills entries and routes training keys") {
    const std::string text =
        "# comparison plan\n"
        "[entry]\n"
        "name = cmtn_all\n"
        "suite = ALL_SHIFT\n"
        "seeds = 11 12 13\n"
        "data_seed = 5\n"
        "samples = 400\n"
        "variant = CMTN\n"
        "task = classification\n"
        "epochs = 3\n"
        "hidden = 16\n"
        "\n"
        "[entry]\n"
        "name = from_files\n"
        "source_train = st.csv\n"
        "source_test = se.csv\n"
        "target_train = tt.csv\n"
        "target_test = te.csv\n"
        "seeds = 7\n"
        "variant = LSTM_S2T\n";
    ExperimentPlan plan = parse_plan(text);
    REQUIRE(plan.entries.size() == 2);
    const ExperimentEntry& e0 = plan.entries[0];
    CHECK(e0.name == "cmtn_all");
    CHECK(e0.suite == "ALL_SHIFT");
    CHECK(e0.seeds == std::vector<std::uint64_t>{11, 12, 13});
    CHECK(e0.data_seed == 5);
    CHECK(e0.samples == 400);
    CHECK(e0.config.variant == Variant::CMTN);
    CHECK(e0.config.task == Task::Classification);
    CHECK(e0.config.epochs == 3);
    CHECK(e0.config.hidden == 16);
    CHECK(e0.config.batch_size == 64); // untouched default
    const ExperimentEntry& e1 = plan.entries[1];
    CHECK(e1.suite.empty());
    CHECK(e1.source_train == "st.csv");
    CHECK(e1.target_test == "te.csv");
    CHECK(e1.config.variant == Variant::LSTM_S2T);
}

TEST_CASE("plan parser rejects malformed plans") {
    auto throws_with = [](const std::string& text, const std::string& needle) {
        try {
            parse_plan(text);
            FAIL_CHECK("expected ConfigError for: " << needle);
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    throws_with("", "no [entry]");
    throws_with("name = x\n", "inside an [entry]");
    throws_with("[entry]\nsuite = ALL_SHIFT\nseeds = 1\n", "missing a name");
    throws_with(basic_plan_entry("a", "") + basic_plan_entry("a", ""), "duplicate plan entry name");
    throws_with("[entry]\nname = x\nsuite = ALL_SHIFT\nseeds = 1 1\n", "repeats a seed");
    throws_with("[entry]\nname = x\nsuite = ALL_SHIFT\n", "seeds");
    throws_with("[entry]\nname = x\nseeds = 1\n", "either a suite or the four dataset paths");
    throws_with("[entry]\nname = x\nsuite = ALL_SHIFT\nsource_train = a.csv\nseeds = 1\n",
                "either a suite or the four dataset paths");
    throws_with("[entry]\nname = x\nsource_train = a.csv\nseeds = 1\n", "all four dataset paths");
    throws_with("[entry]\nname = x\nsuite = NO_SUCH\nseeds = 1\n", "unknown suite");
    throws_with("[entry]\nname = x\nsuite = ALL_SHIFT\nseeds = 1\nnot_a_key = 3\n",
                "unknown training config key");
    throws_with("[weird]\n", "unknown plan section");
    throws_with("[entry]\nname = x\nsuite = ALL_SHIFT\nseeds = 1\nsamples = 4\n",
                "at least 10 samples");
}

TEST_CASE("generator spec parser applies defaults and names bad keys") {
    GenerateSpec spec = parse_generate_spec("suite = LAG_SHIFT\nseed = 9\n");
    CHECK(spec.suite == "LAG_SHIFT");
    CHECK(spec.seed == 9);
    CHECK(spec.sensors == 4);
    CHECK(spec.window == 6);
    CHECK(spec.samples == 1500);
    CHECK(spec.task == Task::Regression);
    CHECK(spec.train_fraction == 0.8);

    try {
        parse_generate_spec("suite = ALL_SHIFT\nwibble = 2\n");
        FAIL_CHECK("unknown key accepted");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("wibble") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_generate_spec("suite = ALL_SHIFT\nseed = 1\nseed = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_generate_spec("suite = NOPE\n"), ConfigError);
    CHECK_THROWS_AS(parse_generate_spec("suite = ALL_SHIFT\nsensors = 3\n"), ConfigError);
}

TEST_CASE("generate writes four data files plus a manifest that regenerates identically") {
    const fs::path dir1 = fresh_dir("gen1");
    const fs::path dir2 = fresh_dir("gen2");
    GenerateSpec spec = parse_generate_spec("suite = VALUE_SHIFT\nsamples = 60\nwindow = 4\nseed = 3\n");
    cmd_generate(spec, dir1.string());

    const std::vector<std::string> files = {"source_train.csv", "source_test.csv",
                                            "target_train.csv", "target_test.csv", "manifest.txt"};
    for (const std::string& f : files) CHECK(fs::exists(dir1 / f));

    // The manifest doubles as the config for regeneration.
    GenerateSpec again = parse_generate_spec(read_text_file((dir1 / "manifest.txt").string()));
    cmd_generate(again, dir2.string());
    for (const std::string& f : files)
        CHECK(read_text_file((dir1 / f).string()) == read_text_file((dir2 / f).string()));

    DomainDataset train = read_dataset_csv((dir1 / "source_train.csv").string());
    DomainDataset test = read_dataset_csv((dir1 / "source_test.csv").string());
    CHECK(train.samples.size() == 48); // floor(0.8 * 60)
    CHECK(test.samples.size() == 12);
    CHECK(train.domain == DomainTag::Source);
    CHECK(read_dataset_csv((dir1 / "target_test.csv").string()).domain == DomainTag::Target);

    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("run_entry trains per seed and reports both test splits") {
    ExperimentEntry entry;
    entry.name = "smoke";
    entry.suite = "VALUE_SHIFT";
    entry.seeds = {1, 2};
    entry.data_seed = 4;
    entry.samples = 80;
    entry.config = parse_training_config(
        "variant = CMTN\ntask = regression\nepochs = 2\nbatch_size = 8\n"
        "window = 4\nfeatures = 6\nhidden = 8\nattn_width = 4\nmlp_width = 8\n");
    EntryResult result = run_entry(entry);
    REQUIRE(result.runs.size() == 2);
    for (const RunRecord& run : result.runs) {
        CHECK(std::isfinite(run.final_label_loss));
        REQUIRE(run.source_test.mape.has_value());
        REQUIRE(run.target_test.mape.has_value());
        CHECK(!run.source_test.accuracy.has_value());
        CHECK(run.source_test.n_total == 16); // 80 - floor(0.8*80)
        CHECK(run.target_test.n_total == 16);
        CHECK(run.mean_gamma.size() == 3); // window - 1
        CHECK(run.mean_alpha.size() == 6); // feature columns
        double gsum = 0.0;
        for (double g : run.mean_gamma) gsum += g;
        CHECK(gsum == doctest::Approx(1.0).epsilon(1e-9));
        double asum = 0.0;
        for (double a : run.mean_alpha) asum += a;
        CHECK(asum == doctest::Approx(1.0).epsilon(1e-9));
        std::size_t n_tensors = 0;
        run.params.visit([&](const std::string&, const Tensor&) { ++n_tensors; });
        CHECK(n_tensors > 0);
        CHECK(run.standardizer_text.find("standardize_mean") != std::string::npos);
    }
    CHECK(result.runs[0].seed == 1);
    CHECK(result.runs[1].seed == 2);

    // Same entry, same bytes out (timings aside).
    EntryResult rerun = run_entry(entry);
    CHECK(*rerun.runs[0].target_test.mape == *result.runs[0].target_test.mape);
    CHECK(rerun.runs[0].final_label_loss == result.runs[0].final_label_loss);
}

TEST_CASE("run_entry balances classification training data and fills rank metrics") {
    ExperimentEntry entry;
    entry.name = "smoke_cls";
    entry.suite = "ALL_SHIFT";
    entry.seeds = {3};
    entry.data_seed = 11;
    entry.samples = 300;
    entry.config = parse_training_config(
        "variant = CMTN\ntask = classification\nepochs = 2\nbatch_size = 8\n"
        "window = 4\nfeatures = 6\nhidden = 8\nattn_width = 4\nmlp_width = 8\n");
    EntryResult result = run_entry(entry);
    REQUIRE(result.runs.size() == 1);
    const RunRecord& run = result.runs[0];
    REQUIRE(run.target_test.accuracy.has_value());
    REQUIRE(run.target_test.auc.has_value());
    CHECK(!run.target_test.mape.has_value());
    CHECK(run.target_test.n_positive + run.target_test.n_negative == run.target_test.n_total);
    CHECK(run.target_test.n_positive > 0);
    CHECK(*run.target_test.auc >= 0.0);
    CHECK(*run.target_test.auc <= 1.0);
    CHECK(*run.target_test.accuracy >= 0.0);
    CHECK(*run.target_test.accuracy <= 1.0);
}

TEST_CASE("result files round-trip every reported number") {
    ExperimentEntry entry;
    entry.name = "rt";
    entry.suite = "MIX_SHIFT";
    entry.seeds = {5};
    entry.data_seed = 2;
    entry.samples = 80;
    entry.config = parse_training_config(
        "variant = CMTN_NDE\ntask = regression\nepochs = 1\nbatch_size = 8\n"
        "window = 4\nfeatures = 6\nhidden = 8\nattn_width = 4\nmlp_width = 8\n");
    EntryResult result = run_entry(entry);

    const fs::path dir = fresh_dir("rt");
    const std::string path = (dir / "rt.result").string();
    write_entry_result(path, result);
    EntryResult loaded = read_entry_result(path);

    CHECK(loaded.entry.name == "rt");
    CHECK(loaded.entry.suite == "MIX_SHIFT");
    CHECK(loaded.entry.config.variant == Variant::CMTN_NDE);
    CHECK(loaded.entry.config.task == Task::Regression);
    CHECK(loaded.entry.config.window == 4);
    CHECK(loaded.entry.samples == 80);
    CHECK(loaded.entry.data_seed == 2);
    REQUIRE(loaded.runs.size() == 1);
    const RunRecord& a = result.runs[0];
    const RunRecord& b = loaded.runs[0];
    CHECK(b.seed == a.seed);
    CHECK(b.train_seconds == a.train_seconds);
    CHECK(b.final_label_loss == a.final_label_loss);
    CHECK(b.final_domain_loss == a.final_domain_loss);
    CHECK(*b.source_test.mape == *a.source_test.mape);
    CHECK(*b.target_test.mape == *a.target_test.mape);
    CHECK(b.target_test.n_total == a.target_test.n_total);
    CHECK(b.mean_gamma == a.mean_gamma);
    CHECK(b.mean_alpha == a.mean_alpha);

    CHECK_THROWS_AS(read_entry_result((dir / "missing.result").string()), IoError);
    atomic_write_text((dir / "junk.result").string(), "not a result\n");
    CHECK_THROWS_AS(read_entry_result((dir / "junk.result").string()), DataError);
    fs::remove_all(dir);
}

TEST_CASE("cmd_train writes results and checkpoints and counts aborted entries") {
    const fs::path dir = fresh_dir("train");
    ExperimentPlan plan = parse_plan(
        "[entry]\n"
        "name = ok\n"
        "suite = VALUE_SHIFT\n"
        "seeds = 1 2\n"
        "samples = 80\n"
        "variant = LSTM_S2T\n"
        "task = regression\n"
        "epochs = 1\nbatch_size = 8\nwindow = 4\nfeatures = 6\nhidden = 8\nattn_width = 4\nmlp_width = 8\n"
        "[entry]\n"
        "name = broken\n"
        "source_train = /nonexistent/st.csv\n"
        "source_test = /nonexistent/se.csv\n"
        "target_train = /nonexistent/tt.csv\n"
        "target_test = /nonexistent/te.csv\n"
        "seeds = 1\n");
    const int aborted = cmd_train(plan, dir.string());
    CHECK(aborted == 1);
    CHECK(fs::exists(dir / "ok.result"));
    CHECK(fs::exists(dir / "ok.seed1.ckpt"));
    CHECK(fs::exists(dir / "ok.seed2.ckpt"));
    CHECK(!fs::exists(dir / "broken.result"));

    EntryResult result = read_entry_result((dir / "ok.result").string());
    CHECK(result.runs.size() == 2);

    // The checkpoint blob echoes the run seed and the standardizer.
    LoadedCheckpoint ckpt = load_checkpoint((dir / "ok.seed2.ckpt").string());
    CHECK(ckpt.training_config_text.find("seed = 2") != std::string::npos);
    CHECK(ckpt.training_config_text.find("standardize_mean") != std::string::npos);
    fs::remove_all(dir);
}

namespace {

EntryResult fake_result(const std::string& name, const std::string& variant,
                        const std::string& suite, int window, double auc_val) {
    EntryResult r;
    r.entry.name = name;
    r.entry.suite = suite;
    r.entry.samples = 100;
    r.entry.data_seed = 1;
    r.entry.config.variant = variant_from_string(variant);
    r.entry.config.task = Task::Classification;
    r.entry.config.window = window;
    for (int i = 0; i < 3; ++i) {
        RunRecord run;
        run.seed = static_cast<std::uint64_t>(i + 1);
        run.source_test.accuracy = 0.9;
        run.source_test.auc = 0.95;
        run.source_test.n_total = 20;
        run.target_test.accuracy = 0.8 + 0.01 * i;
        run.target_test.auc = auc_val + 0.01 * i;
        run.target_test.n_positive = 4;
        run.target_test.n_negative = 16;
        run.target_test.n_total = 20;
        run.mean_gamma = {0.3, 0.3, 0.4};
        r.runs.push_back(std::move(run));
    }
    return r;
}

} // namespace

TEST_CASE("report emits sorted tables and a window sweep series") {
    const fs::path rdir = fresh_dir("results");
    const fs::path odir = fresh_dir("report");
    // Two variants, two windows each: a sequence-length sweep.
    write_entry_result((rdir / "b6.result").string(),
                       fake_result("b6", "CMTN", "LAG_SHIFT", 6, 0.9));
    write_entry_result((rdir / "b20.result").string(),
                       fake_result("b20", "CMTN", "LAG_SHIFT", 20, 0.85));
    write_entry_result((rdir / "a6.result").string(),
                       fake_result("a6", "BASE_DANN", "LAG_SHIFT", 6, 0.8));
    write_entry_result((rdir / "a20.result").string(),
                       fake_result("a20", "BASE_DANN", "LAG_SHIFT", 20, 0.6));
    cmd_report(rdir.string(), odir.string());

    const std::string table = read_text_file((odir / "table.txt").string());
    CHECK(table.find("a6") != std::string::npos);
    CHECK(table.find("mean_gamma_per_position:") != std::string::npos);
    const std::string csv = read_text_file((odir / "table.csv").string());
    const std::vector<std::string> lines = split(csv, '\n');
    REQUIRE(lines.size() >= 5);
    CHECK(lines[0].rfind("entry,variant,", 0) == 0);
    // Sorted by variant, then suite, then window, then name.
    CHECK(lines[1].rfind("a6,BASE_DANN", 0) == 0);
    CHECK(lines[2].rfind("a20,BASE_DANN", 0) == 0);
    CHECK(lines[3].rfind("b6,CMTN", 0) == 0);
    CHECK(lines[4].rfind("b20,CMTN", 0) == 0);
    // Median over the three runs: middle value of {v, v+0.01, v+0.02}.
    CHECK(lines[3].find(format_double(0.91)) != std::string::npos);

    const std::string seq = read_text_file((odir / "seq_auc.csv").string());
    const std::vector<std::string> seq_lines = split(trim(seq), '\n');
    REQUIRE(seq_lines.size() == 5); // header + 2 variants x 2 windows
    CHECK(seq_lines[0] == "variant,suite,window,target_auc_median");
    CHECK(seq_lines[1] == "BASE_DANN,LAG_SHIFT,6," + format_double(0.81));
    CHECK(seq_lines[2] == "BASE_DANN,LAG_SHIFT,20," + format_double(0.61));

    // Single result -> single-row table, no sweep file.
    const fs::path rdir1 = fresh_dir("results1");
    const fs::path odir1 = fresh_dir("report1");
    write_entry_result((rdir1 / "only.result").string(),
                       fake_result("only", "CMTN", "ALL_SHIFT", 6, 0.9));
    cmd_report(rdir1.string(), odir1.string());
    CHECK(split(trim(read_text_file((odir1 / "table.csv").string())), '\n').size() == 2);
    CHECK(!fs::exists(odir1 / "seq_auc.csv"));

    const fs::path empty = fresh_dir("results_empty");
    CHECK_THROWS_AS(cmd_report(empty.string(), odir1.string()), UsageError);
    CHECK_THROWS_AS(cmd_report((empty / "nope").string(), odir1.string()), UsageError);

    fs::remove_all(rdir);
    fs::remove_all(odir);
    fs::remove_all(rdir1);
    fs::remove_all(odir1);
    fs::remove_all(empty);
}

TEST_CASE("ingest schema parser validates its fields") {
    IngestSchema schema = parse_ingest_schema(
        "timestamp = ts\nsensors = a b load\ndelta = load\nlabel = y\ndomain = target\nwindow = 4\n");
    CHECK(schema.timestamp_column == "ts");
    CHECK(schema.sensor_columns == std::vector<std::string>{"a", "b", "load"});
    CHECK(schema.delta_columns == std::vector<std::string>{"load"});
    CHECK(schema.domain == DomainTag::Target);
    CHECK(schema.window == 4);
    CHECK(schema.train_fraction == 0.8);

    CHECK_THROWS_AS(parse_ingest_schema("sensors = a\nlabel = y\nwindow = 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_ingest_schema("timestamp = ts\nlabel = y\n"), ConfigError);
    CHECK_THROWS_AS(
        parse_ingest_schema("timestamp = ts\nsensors = a\nlabel = y\ndomain = left\n"),
        ConfigError);
    CHECK_THROWS_AS(
        parse_ingest_schema("timestamp = ts\nsensors = a\ndelta = b\nlabel = y\n"),
        ConfigError); // delta column outside the sensors list
    CHECK_THROWS_AS(
        parse_ingest_schema("timestamp = ts\nsensors = a\nlabel = y\nwindow = 1\n"),
        ConfigError);
}

TEST_CASE("ingest windows rows, applies deltas, and splits in time order") {
    const fs::path dir = fresh_dir("ingest");
    const std::string csv_path = (dir / "raw.csv").string();
    atomic_write_text(csv_path, raw_csv(100));

    IngestSchema schema = parse_ingest_schema(
        "timestamp = ts\nsensors = a b load\nlabel = y\ndomain = source\nwindow = 6\n");
    const std::string prefix = (dir / "plain").string();
    cmd_ingest(csv_path, schema, prefix);
    DomainDataset train = read_dataset_csv(prefix + "_train.csv");
    DomainDataset test = read_dataset_csv(prefix + "_test.csv");
    // 100 rows, window 6 -> 95 windows; boundary floor(0.8 * 95) = 76.
    CHECK(train.samples.size() + test.samples.size() == 95);
    CHECK(train.samples.size() == 76);
    CHECK(train.domain == DomainTag::Source);
    // First window covers rows 0..5 in file order; label is the last row's.
    CHECK(train.samples[0].x.at(0, 0) == 0.0);
    CHECK(train.samples[0].x.at(5, 0) == 2.5);
    CHECK(train.samples[0].x.at(0, 1) == 100.0);
    CHECK(train.samples[0].label == 1.0); // row 5: 5 % 2
    CHECK(train.samples[0].label_class == 1);
    CHECK(train.samples[1].x.at(0, 0) == 0.5); // next window starts one row later

    // Delta transform: cumulative column becomes consecutive differences and
    // the first row is consumed. load starts 5,7,10 -> deltas 2,3,...
    IngestSchema dschema = parse_ingest_schema(
        "timestamp = ts\nsensors = load\ndelta = load\nlabel = y\ndomain = source\nwindow = 2\n");
    std::ostringstream cumulative;
    cumulative << "ts,a,b,load,y\n";
    double load = 5.0;
    for (int i = 0; i < 12; ++i) {
        cumulative << i << ",0,0," << format_double(load) << ',' << (i % 3 == 0 ? 1 : 0) << '\n';
        load += static_cast<double>(i + 2); // deltas 2,3,4,...
    }
    atomic_write_text((dir / "cumulative.csv").string(), cumulative.str());
    cmd_ingest((dir / "cumulative.csv").string(), dschema, (dir / "delta").string());
    DomainDataset dtrain = read_dataset_csv((dir / "delta_train.csv").string());
    DomainDataset dtest = read_dataset_csv((dir / "delta_test.csv").string());
    // 12 rows -> 11 after the delta -> 10 windows -> 8/2 split.
    CHECK(dtrain.samples.size() == 8);
    CHECK(dtest.samples.size() == 2);
    CHECK(dtrain.samples[0].x.at(0, 0) == 2.0);
    CHECK(dtrain.samples[0].x.at(1, 0) == 3.0);
    CHECK(dtrain.samples[1].x.at(0, 0) == 3.0);
    CHECK(dtrain.samples[0].label == 0.0); // row 2's label

    // A file yielding a single window cannot populate both splits.
    atomic_write_text((dir / "three.csv").string(),
                      "ts,a,b,load,y\n0,0,0,5,0\n1,0,0,7,1\n2,0,0,10,0\n");
    CHECK_THROWS_AS(cmd_ingest((dir / "three.csv").string(), dschema, (dir / "tiny").string()),
                    DataError);

    fs::remove_all(dir);
}

TEST_CASE("ingest rejects bad files with specific errors") {
    const fs::path dir = fresh_dir("ingest_bad");
    IngestSchema schema = parse_ingest_schema(
        "timestamp = ts\nsensors = a b load\nlabel = y\ndomain = source\nwindow = 6\n");
    const std::string prefix = (dir / "out").string();

    atomic_write_text((dir / "missing.csv").string(), "ts,a,load,y\n1,2,3,0\n");
    try {
        cmd_ingest((dir / "missing.csv").string(), schema, prefix);
        FAIL_CHECK("missing column accepted");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("'b'") != std::string::npos);
    }

    atomic_write_text((dir / "unsorted.csv").string(),
                      "ts,a,b,load,y\n1,0,0,1,0\n3,0,0,2,0\n2,0,0,3,0\n");
    try {
        cmd_ingest((dir / "unsorted.csv").string(), schema, prefix);
        FAIL_CHECK("non-monotonic timestamps accepted");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("strictly increasing") != std::string::npos);
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }

    atomic_write_text((dir / "short.csv").string(), raw_csv(4));
    CHECK_THROWS_AS(cmd_ingest((dir / "short.csv").string(), schema, prefix), DataError);

    atomic_write_text((dir / "ragged.csv").string(), "ts,a,b,load,y\n1,2,3\n");
    CHECK_THROWS_AS(cmd_ingest((dir / "ragged.csv").string(), schema, prefix), DataError);

    atomic_write_text((dir / "empty.csv").string(), "ts,a,b,load,y\n");
    CHECK_THROWS_AS(cmd_ingest((dir / "empty.csv").string(), schema, prefix), DataError);
    fs::remove_all(dir);
}
