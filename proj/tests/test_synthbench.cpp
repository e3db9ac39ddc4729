#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cmtn/metrics.hpp"
#include "cmtn/synthbench.hpp"

using namespace cmtn;

namespace {

DomainSpec plain_spec(int sensors, DomainTag tag, int lag = 1, double noise = 0.15) {
    DomainSpec s;
    s.lag = lag;
    s.scale.assign(static_cast<std::size_t>(sensors), 1.0);
    s.offset.assign(static_cast<std::size_t>(sensors), 0.0);
    s.noise = noise;
    s.domain = tag;
    return s;
}

GeneratorConfig quick_cfg(int samples, Task task = Task::Regression, std::uint64_t seed = 1) {
    GeneratorConfig cfg;
    cfg.sensors = 4;
    cfg.window = 6;
    cfg.samples = samples;
    cfg.task = task;
    cfg.seed = seed;
    return cfg;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Standard error of a mean over an autocorrelated series, from block means.
double block_se(const std::vector<double>& v, std::size_t block) {
    std::vector<double> means;
    for (std::size_t i = 0; i + block <= v.size(); i += block) {
        double s = 0.0;
        for (std::size_t j = i; j < i + block; ++j) s += v[j];
        means.push_back(s / static_cast<double>(block));
    }
    const double m = mean_of(means);
    double var = 0.0;
    for (double x : means) var += (x - m) * (x - m);
    var /= static_cast<double>(means.size() - 1);
    return std::sqrt(var / static_cast<double>(means.size()));
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean_of(a), mb = mean_of(b);
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    return num / std::sqrt(da * db);
}

} // namespace

TEST_CASE("generation is bit-reproducible and domain tags decouple the draws") {
    DomainSpec spec = plain_spec(4, DomainTag::Source);
    GeneratorConfig cfg = quick_cfg(200);
    GeneratedDomain a = generate_domain(spec, cfg);
    GeneratedDomain b = generate_domain(spec, cfg);
    REQUIRE(a.dataset.samples.size() == 200);
    for (std::size_t i = 0; i < a.dataset.samples.size(); ++i) {
        CHECK(a.dataset.samples[i].x.values() == b.dataset.samples[i].x.values());
        CHECK(a.dataset.samples[i].label == b.dataset.samples[i].label);
    }
    CHECK(a.tau_track == b.tau_track);

    DomainSpec tgt = plain_spec(4, DomainTag::Target);
    GeneratedDomain c = generate_domain(tgt, cfg);
    CHECK(c.tau_track != a.tau_track); // independent trajectory per tag
    CHECK(c.dataset.domain == DomainTag::Target);
}

TEST_CASE("identical knobs give identically distributed domains") {
    GeneratorConfig cfg = quick_cfg(10000);
    GeneratedDomain src = generate_domain(plain_spec(4, DomainTag::Source), cfg);
    GeneratedDomain tgt = generate_domain(plain_spec(4, DomainTag::Target), cfg);

    using Track = std::vector<double> GeneratedDomain::*;
    for (Track track : {&GeneratedDomain::tau_track, &GeneratedDomain::response_track}) {
        const std::vector<double>& a = src.*track;
        const std::vector<double>& b = tgt.*track;
        const double gap = std::fabs(mean_of(a) - mean_of(b));
        const double se = std::sqrt(block_se(a, 500) * block_se(a, 500) +
                                    block_se(b, 500) * block_se(b, 500));
        CHECK(gap < 3.0 * se);
    }
}

TEST_CASE("zero lag, identity affine, zero noise reproduce the causal map exactly") {
    DomainSpec spec = plain_spec(4, DomainTag::Source, 0, 0.0);
    GeneratorConfig cfg = quick_cfg(300);
    GeneratedDomain gen = generate_domain(spec, cfg);
    for (std::size_t t = 0; t < gen.tau_track.size(); ++t)
        CHECK(gen.response_track[t] == causal_map(gen.tau_track[t]));
    for (const TimeSeriesSample& s : gen.dataset.samples)
        for (int t = 0; t < cfg.window; ++t)
            CHECK(s.x.at(t, 1) == causal_map(s.x.at(t, 0))); // response = g(driver), bit for bit
}

TEST_CASE("cross-correlation recovers the configured lag") {
    GeneratorConfig cfg = quick_cfg(2000);
    for (int d : {0, 1, 2, 3}) {
        GeneratedDomain gen = generate_domain(plain_spec(4, DomainTag::Source, d, 0.0), cfg);
        const std::vector<double>& tau = gen.tau_track;
        const std::vector<double>& p = gen.response_track;
        int best_lag = -1;
        double best_corr = -2.0;
        for (int ell = 0; ell <= 5; ++ell) {
            std::vector<double> lagged(tau.begin(), tau.end() - ell);
            std::vector<double> response(p.begin() + ell, p.end());
            const double c = pearson(lagged, response);
            if (c > best_corr) {
                best_corr = c;
                best_lag = ell;
            }
        }
        CHECK(best_lag == d);
    }
}

TEST_CASE("the oracle reproduces its own labels and rejects foreign samples") {
    GeneratorConfig cfg = quick_cfg(400);
    GeneratedDomain gen = generate_domain(plain_spec(4, DomainTag::Source, 1, 0.2), cfg);
    std::vector<double> truth, predicted;
    for (const TimeSeriesSample& s : gen.dataset.samples) {
        truth.push_back(s.label);
        predicted.push_back(oracle_predict(s, gen).value);
    }
    CHECK(mape(truth, predicted) == 0.0); // floor: exact on its own data

    GeneratorConfig ccfg = quick_cfg(400, Task::Classification, 7);
    DomainSpec cspec = plain_spec(4, DomainTag::Source, 1, 0.0);
    cspec.fault_threshold = 14.0;
    GeneratedDomain cgen = generate_domain(cspec, ccfg);
    std::vector<double> scores;
    std::vector<int> labels;
    for (const TimeSeriesSample& s : cgen.dataset.samples) {
        scores.push_back(oracle_predict(s, cgen).value);
        labels.push_back(s.label_class);
    }
    CHECK(auc(scores, labels) == 1.0); // ceiling at zero noise

    GeneratedDomain other = generate_domain(plain_spec(4, DomainTag::Target, 1, 0.2), cfg);
    CHECK_THROWS_AS(oracle_predict(other.dataset.samples[0], gen), UsageError);
}

namespace {

std::pair<double, double> sensor_range(const GeneratedDomain& gen, int k) {
    double lo = 1e300, hi = -1e300;
    for (const auto& s : gen.dataset.samples)
        for (int t = 0; t < gen.config.window; ++t) {
            lo = std::min(lo, s.x.at(t, k));
            hi = std::max(hi, s.x.at(t, k));
        }
    return {lo, hi};
}

} // namespace

TEST_CASE("value shift maps the observed ranges through the affine") {
    ShiftPair pair = make_shift_pair("VALUE_SHIFT", 3);
    pair.source.noise = 0.0; // deterministic signals isolate the affine map
    pair.target.noise = 0.0;
    GeneratorConfig cfg = quick_cfg(10000);

    // Independent target draw: the causal channels' ranges are set by the
    // shared deterministic mechanism, so they map through the affine.
    GeneratedDomain src = generate_domain(pair.source, cfg);
    GeneratedDomain tgt = generate_domain(pair.target, cfg);
    for (int k : {0, 1}) {
        const double a = pair.target.scale[static_cast<std::size_t>(k)];
        const double b = pair.target.offset[static_cast<std::size_t>(k)];
        auto [lo_s, hi_s] = sensor_range(src, k);
        auto [lo_t, hi_t] = sensor_range(tgt, k);
        const double width = a * (hi_s - lo_s);
        CHECK(std::fabs(lo_t - (a * lo_s + b)) < 0.05 * width);
        CHECK(std::fabs(hi_t - (a * hi_s + b)) < 0.05 * width);
    }

    // Same latent draw (same tag): every channel's range maps exactly.
    DomainSpec shifted = pair.target;
    shifted.domain = DomainTag::Source;
    GeneratedDomain twin = generate_domain(shifted, cfg);
    for (int k = 0; k < cfg.sensors; ++k) {
        const double a = pair.target.scale[static_cast<std::size_t>(k)];
        const double b = pair.target.offset[static_cast<std::size_t>(k)];
        auto [lo_s, hi_s] = sensor_range(src, k);
        auto [lo_t, hi_t] = sensor_range(twin, k);
        const double lo_m = std::min(a * lo_s + b, a * hi_s + b);
        const double hi_m = std::max(a * lo_s + b, a * hi_s + b);
        CHECK(lo_t == doctest::Approx(lo_m).epsilon(1e-12));
        CHECK(hi_t == doctest::Approx(hi_m).epsilon(1e-12));
    }
}

TEST_CASE("classification suites run near the documented positive rate") {
    for (const ShiftPair& pair : make_shift_suite(11)) {
        GeneratorConfig cfg = quick_cfg(4000, Task::Classification, 19);
        GeneratedDomain src = generate_domain(pair.source, cfg);
        int positives = 0;
        for (const auto& s : src.dataset.samples) positives += s.label_class;
        const double rate = static_cast<double>(positives) / 4000.0;
        INFO(pair.name, " positive rate ", rate);
        CHECK(rate > 0.25);
        CHECK(rate < 0.45);
    }
}

TEST_CASE("shift suites carry the documented knobs") {
    std::vector<ShiftPair> suite = make_shift_suite(21);
    REQUIRE(suite.size() == 4);
    CHECK(suite[0].name == "VALUE_SHIFT");
    CHECK(suite[0].source.scale[0] == 1.0);
    CHECK(suite[0].target.scale[0] == 5.0);
    CHECK(suite[0].target.offset[0] == 2.0);
    CHECK(suite[0].target.scale != suite[0].source.scale);
    CHECK(suite[0].source.lag == suite[0].target.lag);

    CHECK(suite[1].name == "LAG_SHIFT");
    CHECK(suite[1].source.lag == 1);
    CHECK(suite[1].target.lag == 3);
    CHECK(suite[1].source.scale == suite[1].target.scale);
    CHECK(suite[1].source.offset == suite[1].target.offset);

    CHECK(suite[2].name == "MIX_SHIFT");
    CHECK(suite[2].source.mix_threshold != suite[2].target.mix_threshold);

    CHECK(suite[3].name == "ALL_SHIFT");
    CHECK(suite[3].target.noise == 2.0 * suite[3].source.noise);
    CHECK(suite[3].target.lag == 3);
    CHECK(suite[3].target.scale == suite[0].target.scale);
    CHECK(suite[3].target.offset == suite[0].target.offset);

    for (const ShiftPair& p : suite) {
        CHECK(p.source.fault_threshold == p.target.fault_threshold);
        CHECK(p.source.domain == DomainTag::Source);
        CHECK(p.target.domain == DomainTag::Target);
    }

    // Calibration is deterministic in the seed.
    CHECK(make_shift_pair("ALL_SHIFT", 21).source.fault_threshold ==
          suite[3].source.fault_threshold);
    CHECK_THROWS_AS(make_shift_pair("NO_SUCH_SUITE", 1), ConfigError);
}

TEST_CASE("invalid specs and configs are rejected with names") {
    GeneratorConfig cfg = quick_cfg(10);
    DomainSpec bad = plain_spec(4, DomainTag::Source);
    bad.scale[2] = 0.0;
    CHECK_THROWS_AS(generate_domain(bad, cfg), ConfigError);

    DomainSpec lagged = plain_spec(4, DomainTag::Source, 6);
    CHECK_THROWS_AS(generate_domain(lagged, cfg), ConfigError); // lag == window

    DomainSpec wrong_count = plain_spec(3, DomainTag::Source);
    CHECK_THROWS_AS(generate_domain(wrong_count, cfg), ConfigError);

    DomainSpec negative = plain_spec(4, DomainTag::Source);
    negative.noise = -0.1;
    CHECK_THROWS_AS(generate_domain(negative, cfg), ConfigError);

    GeneratorConfig few = quick_cfg(10);
    few.sensors = 2;
    CHECK_THROWS_AS(generate_domain(plain_spec(2, DomainTag::Source), few), ConfigError);
}

TEST_CASE("regression labels stay positive at suite noise levels") {
    for (const ShiftPair& pair : make_shift_suite(5)) {
        GeneratorConfig cfg = quick_cfg(10000, Task::Regression, 23);
        for (const auto& s : generate_domain(pair.target, cfg).dataset.samples) {
            CHECK(s.label > 0.0);
            CHECK(std::isfinite(s.label));
        }
    }
}
