#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmtn/data.hpp"
#include "cmtn/layers.hpp"

namespace cmtn {

// Per-domain knobs. The causal chain driver -> response is shared by every
// domain; a spec only warps how it is observed (affines), when (lag), how
// noisily (noise), and how the carrier channel is selected (mix_threshold).
struct DomainSpec {
    int lag = 1;                  // steps between driver and response
    std::vector<double> scale;    // a_k per sensor, all nonzero
    std::vector<double> offset;   // b_k per sensor
    double noise = 0.1;           // latent AR(1) and response noise scale
    double mix_threshold = 0.0;   // carrier switches when the driver crosses it
    double fault_threshold = 0.0; // faults are label-map values above this
    DomainTag domain = DomainTag::Source;

    void validate(int sensors, int window) const; // throws ConfigError
};

struct GeneratorConfig {
    int sensors = 4; // channel 0 driver, 1 response, 2.. auxiliary
    int window = 6;
    int samples = 1000;
    Task task = Task::Regression;
    std::uint64_t seed = 1;
};

// The invariant mechanism: a fixed monotone causal map and the label map
// over the last-step latents. Bit-identical for every domain by construction.
double causal_map(double tau);
double label_map(double tau, double response);

struct SampleLatents {
    double tau_last = 0.0; // driver at the window's final step
    double p_last = 0.0;   // response at the window's final step
    double q = 0.0;        // label-map value (the regression label)
};

struct GeneratedDomain {
    DomainDataset dataset;
    std::vector<SampleLatents> latents; // parallel to dataset.samples
    std::vector<double> tau_track;      // observed-time latent trajectory
    std::vector<double> response_track;
    DomainSpec spec;
    GeneratorConfig config;
};

// Stride-1 windows over one continuous trajectory.
// Deterministic in (spec, cfg); distinct domain tags draw independently.
GeneratedDomain generate_domain(const DomainSpec& spec, const GeneratorConfig& cfg);

struct OraclePrediction {
    double value = 0.0; // label-map value from the retained latents
    int cls = 0;
};

// Reference prediction from the generator's own latents: the floor MAPE and
// ceiling AUC for any learned model. Rejects samples it did not produce.
OraclePrediction oracle_predict(const TimeSeriesSample& sample, const GeneratedDomain& gen);

struct ShiftPair {
    std::string name;
    DomainSpec source;
    DomainSpec target;
};

// The four standard suites: VALUE_SHIFT, LAG_SHIFT, MIX_SHIFT, ALL_SHIFT.
// Fault thresholds are calibrated so the source runs near 8% positives.
std::vector<ShiftPair> make_shift_suite(std::uint64_t seed);
ShiftPair make_shift_pair(const std::string& name, std::uint64_t seed);

} // namespace cmtn
