#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmtn/data.hpp"
#include "cmtn/model.hpp"
#include "cmtn/rng.hpp"

namespace cmtn {

// One flat document drives a run: optimizer knobs plus the model widths, so
// a config file or checkpoint echo fully reproduces training.
struct TrainingConfig {
    Variant variant = Variant::CMTN;
    Task task = Task::Regression;

    int batch_size = 64;
    double learning_rate = 0.003;
    double lambda = 0.05; // reversal strength
    double dropout_rate = 0.1;
    int epochs = 30;
    std::uint64_t seed = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 5.0; // global gradient norm cap; 0 disables
    bool desk_scale = true;

    int sensors = 3;
    int window = 6;
    int features = 16;
    int hidden = 32;
    int attn_width = 16;
    int mlp_width = 32;

    void validate() const; // throws ConfigError naming the offending field
    ModelConfig model_config() const;

    static TrainingConfig desk_profile(Variant v, Task task);
    static TrainingConfig paper_profile(Variant v, Task task);
};

// Flat `key = value` lines; '#' starts a comment. Unknown or duplicate keys
// are rejected. Missing keys keep desk-profile defaults.
TrainingConfig parse_training_config(const std::string& text);
std::string serialize_training_config(const TrainingConfig& cfg);

struct OptimizerState {
    std::vector<Tensor> m; // first moments, parameter order
    std::vector<Tensor> v; // second moments
    long long step = 0;
};

OptimizerState make_optimizer_state(const CmtnParams& params);

double global_grad_norm(const std::vector<Tensor>& grads);

// Bias-corrected Adam over every tensor of `params`. `lifted` holds the tape
// leaves that key `grads`; gradients are clipped to cfg.clip_norm first.
void adam_step(CmtnParams& params, const CmtnParams& lifted, const GradientMap& grads,
               OptimizerState& state, const TrainingConfig& cfg);

// Balance a binary classification set by keeping every faulty sample and a
// uniform without-replacement draw of equally many normals (time order kept).
DomainDataset downsample_normals(const DomainDataset& ds, std::uint64_t seed);

struct MinibatchStep {
    std::vector<int> label;      // source indices, labelled loss
    std::vector<int> mix_source; // domain-batch halves (empty when the
    std::vector<int> mix_target; // variant has no domain head)
};

// Deterministic batch plan. An epoch is one shuffled pass over the source
// set (remainder dropped); the domain halves cycle through their own
// shuffled orders independently of epoch boundaries.
class MinibatchIter {
public:
    MinibatchIter(int source_size, int target_size, const TrainingConfig& cfg, bool adaptive);
    int steps_per_epoch() const { return steps_per_epoch_; }
    std::vector<MinibatchStep> next_epoch();

private:
    int batch_ = 0;
    int source_size_ = 0;
    int steps_per_epoch_ = 0;
    bool adaptive_ = false;
    std::vector<int> label_order_;
    rng::Stream label_stream_;

    struct Cycler {
        std::vector<int> order;
        std::size_t pos = 0;
        rng::Stream stream;
        explicit Cycler(int n = 0, rng::Stream s = rng::Stream(0));
        int next();
    };
    Cycler mix_source_;
    Cycler mix_target_;
};

struct EpochStats {
    double label_loss = 0.0;  // means over the epoch's steps
    double domain_loss = 0.0; // 0 when the variant has no domain head
};

struct TrainResult {
    CmtnParams params;
    std::vector<EpochStats> history; // one entry per epoch
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    TrainingConfig config;
};

// Full loop: minibatch -> loss -> backward -> adam. Adaptive variants need a
// nonempty target set; LSTM_S2T ignores `target`. A non-finite loss aborts
// with the epoch/step of the first offending batch.
TrainResult train(const TrainingConfig& cfg, const DomainDataset& source,
                  const DomainDataset* target);

} // namespace cmtn
