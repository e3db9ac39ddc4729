#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cmtn/tensor.hpp"

namespace cmtn {

enum class Task { Regression, Classification };

// Parameter bundles are plain tensor holders. They are built as detached
// storage; the model lifts them onto a tape before a pass. Each bundle
// exposes visit(prefix, fn) with fn(name, Tensor&) so optimizers and
// checkpoints can enumerate tensors by stable names.

// Per-domain input transform: f_t = tanh(x_t W + b).
struct ExtractorParams {
    Tensor weight; // [M x K]
    Tensor bias;   // [K]

    template <typename F> void visit(const std::string& prefix, F&& fn) {
        fn(prefix + ".weight", weight);
        fn(prefix + ".bias", bias);
    }
};

struct LstmParams {
    Tensor w_input, w_forget, w_cell, w_output;  // each [(K+H) x H]
    Tensor b_input, b_forget, b_cell, b_output;  // each [H]

    template <typename F> void visit(const std::string& prefix, F&& fn) {
        fn(prefix + ".w_input", w_input);
        fn(prefix + ".w_forget", w_forget);
        fn(prefix + ".w_cell", w_cell);
        fn(prefix + ".w_output", w_output);
        fn(prefix + ".b_input", b_input);
        fn(prefix + ".b_forget", b_forget);
        fn(prefix + ".b_cell", b_cell);
        fn(prefix + ".b_output", b_output);
    }
};

// Bilinear score of each past hidden state against the final one.
struct TemporalAttnParams {
    Tensor w_score; // [H x H]
    Tensor b_score; // [1]

    template <typename F> void visit(const std::string& prefix, F&& fn) {
        fn(prefix + ".w_score", w_score);
        fn(prefix + ".b_score", b_score);
    }
};

// Per-sensor attention conditioned on the previous hidden state.
struct DynamicAttnParams {
    Tensor w_joint;   // [(H+K) x A]
    Tensor u_feature; // [A]
    Tensor bias;      // [A]
    Tensor v_score;   // [A]

    template <typename F> void visit(const std::string& prefix, F&& fn) {
        fn(prefix + ".w_joint", w_joint);
        fn(prefix + ".u_feature", u_feature);
        fn(prefix + ".bias", bias);
        fn(prefix + ".v_score", v_score);
    }
};

// One tanh hidden layer plus affine output; inverted dropout on the hidden
// activations during training.
struct HeadParams {
    Tensor w_hidden; // [in x H_mlp]
    Tensor b_hidden; // [H_mlp]
    Tensor w_out;    // [H_mlp x out]
    Tensor b_out;    // [out]
    double dropout_rate = 0.0;

    template <typename F> void visit(const std::string& prefix, F&& fn) {
        fn(prefix + ".w_hidden", w_hidden);
        fn(prefix + ".b_hidden", b_hidden);
        fn(prefix + ".w_out", w_out);
        fn(prefix + ".b_out", b_out);
    }
};

// Initializers: weights uniform in ±sqrt(6/(fan_in+fan_out)), biases zero,
// except the LSTM forget bias which starts at 1.
ExtractorParams make_extractor(int sensors, int features, std::uint64_t seed);
LstmParams make_lstm(int input_width, int hidden, std::uint64_t seed);
TemporalAttnParams make_temporal_attn(int hidden, std::uint64_t seed);
DynamicAttnParams make_dynamic_attn(int hidden, int features, int attn_width, std::uint64_t seed);
HeadParams make_head(int input_width, int mlp_width, int output_width, double dropout_rate,
                     std::uint64_t seed);

// All layer functions expect parameter tensors already attached to `t`.

Tensor feature_extract(Tape& t, const Tensor& x, const ExtractorParams& p); // [N x M] -> [N x K]

struct LstmState {
    Tensor h;
    Tensor c;
};
LstmState lstm_step(Tape& t, const Tensor& input, const LstmState& prev, const LstmParams& p);

struct DynamicAttnResult {
    Tensor alpha;    // [K], nonnegative, sums to 1
    Tensor weighted; // [K], alpha ⊙ f_t
};
DynamicAttnResult dynamic_attention(Tape& t, const Tensor& h_prev, const Tensor& f_t,
                                    const DynamicAttnParams& p);

struct TemporalAttnResult {
    Tensor gamma;   // [N-1]
    Tensor context; // [2H] = [weighted sum of h_1..h_{N-1} ; h_N]
};
TemporalAttnResult temporal_attention(Tape& t, const std::vector<Tensor>& hidden,
                                      const TemporalAttnParams& p);

Tensor head_forward(Tape& t, const Tensor& input, const HeadParams& p, bool training,
                    std::uint64_t dropout_seed);

// Batch losses; each prediction is one sample's output tensor.
Tensor mse_loss(Tape& t, const std::vector<Tensor>& preds, const std::vector<double>& targets);
Tensor cross_entropy_loss(Tape& t, const std::vector<Tensor>& logits,
                          const std::vector<int>& classes);
Tensor label_loss(Tape& t, const std::vector<Tensor>& preds, Task task,
                  const std::vector<double>& reg_targets, const std::vector<int>& class_targets);
Tensor domain_loss(Tape& t, const std::vector<Tensor>& logits, const std::vector<int>& domains);

} // namespace cmtn
