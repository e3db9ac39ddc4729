#include "cmtn/layers.hpp"

#include <cmath>

#include "cmtn/rng.hpp"

namespace cmtn {

namespace {

Tensor xavier(int rows, int cols, rng::Stream& s) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::vector<double> v(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    for (double& x : v) x = s.uniform(-bound, bound);
    return Tensor({rows, cols}, std::move(v));
}

Tensor xavier_vec(int n, int fan_in, int fan_out, rng::Stream& s) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = s.uniform(-bound, bound);
    return Tensor({n}, std::move(v));
}

} // namespace

ExtractorParams make_extractor(int sensors, int features, std::uint64_t seed) {
    rng::Stream s(seed);
    ExtractorParams p;
    p.weight = xavier(sensors, features, s);
    p.bias = Tensor::zeros({features});
    return p;
}

LstmParams make_lstm(int input_width, int hidden, std::uint64_t seed) {
    rng::Stream s(seed);
    LstmParams p;
    const int in = input_width + hidden;
    p.w_input = xavier(in, hidden, s);
    p.w_forget = xavier(in, hidden, s);
    p.w_cell = xavier(in, hidden, s);
    p.w_output = xavier(in, hidden, s);
    p.b_input = Tensor::zeros({hidden});
    p.b_forget = Tensor::full({hidden}, 1.0); // keep early memory open
    p.b_cell = Tensor::zeros({hidden});
    p.b_output = Tensor::zeros({hidden});
    return p;
}

TemporalAttnParams make_temporal_attn(int hidden, std::uint64_t seed) {
    rng::Stream s(seed);
    TemporalAttnParams p;
    p.w_score = xavier(hidden, hidden, s);
    p.b_score = Tensor::zeros({1});
    return p;
}

DynamicAttnParams make_dynamic_attn(int hidden, int features, int attn_width, std::uint64_t seed) {
    rng::Stream s(seed);
    DynamicAttnParams p;
    p.w_joint = xavier(hidden + features, attn_width, s);
    p.u_feature = xavier_vec(attn_width, 1, attn_width, s);
    p.bias = Tensor::zeros({attn_width});
    p.v_score = xavier_vec(attn_width, attn_width, 1, s);
    return p;
}

HeadParams make_head(int input_width, int mlp_width, int output_width, double dropout_rate,
                     std::uint64_t seed) {
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(dropout_rate));
    rng::Stream s(seed);
    HeadParams p;
    p.w_hidden = xavier(input_width, mlp_width, s);
    p.b_hidden = Tensor::zeros({mlp_width});
    p.w_out = xavier(mlp_width, output_width, s);
    p.b_out = Tensor::zeros({output_width});
    p.dropout_rate = dropout_rate;
    return p;
}

Tensor feature_extract(Tape& t, const Tensor& x, const ExtractorParams& p) {
    if (x.rank() != 2 || x.dim(1) != p.weight.dim(0))
        throw ShapeError("feature_extract: readings " + shape_string(x.shape()) +
                         " do not match extractor weight " + shape_string(p.weight.shape()));
    return t.tanh(t.add_rowwise(t.matmul(x, p.weight), p.bias));
}

LstmState lstm_step(Tape& t, const Tensor& input, const LstmState& prev, const LstmParams& p) {
    Tensor z = t.concat({input, prev.h}, 0);
    Tensor i = t.sigmoid(t.add(t.matmul(z, p.w_input), p.b_input));
    Tensor f = t.sigmoid(t.add(t.matmul(z, p.w_forget), p.b_forget));
    Tensor g = t.tanh(t.add(t.matmul(z, p.w_cell), p.b_cell));
    Tensor o = t.sigmoid(t.add(t.matmul(z, p.w_output), p.b_output));
    Tensor c = t.add(t.mul(f, prev.c), t.mul(i, g));
    Tensor h = t.mul(o, t.tanh(c));
    return {h, c};
}

DynamicAttnResult dynamic_attention(Tape& t, const Tensor& h_prev, const Tensor& f_t,
                                    const DynamicAttnParams& p) {
    // Score argument for sensor k is (joint term) + u_feature * f_{t,k} + bias,
    // assembled for all k at once as rows of a [K x A] matrix.
    Tensor joint = t.matmul(t.concat({h_prev, f_t}, 0), p.w_joint); // [A]
    Tensor per_sensor = t.outer(f_t, p.u_feature);                  // [K x A]
    Tensor arg = t.add_rowwise(per_sensor, t.add(joint, p.bias));
    Tensor scores = t.matmul(t.tanh(arg), p.v_score); // [K]
    Tensor alpha = t.softmax(scores);
    return {alpha, t.mul(alpha, f_t)};
}

TemporalAttnResult temporal_attention(Tape& t, const std::vector<Tensor>& hidden,
                                      const TemporalAttnParams& p) {
    const int n = static_cast<int>(hidden.size());
    if (n < 2)
        throw ArgumentError("temporal_attention: needs at least 2 hidden states, got " +
                            std::to_string(n));
    const Tensor& last = hidden[static_cast<std::size_t>(n - 1)];
    Tensor projected = t.matmul(last, p.w_score); // [H]

    std::vector<Tensor> scores;
    std::vector<Tensor> stacked;
    scores.reserve(static_cast<std::size_t>(n - 1));
    stacked.reserve(static_cast<std::size_t>(n - 1));
    for (int i = 0; i + 1 < n; ++i) {
        const Tensor& h = hidden[static_cast<std::size_t>(i)];
        Tensor raw = t.add(t.reduce_sum(t.mul(projected, h)), p.b_score);
        scores.push_back(t.tanh(raw));
        stacked.push_back(t.reshape(h, {1, h.dim(0)}));
    }
    Tensor gamma = t.softmax(t.concat(scores, 0));          // [N-1]
    Tensor summary = t.matmul(gamma, t.concat(stacked, 0)); // [H]
    return {gamma, t.concat({summary, last}, 0)};
}

Tensor head_forward(Tape& t, const Tensor& input, const HeadParams& p, bool training,
                    std::uint64_t dropout_seed) {
    if (p.dropout_rate < 0.0 || p.dropout_rate >= 1.0)
        throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(p.dropout_rate));
    Tensor hidden = t.tanh(t.add(t.matmul(input, p.w_hidden), p.b_hidden));
    if (training && p.dropout_rate > 0.0) {
        rng::Stream s(dropout_seed);
        const double keep = 1.0 - p.dropout_rate;
        std::vector<double> mask(static_cast<std::size_t>(hidden.size()));
        for (double& m : mask) m = s.uniform() < p.dropout_rate ? 0.0 : 1.0 / keep;
        hidden = t.mul_mask(hidden, std::move(mask));
    }
    return t.add(t.matmul(hidden, p.w_out), p.b_out);
}

Tensor mse_loss(Tape& t, const std::vector<Tensor>& preds, const std::vector<double>& targets) {
    if (preds.empty() || preds.size() != targets.size())
        throw ArgumentError("mse_loss: " + std::to_string(preds.size()) + " predictions vs " +
                            std::to_string(targets.size()) + " targets");
    std::vector<Tensor> sq;
    sq.reserve(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        Tensor diff = t.add_scalar(preds[i], -targets[i]);
        sq.push_back(t.mul(diff, diff));
    }
    return t.reduce_mean(t.concat(sq, 0));
}

Tensor cross_entropy_loss(Tape& t, const std::vector<Tensor>& logits,
                          const std::vector<int>& classes) {
    if (logits.empty() || logits.size() != classes.size())
        throw ArgumentError("cross_entropy_loss: " + std::to_string(logits.size()) +
                            " logit vectors vs " + std::to_string(classes.size()) + " classes");
    std::vector<Tensor> per_sample;
    per_sample.reserve(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const Tensor& z = logits[i];
        const int n_class = z.dim(0);
        const int k = classes[i];
        if (k < 0 || k >= n_class)
            throw ArgumentError("cross_entropy_loss: class " + std::to_string(k) +
                                " outside [0, " + std::to_string(n_class) + ")");
        // log-sum-exp with the max folded out as a constant; its gradient is
        // the softmax, which is what the shifted expression produces too.
        double zmax = z[0];
        for (double v : z.values()) zmax = std::max(zmax, v);
        Tensor shifted = t.add_scalar(z, -zmax);
        Tensor lse = t.add_scalar(t.log(t.reduce_sum(t.exp(shifted))), zmax);
        std::vector<double> pick(static_cast<std::size_t>(n_class), 0.0);
        pick[static_cast<std::size_t>(k)] = 1.0;
        Tensor zk = t.reduce_sum(t.mul_mask(z, std::move(pick)));
        per_sample.push_back(t.sub(lse, zk));
    }
    return t.reduce_mean(t.concat(per_sample, 0));
}

Tensor label_loss(Tape& t, const std::vector<Tensor>& preds, Task task,
                  const std::vector<double>& reg_targets, const std::vector<int>& class_targets) {
    if (task == Task::Regression) return mse_loss(t, preds, reg_targets);
    return cross_entropy_loss(t, preds, class_targets);
}

Tensor domain_loss(Tape& t, const std::vector<Tensor>& logits, const std::vector<int>& domains) {
    for (int d : domains)
        if (d != 0 && d != 1)
            throw ArgumentError("domain_loss: domain label must be 0 or 1, got " + std::to_string(d));
    for (const Tensor& z : logits)
        if (z.rank() != 1 || z.dim(0) != 2)
            throw ShapeError("domain_loss: expected two-class logits, got " + shape_string(z.shape()));
    return cross_entropy_loss(t, logits, domains);
}

} // namespace cmtn
