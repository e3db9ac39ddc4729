#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cmtn/data.hpp"
#include "cmtn/layers.hpp"

namespace cmtn {

// CMTN       full network: per-domain extractors, per-sensor attention,
//            LSTM, attention over hidden states, label + adversarial
//            domain heads
// CMTN_NDE   extractors replaced by one shared linear projection
// CMTN_NGA   no attention over hidden states; heads read the last state
// CMTN_NLA   no per-sensor attention
// BASE_DANN  plain LSTM on raw readings + adversarial domain head
// LSTM_S2T   plain LSTM trained on source only, no domain head
enum class Variant { CMTN, CMTN_NDE, CMTN_NGA, CMTN_NLA, BASE_DANN, LSTM_S2T };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s); // ConfigError on unknown names
std::string to_string(Task t);
Task task_from_string(const std::string& s);

bool has_extractors(Variant v);   // per-domain input transforms
bool has_shared_proj(Variant v);  // CMTN_NDE only
bool has_dynamic_attn(Variant v);
bool has_temporal_attn(Variant v);
bool has_domain_head(Variant v);

struct ModelConfig {
    Variant variant = Variant::CMTN;
    Task task = Task::Regression;
    int sensors = 3;       // M
    int window = 6;        // N
    int features = 16;     // K
    int hidden = 32;       // H
    int attn_width = 16;   // A
    int mlp_width = 32;
    int label_classes = 2; // classification output width
    double dropout_rate = 0.1;

    int lstm_input_width() const;
    int head_input_width() const;
    int label_output_width() const;
    void validate() const; // ConfigError with the offending field
};

// Parameter blocks present for a variant; absent blocks stay disengaged.
// theta_S/theta_T are the per-domain transforms; everything else is shared.
struct CmtnParams {
    std::optional<ExtractorParams> theta_S;
    std::optional<ExtractorParams> theta_T;
    std::optional<ExtractorParams> shared_proj; // linear (no tanh)
    std::optional<DynamicAttnParams> dyn;
    LstmParams lstm;
    std::optional<TemporalAttnParams> temporal;
    HeadParams phi_l;
    std::optional<HeadParams> phi_d;

    // Visits every present tensor as fn(name, Tensor&) in a fixed order.
    template <typename F> void visit(F&& fn) {
        if (theta_S) theta_S->visit("theta_S", fn);
        if (theta_T) theta_T->visit("theta_T", fn);
        if (shared_proj) shared_proj->visit("shared_proj", fn);
        if (dyn) dyn->visit("dyn", fn);
        lstm.visit("lstm", fn);
        if (temporal) temporal->visit("temporal", fn);
        phi_l.visit("phi_l", fn);
        if (phi_d) phi_d->visit("phi_d", fn);
    }
    template <typename F> void visit(F&& fn) const {
        const_cast<CmtnParams*>(this)->visit(
            [&fn](const std::string& name, Tensor& t) { fn(name, static_cast<const Tensor&>(t)); });
    }

    std::vector<std::string> tensor_names() const;
};

// Fresh parameters; every block gets its own seed stream derived from
// (seed, block name), so adding or removing blocks does not shift the
// others' draws.
CmtnParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Copy whose tensors are leaves on `t` (same structure, shared values).
CmtnParams lift_params(Tape& t, const CmtnParams& p);

struct ForwardRecord {
    Tensor label_out;     // [1] regression, [classes] logits otherwise
    Tensor domain_logits; // [2]; undefined unless requested and present
    Tensor alpha;         // [N x K] per-step sensor weights; undefined if unused
    Tensor gamma;         // [N-1] time weights; undefined if unused
    Tensor context;       // head input
};

struct ForwardOptions {
    bool training = false;
    double lambda = 0.0;            // reversal strength for the domain branch
    std::uint64_t dropout_seed = 0; // per-sample; branches derive their own
    bool want_domain = false;
};

// Graph-building forward pass: params must already live on `t`, x must be a
// leaf of `t`. Used directly by the trainer so losses share one tape.
ForwardRecord forward_nodes(Tape& t, const CmtnParams& lifted, const ModelConfig& cfg,
                            const Tensor& x, DomainTag tag, const ForwardOptions& opt);

// Convenience wrapper over a private tape; returned tensors are value
// holders only.
ForwardRecord forward(const CmtnParams& params, const ModelConfig& cfg,
                      const TimeSeriesSample& sample, const ForwardOptions& opt);

struct LossParts {
    Tensor total; // label + domain, for monitoring; gradients carry the
                  // adversarial sign through the reversal layer
    Tensor label;
    Tensor domain; // undefined for variants without a domain head
};

// batch_label: labelled source samples (L_y). batch_domain: source+target
// mix (L_d); must contain both domains for adaptive variants. The seed
// vectors run parallel to the batches.
LossParts total_loss_nodes(Tape& t, const CmtnParams& lifted, const ModelConfig& cfg,
                           const std::vector<TimeSeriesSample>& batch_label,
                           const std::vector<std::uint64_t>& seeds_label,
                           const std::vector<TimeSeriesSample>& batch_domain,
                           const std::vector<std::uint64_t>& seeds_domain,
                           double lambda, bool training);

double total_loss(const CmtnParams& params, const ModelConfig& cfg,
                  const std::vector<TimeSeriesSample>& batch_label,
                  const std::vector<TimeSeriesSample>& batch_domain, double lambda);

struct Prediction {
    double value = 0.0;              // regression output or P(class 1)
    int cls = 0;                     // argmax class (classification)
    std::vector<double> class_scores; // softmax over classes (classification)
};

// Evaluation path: target routing, no dropout, no domain head.
Prediction predict_target(const CmtnParams& params, const ModelConfig& cfg,
                          const TimeSeriesSample& sample);

} // namespace cmtn
