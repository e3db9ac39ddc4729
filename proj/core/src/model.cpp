#include "cmtn/model.hpp"

#include <algorithm>

#include "cmtn/rng.hpp"

namespace cmtn {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::CMTN: return "CMTN";
        case Variant::CMTN_NDE: return "CMTN_NDE";
        case Variant::CMTN_NGA: return "CMTN_NGA";
        case Variant::CMTN_NLA: return "CMTN_NLA";
        case Variant::BASE_DANN: return "BASE_DANN";
        case Variant::LSTM_S2T: return "LSTM_S2T";
    }
    throw ArgumentError("unknown variant value");
}

Variant variant_from_string(const std::string& s) {
    for (Variant v : {Variant::CMTN, Variant::CMTN_NDE, Variant::CMTN_NGA, Variant::CMTN_NLA,
                      Variant::BASE_DANN, Variant::LSTM_S2T})
        if (to_string(v) == s) return v;
    throw ConfigError("unknown variant '" + s +
                      "' (expected CMTN, CMTN_NDE, CMTN_NGA, CMTN_NLA, BASE_DANN, or LSTM_S2T)");
}

std::string to_string(Task t) {
    return t == Task::Regression ? "regression" : "classification";
}

Task task_from_string(const std::string& s) {
    if (s == "regression") return Task::Regression;
    if (s == "classification") return Task::Classification;
    throw ConfigError("unknown task '" + s + "' (expected regression or classification)");
}

bool has_extractors(Variant v) {
    return v == Variant::CMTN || v == Variant::CMTN_NGA || v == Variant::CMTN_NLA;
}
bool has_shared_proj(Variant v) { return v == Variant::CMTN_NDE; }
bool has_dynamic_attn(Variant v) {
    return v == Variant::CMTN || v == Variant::CMTN_NDE || v == Variant::CMTN_NGA;
}
bool has_temporal_attn(Variant v) {
    return v == Variant::CMTN || v == Variant::CMTN_NDE || v == Variant::CMTN_NLA;
}
bool has_domain_head(Variant v) { return v != Variant::LSTM_S2T; }

int ModelConfig::lstm_input_width() const {
    return (has_extractors(variant) || has_shared_proj(variant)) ? features : sensors;
}

int ModelConfig::head_input_width() const {
    return has_temporal_attn(variant) ? 2 * hidden : hidden;
}

int ModelConfig::label_output_width() const {
    return task == Task::Regression ? 1 : label_classes;
}

void ModelConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw ConfigError(std::string(name) + " must be positive, got " + std::to_string(v));
    };
    positive(sensors, "sensors");
    positive(features, "features");
    positive(hidden, "hidden");
    positive(attn_width, "attn_width");
    positive(mlp_width, "mlp_width");
    const int min_window = has_temporal_attn(variant) ? 2 : 1;
    if (window < min_window)
        throw ConfigError("window must be at least " + std::to_string(min_window) + " for " +
                          to_string(variant) + ", got " + std::to_string(window));
    if (task == Task::Classification && label_classes < 2)
        throw ConfigError("label_classes must be at least 2, got " + std::to_string(label_classes));
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("dropout_rate must lie in [0, 1), got " + std::to_string(dropout_rate));
}

std::vector<std::string> CmtnParams::tensor_names() const {
    std::vector<std::string> names;
    visit([&names](const std::string& name, const Tensor&) { names.push_back(name); });
    return names;
}

CmtnParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    auto block_seed = [seed](const char* name) { return rng::mix(seed, std::string("init/") + name); };

    CmtnParams p;
    if (has_extractors(cfg.variant)) {
        // Both extractors start from the same weights: the target path begins
        // as a copy of the source path and the adversarial gradient is what
        // specializes it. An independently random target extractor would never
        // see a label gradient and would stay garbage.
        p.theta_S = make_extractor(cfg.sensors, cfg.features, block_seed("extractor"));
        p.theta_T = *p.theta_S;
    }
    if (has_shared_proj(cfg.variant))
        p.shared_proj = make_extractor(cfg.sensors, cfg.features, block_seed("shared_proj"));
    if (has_dynamic_attn(cfg.variant))
        p.dyn = make_dynamic_attn(cfg.hidden, cfg.lstm_input_width(), cfg.attn_width,
                                  block_seed("dyn"));
    p.lstm = make_lstm(cfg.lstm_input_width(), cfg.hidden, block_seed("lstm"));
    if (has_temporal_attn(cfg.variant))
        p.temporal = make_temporal_attn(cfg.hidden, block_seed("temporal"));
    p.phi_l = make_head(cfg.head_input_width(), cfg.mlp_width, cfg.label_output_width(),
                        cfg.dropout_rate, block_seed("phi_l"));
    if (has_domain_head(cfg.variant))
        p.phi_d = make_head(cfg.head_input_width(), cfg.mlp_width, 2, cfg.dropout_rate,
                            block_seed("phi_d"));
    return p;
}

CmtnParams lift_params(Tape& t, const CmtnParams& p) {
    CmtnParams out = p;
    out.visit([&t](const std::string&, Tensor& tensor) { tensor = t.leaf(tensor); });
    return out;
}

ForwardRecord forward_nodes(Tape& t, const CmtnParams& lifted, const ModelConfig& cfg,
                            const Tensor& x, DomainTag tag, const ForwardOptions& opt) {
    if (cfg.variant == Variant::LSTM_S2T && tag == DomainTag::Target && opt.training)
        throw UsageError("LSTM_S2T trains on source samples only");
    if (x.rank() != 2 || x.dim(0) != cfg.window || x.dim(1) != cfg.sensors)
        throw ShapeError("forward: sample shape " + shape_string(x.shape()) + " does not match [" +
                         std::to_string(cfg.window) + " x " + std::to_string(cfg.sensors) + "]");

    Tensor f;
    if (has_extractors(cfg.variant)) {
        const ExtractorParams& ex = tag == DomainTag::Source ? *lifted.theta_S : *lifted.theta_T;
        f = feature_extract(t, x, ex);
    } else if (has_shared_proj(cfg.variant)) {
        f = t.add_rowwise(t.matmul(x, lifted.shared_proj->weight), lifted.shared_proj->bias);
    } else {
        f = x;
    }

    const int width = f.dim(1);
    LstmState state{t.leaf(Tensor::zeros({cfg.hidden})), t.leaf(Tensor::zeros({cfg.hidden}))};
    std::vector<Tensor> hidden;
    std::vector<Tensor> alpha_rows;
    hidden.reserve(static_cast<std::size_t>(cfg.window));
    for (int step = 0; step < cfg.window; ++step) {
        Tensor f_t = t.row(f, step);
        Tensor input = f_t;
        if (has_dynamic_attn(cfg.variant)) {
            DynamicAttnResult r = dynamic_attention(t, state.h, f_t, *lifted.dyn);
            input = r.weighted;
            alpha_rows.push_back(t.reshape(r.alpha, {1, width}));
        }
        state = lstm_step(t, input, state, lifted.lstm);
        hidden.push_back(state.h);
    }

    ForwardRecord rec;
    if (has_temporal_attn(cfg.variant)) {
        TemporalAttnResult r = temporal_attention(t, hidden, *lifted.temporal);
        rec.context = r.context;
        rec.gamma = r.gamma;
    } else {
        rec.context = hidden.back();
    }
    if (!alpha_rows.empty()) rec.alpha = t.concat(alpha_rows, 0);

    rec.label_out = head_forward(t, rec.context, lifted.phi_l, opt.training,
                                 rng::mix(opt.dropout_seed, "drop/label"));
    if (opt.want_domain && lifted.phi_d) {
        Tensor reversed = t.gradient_reversal(rec.context, opt.lambda);
        rec.domain_logits = head_forward(t, reversed, *lifted.phi_d, opt.training,
                                         rng::mix(opt.dropout_seed, "drop/domain"));
    }
    return rec;
}

ForwardRecord forward(const CmtnParams& params, const ModelConfig& cfg,
                      const TimeSeriesSample& sample, const ForwardOptions& opt) {
    cfg.validate();
    Tape t;
    CmtnParams lifted = lift_params(t, params);
    return forward_nodes(t, lifted, cfg, t.leaf(sample.x), sample.domain, opt);
}

LossParts total_loss_nodes(Tape& t, const CmtnParams& lifted, const ModelConfig& cfg,
                           const std::vector<TimeSeriesSample>& batch_label,
                           const std::vector<std::uint64_t>& seeds_label,
                           const std::vector<TimeSeriesSample>& batch_domain,
                           const std::vector<std::uint64_t>& seeds_domain,
                           double lambda, bool training) {
    if (batch_label.empty()) throw UsageError("label batch is empty");
    if (seeds_label.size() != batch_label.size() || seeds_domain.size() != batch_domain.size())
        throw ArgumentError("dropout seed lists must run parallel to the batches");

    std::vector<Tensor> preds;
    std::vector<double> reg_targets;
    std::vector<int> class_targets;
    preds.reserve(batch_label.size());
    for (std::size_t i = 0; i < batch_label.size(); ++i) {
        const TimeSeriesSample& s = batch_label[i];
        if (s.domain != DomainTag::Source)
            throw UsageError("label loss takes labelled source samples; sample " +
                             std::to_string(i) + " is from the target domain");
        ForwardOptions opt{training, lambda, seeds_label[i], false};
        ForwardRecord rec = forward_nodes(t, lifted, cfg, t.leaf(s.x), DomainTag::Source, opt);
        preds.push_back(rec.label_out);
        reg_targets.push_back(s.label);
        class_targets.push_back(s.label_class);
    }

    LossParts out;
    out.label = label_loss(t, preds, cfg.task, reg_targets, class_targets);

    if (!has_domain_head(cfg.variant)) {
        if (!batch_domain.empty())
            throw UsageError(to_string(cfg.variant) + " has no domain head; domain batch must be empty");
        out.total = out.label;
        return out;
    }

    if (batch_domain.empty()) throw UsageError("domain batch is empty for an adaptive variant");
    bool saw_source = false, saw_target = false;
    for (const TimeSeriesSample& s : batch_domain) {
        saw_source = saw_source || s.domain == DomainTag::Source;
        saw_target = saw_target || s.domain == DomainTag::Target;
    }
    if (!saw_source || !saw_target)
        throw UsageError(std::string("domain batch must mix both domains; missing ") +
                         (saw_source ? "target" : "source") + " samples");

    std::vector<Tensor> logits;
    std::vector<int> domains;
    logits.reserve(batch_domain.size());
    for (std::size_t i = 0; i < batch_domain.size(); ++i) {
        const TimeSeriesSample& s = batch_domain[i];
        ForwardOptions opt{training, lambda, seeds_domain[i], true};
        ForwardRecord rec = forward_nodes(t, lifted, cfg, t.leaf(s.x), s.domain, opt);
        logits.push_back(rec.domain_logits);
        domains.push_back(domain_label(s.domain));
    }
    out.domain = domain_loss(t, logits, domains);
    out.total = t.add(out.label, out.domain);
    return out;
}

double total_loss(const CmtnParams& params, const ModelConfig& cfg,
                  const std::vector<TimeSeriesSample>& batch_label,
                  const std::vector<TimeSeriesSample>& batch_domain, double lambda) {
    cfg.validate();
    Tape t;
    CmtnParams lifted = lift_params(t, params);
    std::vector<std::uint64_t> seeds_label(batch_label.size(), 0);
    std::vector<std::uint64_t> seeds_domain(batch_domain.size(), 0);
    return total_loss_nodes(t, lifted, cfg, batch_label, seeds_label, batch_domain, seeds_domain,
                            lambda, false)
        .total.scalar_value();
}

Prediction predict_target(const CmtnParams& params, const ModelConfig& cfg,
                          const TimeSeriesSample& sample) {
    cfg.validate();
    Tape t;
    CmtnParams lifted = lift_params(t, params);
    ForwardOptions opt; // evaluation defaults: no dropout, no domain branch
    ForwardRecord rec = forward_nodes(t, lifted, cfg, t.leaf(sample.x), DomainTag::Target, opt);

    Prediction out;
    if (cfg.task == Task::Regression) {
        out.value = rec.label_out.scalar_value();
        return out;
    }
    Tensor probs = t.softmax(rec.label_out);
    out.class_scores = probs.values();
    out.cls = static_cast<int>(std::max_element(out.class_scores.begin(), out.class_scores.end()) -
                               out.class_scores.begin());
    out.value = out.class_scores[1]; // fault-class probability drives ranking metrics
    return out;
}

} // namespace cmtn
