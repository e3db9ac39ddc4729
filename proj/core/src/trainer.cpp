#include "cmtn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "cmtn/errors.hpp"
#include "cmtn/textio.hpp"

namespace cmtn {

void TrainingConfig::validate() const {
    model_config().validate();
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (has_domain_head(variant)) {
        if (batch_size < 2) throw ConfigError("batch_size must be at least 2 for adaptive variants");
        if (batch_size % 2 != 0)
            throw ConfigError("batch_size must be even for adaptive variants (half per domain)");
    }
    if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
    if (lambda < 0) throw ConfigError("lambda must be nonnegative");
    if (dropout_rate < 0 || dropout_rate >= 1)
        throw ConfigError("dropout_rate must lie in [0, 1)");
    if (epochs < 0) throw ConfigError("epochs must be nonnegative");
    if (adam_beta1 <= 0 || adam_beta1 >= 1) throw ConfigError("adam_beta1 must lie in (0, 1)");
    if (adam_beta2 <= 0 || adam_beta2 >= 1) throw ConfigError("adam_beta2 must lie in (0, 1)");
    if (adam_eps <= 0) throw ConfigError("adam_eps must be positive");
    if (clip_norm < 0) throw ConfigError("clip_norm must be nonnegative (0 disables)");
}

ModelConfig TrainingConfig::model_config() const {
    ModelConfig m;
    m.variant = variant;
    m.task = task;
    m.sensors = sensors;
    m.window = window;
    m.features = features;
    m.hidden = hidden;
    m.attn_width = attn_width;
    m.mlp_width = mlp_width;
    m.dropout_rate = dropout_rate;
    return m;
}

TrainingConfig TrainingConfig::desk_profile(Variant v, Task task) {
    TrainingConfig c;
    c.variant = v;
    c.task = task;
    return c; // struct defaults are the desk profile
}

TrainingConfig TrainingConfig::paper_profile(Variant v, Task task) {
    TrainingConfig c;
    c.variant = v;
    c.task = task;
    c.desk_scale = false;
    c.batch_size = 512;
    c.hidden = 500;
    c.mlp_width = 100;
    c.features = 100;
    c.attn_width = 100;
    c.learning_rate = 0.003;
    c.lambda = 0.005;
    c.dropout_rate = 0.1;
    return c;
}

namespace {

bool parse_bool(const std::string& v, const std::string& what) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw DataError(what + ": expected true/false, got '" + v + "'");
}

} // namespace

TrainingConfig parse_training_config(const std::string& text) {
    TrainingConfig cfg;
    std::vector<std::string> seen;
    for (const std::string& raw : split(text, '\n')) {
        std::string line = raw;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("training config line is not 'key = value': '" + raw + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (std::find(seen.begin(), seen.end(), key) != seen.end())
            throw ConfigError("duplicate training config key '" + key + "'");
        seen.push_back(key);

        if (key == "variant") cfg.variant = variant_from_string(val);
        else if (key == "task") cfg.task = task_from_string(val);
        else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_integer(val, key));
        else if (key == "learning_rate") cfg.learning_rate = parse_double(val, key);
        else if (key == "lambda") cfg.lambda = parse_double(val, key);
        else if (key == "dropout_rate") cfg.dropout_rate = parse_double(val, key);
        else if (key == "epochs") cfg.epochs = static_cast<int>(parse_integer(val, key));
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_integer(val, key));
        else if (key == "adam_beta1") cfg.adam_beta1 = parse_double(val, key);
        else if (key == "adam_beta2") cfg.adam_beta2 = parse_double(val, key);
        else if (key == "adam_eps") cfg.adam_eps = parse_double(val, key);
        else if (key == "clip_norm") cfg.clip_norm = parse_double(val, key);
        else if (key == "desk_scale") cfg.desk_scale = parse_bool(val, key);
        else if (key == "sensors") cfg.sensors = static_cast<int>(parse_integer(val, key));
        else if (key == "window") cfg.window = static_cast<int>(parse_integer(val, key));
        else if (key == "features") cfg.features = static_cast<int>(parse_integer(val, key));
        else if (key == "hidden") cfg.hidden = static_cast<int>(parse_integer(val, key));
        else if (key == "attn_width") cfg.attn_width = static_cast<int>(parse_integer(val, key));
        else if (key == "mlp_width") cfg.mlp_width = static_cast<int>(parse_integer(val, key));
        else throw ConfigError("unknown training config key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

std::string serialize_training_config(const TrainingConfig& cfg) {
    std::ostringstream out;
    out << "variant = " << to_string(cfg.variant) << '\n';
    out << "task = " << to_string(cfg.task) << '\n';
    out << "batch_size = " << cfg.batch_size << '\n';
    out << "learning_rate = " << format_double(cfg.learning_rate) << '\n';
    out << "lambda = " << format_double(cfg.lambda) << '\n';
    out << "dropout_rate = " << format_double(cfg.dropout_rate) << '\n';
    out << "epochs = " << cfg.epochs << '\n';
    out << "seed = " << cfg.seed << '\n';
    out << "adam_beta1 = " << format_double(cfg.adam_beta1) << '\n';
    out << "adam_beta2 = " << format_double(cfg.adam_beta2) << '\n';
    out << "adam_eps = " << format_double(cfg.adam_eps) << '\n';
    out << "clip_norm = " << format_double(cfg.clip_norm) << '\n';
    out << "desk_scale = " << (cfg.desk_scale ? "true" : "false") << '\n';
    out << "sensors = " << cfg.sensors << '\n';
    out << "window = " << cfg.window << '\n';
    out << "features = " << cfg.features << '\n';
    out << "hidden = " << cfg.hidden << '\n';
    out << "attn_width = " << cfg.attn_width << '\n';
    out << "mlp_width = " << cfg.mlp_width << '\n';
    return out.str();
}

OptimizerState make_optimizer_state(const CmtnParams& params) {
    OptimizerState st;
    params.visit([&st](const std::string&, const Tensor& t) {
        st.m.push_back(Tensor::zeros(t.shape()));
        st.v.push_back(Tensor::zeros(t.shape()));
    });
    return st;
}

double global_grad_norm(const std::vector<Tensor>& grads) {
    double sq = 0.0;
    for (const Tensor& g : grads)
        for (double x : g.values()) sq += x * x;
    return std::sqrt(sq);
}

void adam_step(CmtnParams& params, const CmtnParams& lifted, const GradientMap& grads,
               OptimizerState& state, const TrainingConfig& cfg) {
    std::vector<Tensor> flat;
    lifted.visit([&](const std::string& name, const Tensor& leaf) {
        if (!grads.contains(leaf))
            throw ArgumentError("gradient map is missing parameter '" + name + "'");
        flat.push_back(grads.at(leaf));
    });
    if (flat.size() != state.m.size())
        throw ArgumentError("optimizer state does not match the parameter set");

    double scale = 1.0;
    if (cfg.clip_norm > 0) {
        const double norm = global_grad_norm(flat);
        if (norm > cfg.clip_norm) scale = cfg.clip_norm / norm;
    }

    state.step += 1;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    std::size_t i = 0;
    params.visit([&](const std::string& name, Tensor& p) {
        const Tensor& g = flat[i];
        if (g.shape() != p.shape())
            throw ShapeError("gradient for '" + name + "' has shape " + shape_string(g.shape()) +
                             ", parameter has " + shape_string(p.shape()));
        const auto& gv = g.values();
        const auto& pv = p.values();
        const auto& mv = state.m[i].values();
        const auto& vv = state.v[i].values();
        std::vector<double> m_new(gv.size()), v_new(gv.size()), p_new(gv.size());
        for (std::size_t j = 0; j < gv.size(); ++j) {
            const double gj = gv[j] * scale;
            m_new[j] = b1 * mv[j] + (1.0 - b1) * gj;
            v_new[j] = b2 * vv[j] + (1.0 - b2) * gj * gj;
            const double mhat = m_new[j] / corr1;
            const double vhat = v_new[j] / corr2;
            p_new[j] = pv[j] - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
        state.m[i] = Tensor(p.shape(), std::move(m_new));
        state.v[i] = Tensor(p.shape(), std::move(v_new));
        p = Tensor(p.shape(), std::move(p_new));
        ++i;
    });
}

DomainDataset downsample_normals(const DomainDataset& ds, std::uint64_t seed) {
    std::vector<int> normal, faulty;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const int c = ds.samples[i].label_class;
        if (c != 0 && c != 1)
            throw DataError("downsample_normals needs binary labels; sample " + std::to_string(i) +
                            " has class " + std::to_string(c));
        (c == 1 ? faulty : normal).push_back(static_cast<int>(i));
    }
    if (faulty.empty()) throw DataError("downsample_normals: dataset has no faulty samples");
    if (normal.size() <= faulty.size()) return ds;

    rng::Stream s(rng::mix(seed, "downsample"));
    rng::shuffle(normal, s);
    normal.resize(faulty.size());
    std::vector<int> keep = normal;
    keep.insert(keep.end(), faulty.begin(), faulty.end());
    std::sort(keep.begin(), keep.end()); // preserve time order

    DomainDataset out;
    out.domain = ds.domain;
    out.samples.reserve(keep.size());
    for (int i : keep) out.samples.push_back(ds.samples[static_cast<std::size_t>(i)]);
    return out;
}

MinibatchIter::Cycler::Cycler(int n, rng::Stream s) : stream(s) {
    order.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng::shuffle(order, stream);
}

int MinibatchIter::Cycler::next() {
    if (pos == order.size()) {
        rng::shuffle(order, stream);
        pos = 0;
    }
    return order[pos++];
}

MinibatchIter::MinibatchIter(int source_size, int target_size, const TrainingConfig& cfg,
                             bool adaptive)
    : batch_(cfg.batch_size),
      source_size_(source_size),
      adaptive_(adaptive),
      label_stream_(rng::mix(cfg.seed, "shuffle/source")),
      mix_source_(adaptive ? source_size : 0, rng::Stream(rng::mix(cfg.seed, "shuffle/mix_source"))),
      mix_target_(adaptive ? target_size : 0, rng::Stream(rng::mix(cfg.seed, "shuffle/mix_target"))) {
    if (batch_ > source_size)
        throw ConfigError("batch_size " + std::to_string(batch_) + " exceeds the source set (" +
                          std::to_string(source_size) + " samples)");
    if (adaptive && batch_ / 2 > target_size)
        throw ConfigError("batch_size/2 = " + std::to_string(batch_ / 2) +
                          " exceeds the target set (" + std::to_string(target_size) + " samples)");
    steps_per_epoch_ = source_size / batch_;
    label_order_.resize(static_cast<std::size_t>(source_size));
    for (int i = 0; i < source_size; ++i) label_order_[static_cast<std::size_t>(i)] = i;
}

std::vector<MinibatchStep> MinibatchIter::next_epoch() {
    rng::shuffle(label_order_, label_stream_);
    std::vector<MinibatchStep> steps(static_cast<std::size_t>(steps_per_epoch_));
    for (int s = 0; s < steps_per_epoch_; ++s) {
        MinibatchStep& step = steps[static_cast<std::size_t>(s)];
        step.label.assign(label_order_.begin() + static_cast<std::ptrdiff_t>(s) * batch_,
                          label_order_.begin() + static_cast<std::ptrdiff_t>(s + 1) * batch_);
        if (adaptive_) {
            step.mix_source.reserve(static_cast<std::size_t>(batch_ / 2));
            step.mix_target.reserve(static_cast<std::size_t>(batch_ / 2));
            for (int i = 0; i < batch_ / 2; ++i) step.mix_source.push_back(mix_source_.next());
            for (int i = 0; i < batch_ / 2; ++i) step.mix_target.push_back(mix_target_.next());
        }
    }
    return steps;
}

TrainResult train(const TrainingConfig& cfg, const DomainDataset& source,
                  const DomainDataset* target) {
    cfg.validate();
    const ModelConfig model_cfg = cfg.model_config();
    const bool adaptive = has_domain_head(cfg.variant);

    if (source.samples.empty()) throw UsageError("training needs a nonempty source set");
    if (source.domain != DomainTag::Source)
        throw UsageError("the labelled training set must carry the source domain tag");
    if (source.window() != cfg.window || source.sensors() != cfg.sensors)
        throw ConfigError("source set is " + std::to_string(source.window()) + "x" +
                          std::to_string(source.sensors()) + " but the config expects " +
                          std::to_string(cfg.window) + "x" + std::to_string(cfg.sensors));
    if (adaptive) {
        if (target == nullptr || target->samples.empty())
            throw UsageError(to_string(cfg.variant) + " adapts domains and needs a target set");
        if (target->domain != DomainTag::Target)
            throw UsageError("the adaptation set must carry the target domain tag");
        if (target->window() != cfg.window || target->sensors() != cfg.sensors)
            throw ConfigError("target set shape does not match the config");
    }

    TrainResult result;
    result.seed = cfg.seed;
    result.config = cfg;
    result.params = init_params(model_cfg, cfg.seed);
    const auto t0 = std::chrono::steady_clock::now();

    OptimizerState opt = make_optimizer_state(result.params);
    MinibatchIter iter(static_cast<int>(source.samples.size()),
                       adaptive ? static_cast<int>(target->samples.size()) : 0, cfg, adaptive);

    // The reversal coefficient warms up to cfg.lambda and anneals back toward
    // zero over the run. The warm-up lets the domain head start steering the
    // features only once they carry label-relevant structure; the cool-down
    // parks the target extractor at its best-aligned state instead of letting
    // it keep random-walking around the fooled-head equilibrium (Adam rescales
    // even a tiny adversarial gradient to full-size steps, so a parameter that
    // sees no other loss term never stops moving while the coefficient is
    // nonzero). cfg.lambda = 0 keeps the coefficient exactly zero at every step.
    const long long total_steps =
        static_cast<long long>(cfg.epochs) * static_cast<long long>(iter.steps_per_epoch());
    auto reversal_coeff = [&](long long step) {
        if (cfg.lambda == 0.0 || total_steps <= 1) return cfg.lambda;
        const double p = static_cast<double>(step) / static_cast<double>(total_steps - 1);
        const double warm = 2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0;
        return cfg.lambda * warm * (1.0 - p);
    };

    long long global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double label_sum = 0.0, domain_sum = 0.0;
        const std::vector<MinibatchStep> steps = iter.next_epoch();
        for (std::size_t s = 0; s < steps.size(); ++s, ++global_step) {
            const MinibatchStep& step = steps[s];
            std::vector<TimeSeriesSample> batch_label, batch_mix;
            std::vector<std::uint64_t> seeds_label, seeds_mix;
            batch_label.reserve(step.label.size());
            for (std::size_t i = 0; i < step.label.size(); ++i) {
                batch_label.push_back(source.samples[static_cast<std::size_t>(step.label[i])]);
                seeds_label.push_back(
                    rng::mix(cfg.seed, "drop/label", static_cast<std::uint64_t>(global_step), i));
            }
            for (std::size_t i = 0; i < step.mix_source.size(); ++i) {
                batch_mix.push_back(source.samples[static_cast<std::size_t>(step.mix_source[i])]);
                seeds_mix.push_back(
                    rng::mix(cfg.seed, "drop/mix", static_cast<std::uint64_t>(global_step), i));
            }
            for (std::size_t i = 0; i < step.mix_target.size(); ++i) {
                batch_mix.push_back(target->samples[static_cast<std::size_t>(step.mix_target[i])]);
                seeds_mix.push_back(rng::mix(cfg.seed, "drop/mix", static_cast<std::uint64_t>(global_step),
                                             step.mix_source.size() + i));
            }

            Tape tape;
            CmtnParams lifted = lift_params(tape, result.params);
            LossParts parts;
            try {
                parts = total_loss_nodes(tape, lifted, model_cfg, batch_label, seeds_label,
                                         batch_mix, seeds_mix, reversal_coeff(global_step), true);
            } catch (const NonFiniteError& e) {
                throw TrainError("non-finite value at epoch " + std::to_string(epoch) + " step " +
                                 std::to_string(s) + ": " + e.what());
            }
            const double label_value = parts.label.scalar_value();
            const double domain_value = parts.domain.defined() ? parts.domain.scalar_value() : 0.0;
            if (!std::isfinite(label_value) || !std::isfinite(domain_value))
                throw TrainError("loss is not finite at epoch " + std::to_string(epoch) + " step " +
                                 std::to_string(s) + " (first offending batch index " +
                                 std::to_string(s) + ")");
            label_sum += label_value;
            domain_sum += domain_value;

            std::vector<Tensor> leaves;
            lifted.visit([&leaves](const std::string&, const Tensor& t) { leaves.push_back(t); });
            GradientMap grads = tape.backward(parts.total, leaves);
            adam_step(result.params, lifted, grads, opt, cfg);
        }
        const double n = static_cast<double>(steps.size());
        result.history.push_back({label_sum / n, domain_sum / n});
    }

    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

} // namespace cmtn
