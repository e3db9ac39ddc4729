#include "cmtn/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include "cmtn/textio.hpp"

namespace cmtn {

namespace {

constexpr const char* kMagic = "cmtn_checkpoint v1";

std::string hexfloat(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_hexfloat(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || s.empty())
        throw DataError(what + ": bad value '" + s + "'");
    return v;
}

} // namespace

void save_checkpoint(const std::string& path, const CmtnParams& params, const ModelConfig& cfg,
                     const std::string& training_config_text) {
    std::ostringstream out;
    out << kMagic << '\n';
    out << "variant " << to_string(cfg.variant) << '\n';
    out << "task " << to_string(cfg.task) << '\n';
    out << "sensors " << cfg.sensors << '\n';
    out << "window " << cfg.window << '\n';
    out << "features " << cfg.features << '\n';
    out << "hidden " << cfg.hidden << '\n';
    out << "attn_width " << cfg.attn_width << '\n';
    out << "mlp_width " << cfg.mlp_width << '\n';
    out << "label_classes " << cfg.label_classes << '\n';
    out << "dropout_rate " << hexfloat(cfg.dropout_rate) << '\n';
    std::string blob = training_config_text; // normalized to end in a newline
    if (!blob.empty() && blob.back() != '\n') blob += '\n';
    out << "training_config_lines "
        << std::count(blob.begin(), blob.end(), '\n') << '\n'
        << blob;
    params.visit([&out](const std::string& name, const Tensor& t) {
        out << "tensor " << name;
        for (int d : t.shape()) out << ' ' << d;
        out << '\n';
        const auto& v = t.values();
        for (std::size_t i = 0; i < v.size(); ++i)
            out << hexfloat(v[i]) << (i + 1 == v.size() ? '\n' : ' ');
    });
    out << "end\n";
    atomic_write_text(path, out.str());
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::vector<std::string> lines = split(read_text_file(path), '\n');
    std::size_t li = 0;
    auto next_line = [&]() -> const std::string& {
        if (li >= lines.size()) throw DataError(path + ": truncated checkpoint");
        return lines[li++];
    };
    if (next_line() != kMagic) throw DataError(path + ": not a checkpoint file");

    auto field = [&](const char* key) {
        const std::string& line = next_line();
        const std::string prefix = std::string(key) + ' ';
        if (line.rfind(prefix, 0) != 0)
            throw DataError(path + ": expected '" + key + "', got '" + line + "'");
        return line.substr(prefix.size());
    };

    LoadedCheckpoint out;
    ModelConfig& cfg = out.config;
    cfg.variant = variant_from_string(field("variant"));
    cfg.task = task_from_string(field("task"));
    cfg.sensors = static_cast<int>(parse_integer(field("sensors"), path + " sensors"));
    cfg.window = static_cast<int>(parse_integer(field("window"), path + " window"));
    cfg.features = static_cast<int>(parse_integer(field("features"), path + " features"));
    cfg.hidden = static_cast<int>(parse_integer(field("hidden"), path + " hidden"));
    cfg.attn_width = static_cast<int>(parse_integer(field("attn_width"), path + " attn_width"));
    cfg.mlp_width = static_cast<int>(parse_integer(field("mlp_width"), path + " mlp_width"));
    cfg.label_classes =
        static_cast<int>(parse_integer(field("label_classes"), path + " label_classes"));
    cfg.dropout_rate = parse_hexfloat(field("dropout_rate"), path + " dropout_rate");
    const long long tc_lines =
        parse_integer(field("training_config_lines"), path + " training_config_lines");
    std::ostringstream tc;
    for (long long i = 0; i < tc_lines; ++i) tc << next_line() << '\n';
    out.training_config_text = tc.str();

    // Shape skeleton for the variant, overwritten tensor by tensor.
    out.params = init_params(cfg, 0);
    std::map<std::string, Tensor*> slots;
    out.params.visit([&slots](const std::string& name, Tensor& t) { slots[name] = &t; });
    std::size_t filled = 0;

    while (true) {
        const std::string& line = next_line();
        if (line == "end") break;
        std::vector<std::string> head = split(line, ' ');
        if (head.size() < 3 || head[0] != "tensor")
            throw DataError(path + ": expected a tensor header, got '" + line + "'");
        const std::string& name = head[1];
        auto it = slots.find(name);
        if (it == slots.end())
            throw DataError(path + ": tensor '" + name + "' does not belong to variant " +
                            to_string(cfg.variant));
        std::vector<int> shape;
        for (std::size_t i = 2; i < head.size(); ++i)
            shape.push_back(static_cast<int>(parse_integer(head[i], path + " shape of " + name)));
        if (shape != it->second->shape())
            throw DataError(path + ": tensor '" + name + "' has shape " + shape_string(shape) +
                            ", expected " + shape_string(it->second->shape()));
        std::vector<std::string> cells = split(next_line(), ' ');
        if (static_cast<int>(cells.size()) != it->second->size())
            throw DataError(path + ": tensor '" + name + "' has " + std::to_string(cells.size()) +
                            " values, expected " + std::to_string(it->second->size()));
        std::vector<double> values;
        values.reserve(cells.size());
        for (const std::string& c : cells) values.push_back(parse_hexfloat(c, path + " " + name));
        *it->second = Tensor(shape, std::move(values));
        ++filled;
    }
    if (filled != slots.size())
        throw DataError(path + ": checkpoint holds " + std::to_string(filled) + " tensors, variant " +
                        to_string(cfg.variant) + " needs " + std::to_string(slots.size()));
    return out;
}

} // namespace cmtn
