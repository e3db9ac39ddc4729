#include "cmtn/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace cmtn {

namespace {

int product(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) n *= d;
    return n;
}

void check_shape_dims(const std::vector<int>& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (int d : shape)
        if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
}

std::atomic<std::uint64_t> next_tape_id{1};

} // namespace

std::string shape_string(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += " x ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) {
    check_shape_dims(shape);
    if (product(shape) != static_cast<int>(values.size()))
        throw ShapeError("tensor shape " + shape_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
    shape_ = std::move(shape);
    data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(std::vector<int> shape) {
    check_shape_dims(shape);
    std::vector<double> v(static_cast<std::size_t>(product(shape)), 0.0);
    return Tensor(std::move(shape), std::move(v));
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    check_shape_dims(shape);
    std::vector<double> v(static_cast<std::size_t>(product(shape)), value);
    return Tensor(std::move(shape), std::move(v));
}

int Tensor::size() const { return product(shape_); }

const std::vector<double>& Tensor::values() const {
    if (!data_) throw UsageError("reading values of a default-constructed tensor");
    return *data_;
}

double Tensor::at(int r, int c) const {
    if (rank() != 2)
        throw ShapeError("at(r, c) requires a rank-2 tensor, got " + shape_string(shape_));
    if (r < 0 || r >= dim(0) || c < 0 || c >= dim(1))
        throw ArgumentError("index (" + std::to_string(r) + ", " + std::to_string(c) +
                            ") outside tensor " + shape_string(shape_));
    return values()[static_cast<std::size_t>(r) * static_cast<std::size_t>(dim(1)) +
                    static_cast<std::size_t>(c)];
}

double Tensor::scalar_value() const {
    if (size() != 1)
        throw ShapeError("scalar_value() requires a single-element tensor, got " + shape_string(shape_));
    return values()[0];
}

const Tensor& GradientMap::at(const Tensor& leaf) const {
    auto it = by_node_.find(leaf.node());
    if (it == by_node_.end())
        throw UsageError("gradient requested for a tensor that was not passed to backward()");
    return it->second;
}

// ---------------------------------------------------------------------------
// Tape

struct Tape::AdjointStore {
    explicit AdjointStore(const std::vector<Node>& nodes)
        : nodes(nodes), grads(nodes.size()) {}

    // Adjoint buffer for a node, zero-initialized on first touch.
    std::vector<double>& acc(int node) {
        auto& g = grads[static_cast<std::size_t>(node)];
        if (g.empty()) g.assign(static_cast<std::size_t>(nodes[static_cast<std::size_t>(node)].size), 0.0);
        return g;
    }

    bool touched(int node) const { return !grads[static_cast<std::size_t>(node)].empty(); }

    const std::vector<Node>& nodes;
    std::vector<std::vector<double>> grads;
};

Tape::Tape() : id_(next_tape_id.fetch_add(1)) {}

void Tape::require_attached(const char* op, const Tensor& t) const {
    if (!t.defined())
        throw UsageError(std::string(op) + ": input tensor is default-constructed");
    if (t.node_ < 0)
        throw UsageError(std::string(op) + ": input tensor is detached; attach it with Tape::leaf()");
    if (t.tape_id_ != id_)
        throw UsageError(std::string(op) + ": input tensor belongs to a different tape");
}

Tensor Tape::emit(std::vector<int> shape, std::vector<double> values,
                  std::vector<int> inputs, BackFn back, const char* op) {
#if defined(CMTN_CHECK_FINITE)
    for (double v : values)
        if (!std::isfinite(v))
            throw NonFiniteError(std::string(op) + " produced a non-finite value");
#else
    (void)op;
#endif
    Tensor t(std::move(shape), std::move(values));
    t.node_ = static_cast<int>(nodes_.size());
    t.tape_id_ = id_;
    nodes_.push_back(Node{std::move(inputs), t.size(), std::move(back)});
    return t;
}

Tensor Tape::emit_alias(const Tensor& src, std::vector<int> shape,
                        std::vector<int> inputs, BackFn back) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = src.data_; // forward is the identity, bit for bit
    t.node_ = static_cast<int>(nodes_.size());
    t.tape_id_ = id_;
    nodes_.push_back(Node{std::move(inputs), t.size(), std::move(back)});
    return t;
}

Tensor Tape::leaf(const Tensor& values) {
    if (!values.defined()) throw UsageError("leaf: input tensor is default-constructed");
    Tensor t;
    t.shape_ = values.shape_;
    t.data_ = values.data_;
    t.node_ = static_cast<int>(nodes_.size());
    t.tape_id_ = id_;
    nodes_.push_back(Node{{}, t.size(), BackFn{}});
    return t;
}

Tensor Tape::leaf(std::vector<int> shape, std::vector<double> values) {
    return leaf(Tensor(std::move(shape), std::move(values)));
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    require_attached("matmul", a);
    require_attached("matmul", b);
    if (a.rank() > 2 || b.rank() > 2)
        throw ShapeError("matmul supports rank 1 and 2, got " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
    const bool a_vec = a.rank() == 1;
    const bool b_vec = b.rank() == 1;
    const int m = a_vec ? 1 : a.dim(0);
    const int k = a_vec ? a.dim(0) : a.dim(1);
    const int k2 = b.dim(0);
    const int n = b_vec ? 1 : b.dim(1);
    if (k != k2)
        throw ShapeError("matmul: inner dimensions differ: " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));

    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(static_cast<std::size_t>(m) * static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double aip = av[static_cast<std::size_t>(i) * k + p];
            if (aip == 0.0) continue;
            const double* brow = bv.data() + static_cast<std::size_t>(p) * n;
            double* orow = out.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }

    std::vector<int> shape;
    if (a_vec && b_vec) shape = {1};
    else if (a_vec) shape = {n};
    else if (b_vec) shape = {m};
    else shape = {m, n};

    const int an = a.node(), bn = b.node();
    auto adata = a.data_;
    auto bdata = b.data_;
    BackFn back = [an, bn, adata, bdata, m, k, n](std::span<const double> g, AdjointStore& s) {
        auto& da = s.acc(an);
        auto& db = s.acc(bn);
        const auto& A = *adata;
        const auto& B = *bdata;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                const double gij = g[static_cast<std::size_t>(i) * n + j];
                if (gij == 0.0) continue;
                for (int p = 0; p < k; ++p) {
                    da[static_cast<std::size_t>(i) * k + p] += gij * B[static_cast<std::size_t>(p) * n + j];
                    db[static_cast<std::size_t>(p) * n + j] += gij * A[static_cast<std::size_t>(i) * k + p];
                }
            }
    };
    return emit(std::move(shape), std::move(out), {an, bn}, std::move(back), "matmul");
}

namespace {
void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shapes differ: " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
}
} // namespace

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    require_attached("add", a);
    require_attached("add", b);
    require_same_shape("add", a, b);
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    const int an = a.node(), bn = b.node();
    BackFn back = [an, bn](std::span<const double> g, AdjointStore& s) {
        auto& da = s.acc(an);
        auto& db = s.acc(bn);
        for (std::size_t i = 0; i < g.size(); ++i) {
            da[i] += g[i];
            db[i] += g[i];
        }
    };
    return emit(a.shape(), std::move(out), {an, bn}, std::move(back), "add");
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    require_attached("sub", a);
    require_attached("sub", b);
    require_same_shape("sub", a, b);
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
    const int an = a.node(), bn = b.node();
    BackFn back = [an, bn](std::span<const double> g, AdjointStore& s) {
        auto& da = s.acc(an);
        auto& db = s.acc(bn);
        for (std::size_t i = 0; i < g.size(); ++i) {
            da[i] += g[i];
            db[i] -= g[i];
        }
    };
    return emit(a.shape(), std::move(out), {an, bn}, std::move(back), "sub");
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    require_attached("mul", a);
    require_attached("mul", b);
    require_same_shape("mul", a, b);
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
    const int an = a.node(), bn = b.node();
    auto adata = a.data_;
    auto bdata = b.data_;
    BackFn back = [an, bn, adata, bdata](std::span<const double> g, AdjointStore& s) {
        auto& da = s.acc(an);
        auto& db = s.acc(bn);
        const auto& A = *adata;
        const auto& B = *bdata;
        for (std::size_t i = 0; i < g.size(); ++i) {
            da[i] += g[i] * B[i];
            db[i] += g[i] * A[i];
        }
    };
    return emit(a.shape(), std::move(out), {an, bn}, std::move(back), "mul");
}

Tensor Tape::tanh(const Tensor& x) {
    require_attached("tanh", x);
    const auto& xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::tanh(xv[i]);
    auto ydata = std::make_shared<const std::vector<double>>(out); // copy kept for the adjoint rule
    const int xn = x.node();
    BackFn back = [xn, ydata](std::span<const double> g, AdjointStore& s) {
        auto& dx = s.acc(xn);
        const auto& y = *ydata;
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * (1.0 - y[i] * y[i]);
    };
    return emit(x.shape(), std::move(out), {xn}, std::move(back), "tanh");
}

Tensor Tape::sigmoid(const Tensor& x) {
    require_attached("sigmoid", x);
    const auto& xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double v = xv[i];
        if (v >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            out[i] = e / (1.0 + e);
        }
    }
    auto ydata = std::make_shared<const std::vector<double>>(out);
    const int xn = x.node();
    BackFn back = [xn, ydata](std::span<const double> g, AdjointStore& s) {
        auto& dx = s.acc(xn);
        const auto& y = *ydata;
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
    };
    return emit(x.shape(), std::move(out), {xn}, std::move(back), "sigmoid");
}

Tensor Tape::exp(const Tensor& x) {
    require_attached("exp", x);
    const auto& xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::exp(xv[i]);
    auto ydata = std::make_shared<const std::vector<double>>(out);
    const int xn = x.node();
    BackFn back = [xn, ydata](std::span<const double> g, AdjointStore& s) {
        auto& dx = s.acc(xn);
        const auto& y = *ydata;
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * y[i];
    };
    return emit(x.shape(), std::move(out), {xn}, std::move(back), "exp");
}

Tensor Tape::log(const Tensor& x) {
    require_attached("log", x);
    const auto& xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::log(xv[i]);
    const int xn = x.node();
    auto xdata = x.data_;
    BackFn back = [xn, xdata](std::span<const double> g, AdjointStore& s) {
        auto& dx = s.acc(xn);
        const auto& xs = *xdata;
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] / xs[i];
    };
    return emit(x.shape(), std::move(out), {xn}, std::move(back), "log");
}

Tensor Tape::scale(const Tensor& x, double c) {
    require_attached("scale", x);
    const auto& xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = c * xv[i];
    const int xn = x.node();
    BackFn back = [xn, c](std::span<const double> g, AdjointStore& s) {
        auto& dx = s.acc(xn);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * c;
    };
    return emit(x.shape(), std::move(out), {xn}, std::move(back), "scale");
}

Tensor Tape::add_scalar(const Tensor& x, double c) {
    require_attached("add_scalar", x);
    const auto& xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] + c;
    const int xn = x.node();
    BackFn back = [xn](std::span<const double> g, AdjointStore& s) {
        auto& dx = s.acc(xn);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
    };
    return emit(x.shape(), std::move(out), {xn}, std::move(back), "add_scalar");
}

Tensor Tape::concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ArgumentError("concat: needs at least one input");
    for (const Tensor& p : parts) require_attached("concat", p);
    const int rank = parts[0].rank();
    for (const Tensor& p : parts)
        if (p.rank() != rank)
            throw ShapeError("concat: mixed ranks: " + shape_string(parts[0].shape()) +
                             " vs " + shape_string(p.shape()));
    if (rank != 1 && rank != 2)
        throw ShapeError("concat supports rank 1 and 2, got rank " + std::to_string(rank));
    if (axis < 0 || axis >= rank)
        throw ArgumentError("concat: axis " + std::to_string(axis) + " invalid for rank " +
                            std::to_string(rank));
    for (const Tensor& p : parts)
        for (int d = 0; d < rank; ++d)
            if (d != axis && p.dim(d) != parts[0].dim(d))
                throw ShapeError("concat: shapes differ off the concat axis: " +
                                 shape_string(parts[0].shape()) + " vs " + shape_string(p.shape()));

    std::vector<int> inputs;
    inputs.reserve(parts.size());
    for (const Tensor& p : parts) inputs.push_back(p.node());

    if (rank == 1 || axis == 0) {
        // Parts occupy contiguous blocks of the flat output.
        int total = 0;
        for (const Tensor& p : parts) total += p.dim(axis);
        std::vector<int> shape = parts[0].shape();
        shape[static_cast<std::size_t>(axis)] = total;

        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(product(shape)));
        std::vector<std::pair<int, int>> blocks; // (node, size)
        for (const Tensor& p : parts) {
            const auto& v = p.values();
            out.insert(out.end(), v.begin(), v.end());
            blocks.emplace_back(p.node(), p.size());
        }
        BackFn back = [blocks](std::span<const double> g, AdjointStore& s) {
            std::size_t off = 0;
            for (auto [node, size] : blocks) {
                auto& d = s.acc(node);
                for (int i = 0; i < size; ++i) d[static_cast<std::size_t>(i)] += g[off + static_cast<std::size_t>(i)];
                off += static_cast<std::size_t>(size);
            }
        };
        return emit(std::move(shape), std::move(out), std::move(inputs), std::move(back), "concat");
    }

    // rank 2, axis 1: interleave columns row by row
    const int rows = parts[0].dim(0);
    int cols = 0;
    for (const Tensor& p : parts) cols += p.dim(1);
    std::vector<double> out(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    std::vector<std::tuple<int, int, int>> slots; // (node, col offset, width)
    {
        int off = 0;
        for (const Tensor& p : parts) {
            const int w = p.dim(1);
            const auto& v = p.values();
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < w; ++j)
                    out[static_cast<std::size_t>(r) * cols + off + j] = v[static_cast<std::size_t>(r) * w + j];
            slots.emplace_back(p.node(), off, w);
            off += w;
        }
    }
    BackFn back = [slots, rows, cols](std::span<const double> g, AdjointStore& s) {
        for (auto [node, off, w] : slots) {
            auto& d = s.acc(node);
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < w; ++j)
                    d[static_cast<std::size_t>(r) * w + j] += g[static_cast<std::size_t>(r) * cols + off + j];
        }
    };
    return emit({rows, cols}, std::move(out), std::move(inputs), std::move(back), "concat");
}

Tensor Tape::softmax(const Tensor& logits) {
    require_attached("softmax", logits);
    if (logits.rank() != 1)
        throw ShapeError("softmax expects a rank-1 tensor, got " + shape_string(logits.shape()));
    const auto& z = logits.values();
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    std::vector<double> out(z.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - zmax);
        denom += out[i];
    }
    for (double& v : out) v /= denom;
    auto ydata = std::make_shared<const std::vector<double>>(out);
    const int zn = logits.node();
    BackFn back = [zn, ydata](std::span<const double> g, AdjointStore& s) {
        auto& dz = s.acc(zn);
        const auto& y = *ydata;
        double dot = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
        for (std::size_t i = 0; i < g.size(); ++i) dz[i] += y[i] * (g[i] - dot);
    };
    return emit(logits.shape(), std::move(out), {zn}, std::move(back), "softmax");
}

Tensor Tape::reduce_sum(const Tensor& x, std::optional<int> axis) {
    require_attached("reduce_sum", x);
    if (!axis) {
        const auto& xv = x.values();
        double total = 0.0;
        for (double v : xv) total += v;
        const int xn = x.node();
        BackFn back = [xn](std::span<const double> g, AdjointStore& s) {
            auto& dx = s.acc(xn);
            for (double& v : dx) v += g[0];
        };
        return emit({1}, {total}, {xn}, std::move(back), "reduce_sum");
    }
    const int ax = *axis;
    if (x.rank() == 1) {
        if (ax != 0)
            throw ArgumentError("reduce_sum: axis " + std::to_string(ax) + " invalid for rank 1");
        return reduce_sum(x, std::nullopt);
    }
    if (x.rank() != 2)
        throw ShapeError("reduce_sum with an axis supports rank 1 and 2, got " +
                         shape_string(x.shape()));
    if (ax != 0 && ax != 1)
        throw ArgumentError("reduce_sum: axis " + std::to_string(ax) + " invalid for rank 2");
    const int rows = x.dim(0), cols = x.dim(1);
    const auto& xv = x.values();
    const int xn = x.node();
    if (ax == 0) {
        std::vector<double> out(static_cast<std::size_t>(cols), 0.0);
        for (int r = 0; r < rows; ++r)
            for (int j = 0; j < cols; ++j) out[static_cast<std::size_t>(j)] += xv[static_cast<std::size_t>(r) * cols + j];
        BackFn back = [xn, rows, cols](std::span<const double> g, AdjointStore& s) {
            auto& dx = s.acc(xn);
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < cols; ++j) dx[static_cast<std::size_t>(r) * cols + j] += g[static_cast<std::size_t>(j)];
        };
        return emit({cols}, std::move(out), {xn}, std::move(back), "reduce_sum");
    }
    std::vector<double> out(static_cast<std::size_t>(rows), 0.0);
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < cols; ++j) out[static_cast<std::size_t>(r)] += xv[static_cast<std::size_t>(r) * cols + j];
    BackFn back = [xn, rows, cols](std::span<const double> g, AdjointStore& s) {
        auto& dx = s.acc(xn);
        for (int r = 0; r < rows; ++r)
            for (int j = 0; j < cols; ++j) dx[static_cast<std::size_t>(r) * cols + j] += g[static_cast<std::size_t>(r)];
    };
    return emit({rows}, std::move(out), {xn}, std::move(back), "reduce_sum");
}

Tensor Tape::reduce_mean(const Tensor& x, std::optional<int> axis) {
    require_attached("reduce_mean", x);
    int n;
    if (!axis) {
        n = x.size();
    } else if (x.rank() == 1) {
        if (*axis != 0)
            throw ArgumentError("reduce_mean: axis " + std::to_string(*axis) + " invalid for rank 1");
        n = x.dim(0);
    } else if (x.rank() == 2 && (*axis == 0 || *axis == 1)) {
        n = x.dim(*axis);
    } else {
        throw ShapeError("reduce_mean: axis " + std::to_string(*axis) + " invalid for " +
                         shape_string(x.shape()));
    }
    Tensor sum = reduce_sum(x, axis);
    return scale(sum, 1.0 / static_cast<double>(n));
}

Tensor Tape::gradient_reversal(const Tensor& x, double lambda) {
    require_attached("gradient_reversal", x);
    const int xn = x.node();
    if (lambda == 0.0) {
        // Nothing flows upstream; the node exists only so downstream consumers
        // stay on the tape.
        return emit_alias(x, x.shape(), {}, BackFn{});
    }
    BackFn back = [xn, lambda](std::span<const double> g, AdjointStore& s) {
        auto& dx = s.acc(xn);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] -= lambda * g[i];
    };
    return emit_alias(x, x.shape(), {xn}, std::move(back));
}

Tensor Tape::row(const Tensor& matrix, int index) {
    require_attached("row", matrix);
    if (matrix.rank() != 2)
        throw ShapeError("row expects a rank-2 tensor, got " + shape_string(matrix.shape()));
    const int rows = matrix.dim(0), cols = matrix.dim(1);
    if (index < 0 || index >= rows)
        throw ArgumentError("row index " + std::to_string(index) + " outside " +
                            shape_string(matrix.shape()));
    const auto& v = matrix.values();
    std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(index) * cols,
                            v.begin() + static_cast<std::ptrdiff_t>(index + 1) * cols);
    const int mn = matrix.node();
    BackFn back = [mn, index, cols](std::span<const double> g, AdjointStore& s) {
        auto& dm = s.acc(mn);
        for (int j = 0; j < cols; ++j)
            dm[static_cast<std::size_t>(index) * cols + j] += g[static_cast<std::size_t>(j)];
    };
    return emit({cols}, std::move(out), {mn}, std::move(back), "row");
}

Tensor Tape::reshape(const Tensor& x, std::vector<int> shape) {
    require_attached("reshape", x);
    check_shape_dims(shape);
    if (product(shape) != x.size())
        throw ShapeError("reshape: cannot view " + shape_string(x.shape()) + " as " +
                         shape_string(shape));
    const int xn = x.node();
    BackFn back = [xn](std::span<const double> g, AdjointStore& s) {
        auto& dx = s.acc(xn);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
    };
    return emit_alias(x, std::move(shape), {xn}, std::move(back));
}

Tensor Tape::outer(const Tensor& u, const Tensor& v) {
    require_attached("outer", u);
    require_attached("outer", v);
    if (u.rank() != 1 || v.rank() != 1)
        throw ShapeError("outer expects two rank-1 tensors, got " + shape_string(u.shape()) +
                         " and " + shape_string(v.shape()));
    const int m = u.dim(0), n = v.dim(0);
    const auto& uv = u.values();
    const auto& vv = v.values();
    std::vector<double> out(static_cast<std::size_t>(m) * static_cast<std::size_t>(n));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] = uv[static_cast<std::size_t>(i)] * vv[static_cast<std::size_t>(j)];
    const int un = u.node(), vn = v.node();
    auto udata = u.data_;
    auto vdata = v.data_;
    BackFn back = [un, vn, udata, vdata, m, n](std::span<const double> g, AdjointStore& s) {
        auto& du = s.acc(un);
        auto& dv = s.acc(vn);
        const auto& U = *udata;
        const auto& V = *vdata;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                const double gij = g[static_cast<std::size_t>(i) * n + j];
                du[static_cast<std::size_t>(i)] += gij * V[static_cast<std::size_t>(j)];
                dv[static_cast<std::size_t>(j)] += gij * U[static_cast<std::size_t>(i)];
            }
    };
    return emit({m, n}, std::move(out), {un, vn}, std::move(back), "outer");
}

Tensor Tape::add_rowwise(const Tensor& matrix, const Tensor& vec) {
    require_attached("add_rowwise", matrix);
    require_attached("add_rowwise", vec);
    if (matrix.rank() != 2 || vec.rank() != 1 || vec.dim(0) != matrix.dim(1))
        throw ShapeError("add_rowwise: cannot add " + shape_string(vec.shape()) +
                         " to the rows of " + shape_string(matrix.shape()));
    const int rows = matrix.dim(0), cols = matrix.dim(1);
    const auto& mv = matrix.values();
    const auto& vv = vec.values();
    std::vector<double> out(mv.size());
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < cols; ++j)
            out[static_cast<std::size_t>(r) * cols + j] = mv[static_cast<std::size_t>(r) * cols + j] + vv[static_cast<std::size_t>(j)];
    const int mn = matrix.node(), vn = vec.node();
    BackFn back = [mn, vn, rows, cols](std::span<const double> g, AdjointStore& s) {
        auto& dm = s.acc(mn);
        auto& dv = s.acc(vn);
        for (int r = 0; r < rows; ++r)
            for (int j = 0; j < cols; ++j) {
                const double grj = g[static_cast<std::size_t>(r) * cols + j];
                dm[static_cast<std::size_t>(r) * cols + j] += grj;
                dv[static_cast<std::size_t>(j)] += grj;
            }
    };
    return emit(matrix.shape(), std::move(out), {mn, vn}, std::move(back), "add_rowwise");
}

Tensor Tape::mul_mask(const Tensor& x, std::vector<double> mask) {
    require_attached("mul_mask", x);
    if (static_cast<int>(mask.size()) != x.size())
        throw ShapeError("mul_mask: mask has " + std::to_string(mask.size()) +
                         " entries for tensor " + shape_string(x.shape()));
    const auto& xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * mask[i];
    const int xn = x.node();
    BackFn back = [xn, mask = std::move(mask)](std::span<const double> g, AdjointStore& s) {
        auto& dx = s.acc(xn);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * mask[i];
    };
    return emit(x.shape(), std::move(out), {xn}, std::move(back), "mul_mask");
}

GradientMap Tape::backward(const Tensor& loss, const std::vector<Tensor>& leaves) const {
    require_attached("backward", loss);
    if (loss.size() != 1)
        throw ShapeError("backward expects a scalar loss, got " + shape_string(loss.shape()));
    for (const Tensor& leaf : leaves) require_attached("backward", leaf);

    AdjointStore store(nodes_);
    store.acc(loss.node())[0] = 1.0;
    for (int i = loss.node(); i >= 0; --i) {
        const Node& node = nodes_[static_cast<std::size_t>(i)];
        if (!node.back || !store.touched(i)) continue;
        node.back(std::span<const double>(store.grads[static_cast<std::size_t>(i)]), store);
    }

    GradientMap out;
    for (const Tensor& leaf : leaves) {
        Tensor g = store.touched(leaf.node())
                       ? Tensor(leaf.shape(), store.grads[static_cast<std::size_t>(leaf.node())])
                       : Tensor::zeros(leaf.shape());
        out.by_node_.emplace(leaf.node(), std::move(g));
    }
    return out;
}

} // namespace cmtn
