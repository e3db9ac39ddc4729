#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cmtn/errors.hpp"

namespace cmtn {

// Dense row-major tensor of 64-bit reals. Values are immutable after
// construction and shared by copy, so tensors are cheap value types and
// safe to read concurrently. A tensor may additionally be attached to a
// Tape node (node() >= 0), in which case it participates in reverse-mode
// differentiation on that tape.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<int> shape, std::vector<double> values);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
    int size() const;

    const std::vector<double>& values() const;
    double operator[](int flat_index) const { return values()[static_cast<std::size_t>(flat_index)]; }
    double at(int r, int c) const; // rank-2 convenience
    double scalar_value() const;   // requires size() == 1

    bool defined() const { return data_ != nullptr; }
    bool on_tape() const { return node_ >= 0; }
    int node() const { return node_; }

private:
    friend class Tape;
    std::vector<int> shape_;
    std::shared_ptr<const std::vector<double>> data_;
    int node_ = -1;
    std::uint64_t tape_id_ = 0;
};

std::string shape_string(const std::vector<int>& shape);

// Gradients of a scalar loss with respect to requested leaves, keyed by
// the leaf's node id. Leaves the loss does not reach map to zero tensors.
class GradientMap {
public:
    bool contains(const Tensor& leaf) const { return by_node_.count(leaf.node()) != 0; }
    const Tensor& at(const Tensor& leaf) const;
    std::size_t size() const { return by_node_.size(); }

private:
    friend class Tape;
    std::unordered_map<int, Tensor> by_node_;
};

// Define-by-run differentiation tape. Each op appends a node holding its
// input node ids and an adjoint rule; backward() replays the rules in
// reverse to accumulate leaf gradients. A tape is rebuilt per forward pass
// and must stay confined to one thread; the tensors it produces may be
// read from anywhere afterwards.
class Tape {
public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Attaches detached values to this tape as a differentiable leaf.
    Tensor leaf(const Tensor& values);
    Tensor leaf(std::vector<int> shape, std::vector<double> values);

    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor tanh(const Tensor& x);
    Tensor sigmoid(const Tensor& x);
    Tensor exp(const Tensor& x);
    Tensor log(const Tensor& x);
    Tensor scale(const Tensor& x, double c);
    Tensor add_scalar(const Tensor& x, double c);
    Tensor concat(const std::vector<Tensor>& parts, int axis);
    // Rank-1, max-subtracted. Outputs sum to 1 and are strictly positive as
    // long as the logit spread stays below the exp underflow threshold
    // (~745); past that, dominated entries flush to +0.
    Tensor softmax(const Tensor& logits);
    Tensor reduce_sum(const Tensor& x, std::optional<int> axis = std::nullopt);
    Tensor reduce_mean(const Tensor& x, std::optional<int> axis = std::nullopt);

    // Identity forward (bit-exact); backward scales the upstream gradient
    // by -lambda before propagating.
    Tensor gradient_reversal(const Tensor& x, double lambda);

    Tensor row(const Tensor& matrix, int index);           // rank-2 -> rank-1
    Tensor reshape(const Tensor& x, std::vector<int> shape);
    Tensor outer(const Tensor& u, const Tensor& v);        // [m],[n] -> [m x n]
    Tensor add_rowwise(const Tensor& matrix, const Tensor& vec);
    // Elementwise product with a constant mask (inverted-dropout carrier).
    Tensor mul_mask(const Tensor& x, std::vector<double> mask);

    GradientMap backward(const Tensor& loss, const std::vector<Tensor>& leaves) const;

    std::size_t node_count() const { return nodes_.size(); }
    std::uint64_t id() const { return id_; }

private:
    struct AdjointStore;
    using BackFn = std::function<void(std::span<const double>, AdjointStore&)>;

    struct Node {
        std::vector<int> inputs;
        int size = 0;
        BackFn back; // empty for leaves
    };

    Tensor emit(std::vector<int> shape, std::vector<double> values,
                std::vector<int> inputs, BackFn back, const char* op);
    Tensor emit_alias(const Tensor& src, std::vector<int> shape,
                      std::vector<int> inputs, BackFn back);
    void require_attached(const char* op, const Tensor& t) const;

    std::uint64_t id_;
    std::vector<Node> nodes_;
};

} // namespace cmtn
