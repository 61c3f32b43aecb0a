#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "san/errors.hpp"
#include "san/rng.hpp"

namespace san {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until backward touches this node
    bool requires_grad = false;
    long id = -1;
    long tape_pos = -1;  // -1 for leaves
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

// Value-semantic handle to a node in a computation graph. Values are 64-bit
// floats in row-major order.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}

    bool defined() const { return static_cast<bool>(n_); }

    const Shape& shape() const { return node_ref().shape; }
    std::size_t rank() const { return node_ref().shape.size(); }
    std::size_t dim(std::size_t i) const { return node_ref().shape.at(i); }
    std::size_t size() const { return node_ref().value.size(); }

    // Rank-2 accessors; a rank-1 tensor behaves as a single column.
    std::size_t rows() const {
        const auto& s = node_ref().shape;
        return s.empty() ? 0 : s[0];
    }
    std::size_t cols() const {
        const auto& s = node_ref().shape;
        if (s.size() >= 2) return s[1];
        return s.empty() ? 0 : 1;
    }

    std::vector<double>& value() { return node_ref().value; }
    const std::vector<double>& value() const { return node_ref().value; }

    double scalar() const;

    double operator()(std::size_t r, std::size_t c) const {
        return node_ref().value[r * cols() + c];
    }
    double& operator()(std::size_t r, std::size_t c) {
        return node_ref().value[r * cols() + c];
    }

    bool requires_grad() const { return node_ref().requires_grad; }

    // Gradient buffer; empty if backward never reached this tensor.
    const std::vector<double>& grad() const { return node_ref().grad; }
    std::vector<double>& grad() { return node_ref().grad; }
    void zero_grad();

    long node_id() const { return node_ref().id; }

    const std::shared_ptr<detail::Node>& node() const { return n_; }

private:
    detail::Node& node_ref() const {
        if (!n_) throw ContractError("tensor: undefined handle");
        return *n_;
    }

    std::shared_ptr<detail::Node> n_;
};

// Records operations as a tape in creation order (every node's inputs precede
// it), owns the rng that feeds dropout, and carries the train/eval mode flag
// that governs all dropout sites. Construction and backward are
// single-threaded; completed leaf tensors are immutable snapshots safe to
// share across threads.
class Graph {
public:
    explicit Graph(std::uint64_t seed = 0) : rng_(seed) {}

    void seed(std::uint64_t s) { rng_.seed(s); }
    Rng& rng() { return rng_; }

    void set_training(bool on) { training_ = on; }
    bool training() const { return training_; }

    void set_grad_enabled(bool on) { grad_enabled_ = on; }
    bool grad_enabled() const { return grad_enabled_; }

    Tensor leaf(Shape shape, std::vector<double> values, bool requires_grad);
    Tensor zeros(Shape shape, bool requires_grad = false);
    Tensor constant(Shape shape, std::vector<double> values);
    Tensor scalar_const(double v);

    // Accumulates gradients from a scalar loss into every reachable tensor
    // that requires grad. The tape stays as-is; reuse requires reset().
    void backward(const Tensor& loss);

    // Drops recorded operations. Leaves (parameters, inputs) survive through
    // their own handles.
    void reset();

    std::size_t tape_size() const { return tape_.size(); }

    // Op-recording primitive used by the op library.
    Tensor record(Shape shape, std::vector<double> value,
                  std::vector<Tensor> parents,
                  std::function<void(detail::Node&)> backward_fn);

private:
    std::vector<std::shared_ptr<detail::Node>> tape_;
    Rng rng_;
    bool training_ = false;
    bool grad_enabled_ = true;
    long next_id_ = 0;
};

// Temporarily disables gradient recording (evaluation passes).
struct NoGradGuard {
    explicit NoGradGuard(Graph& g) : g_(g), prev_(g.grad_enabled()) {
        g_.set_grad_enabled(false);
    }
    ~NoGradGuard() { g_.set_grad_enabled(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    Graph& g_;
    bool prev_;
};

}  // namespace san
