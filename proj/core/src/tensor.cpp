#include "san/tensor.hpp"

#include <sstream>

#include "san/log.hpp"

namespace san {

std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return s.empty() ? 0 : n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

double Tensor::scalar() const {
    if (size() != 1)
        throw ContractError("tensor: scalar() on shape " + shape_str(shape()));
    return value()[0];
}

void Tensor::zero_grad() {
    auto& g = node()->grad;
    if (!g.empty()) std::fill(g.begin(), g.end(), 0.0);
}

Tensor Graph::leaf(Shape shape, std::vector<double> values,
                   bool requires_grad) {
    if (shape_size(shape) != values.size())
        throw DimensionError("leaf: shape " + shape_str(shape) + " needs " +
                             std::to_string(shape_size(shape)) +
                             " values, got " + std::to_string(values.size()));
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    n->id = next_id_++;
    return Tensor(std::move(n));
}

Tensor Graph::zeros(Shape shape, bool requires_grad) {
    std::vector<double> v(shape_size(shape), 0.0);
    return leaf(std::move(shape), std::move(v), requires_grad);
}

Tensor Graph::constant(Shape shape, std::vector<double> values) {
    return leaf(std::move(shape), std::move(values), false);
}

Tensor Graph::scalar_const(double v) { return constant({1}, {v}); }

Tensor Graph::record(Shape shape, std::vector<double> value,
                     std::vector<Tensor> parents,
                     std::function<void(detail::Node&)> backward_fn) {
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->id = next_id_++;

    bool needs = false;
    if (grad_enabled_) {
        for (const auto& p : parents)
            if (p.requires_grad()) {
                needs = true;
                break;
            }
    }
    n->requires_grad = needs;
    if (needs) {
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node());
        n->backward = std::move(backward_fn);
        n->tape_pos = static_cast<long>(tape_.size());
        tape_.push_back(n);
    }
    return Tensor(std::move(n));
}

void Graph::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ContractError("backward: loss must be a defined scalar");
    if (!loss.requires_grad())
        throw ContractError("backward: loss does not require grad");

    auto& ln = *loss.node();
    ln.ensure_grad();
    ln.grad[0] += 1.0;

    if (ln.tape_pos < 0) return;  // loss is itself a leaf

    for (long i = ln.tape_pos; i >= 0; --i) {
        detail::Node& nd = *tape_[static_cast<std::size_t>(i)];
        if (!nd.grad.empty() && nd.backward) nd.backward(nd);
    }
}

void Graph::reset() { tape_.clear(); }

}  // namespace san
