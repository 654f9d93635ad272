#include "ser/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "ser/error.hpp"

namespace ser {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->values.assign(shape_numel(node->shape), 0.0);
    node->requires_grad = requires_grad;
    return wrap(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw ShapeError("Tensor::from: " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return wrap(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

std::vector<double>& Tensor::grad() const {
    if (node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0);
    return node_->grad;
}

void Tensor::zero_grad() const {
    node_->grad.assign(node_->values.size(), 0.0);
}

Tensor Tensor::detached_copy(bool requires_grad) const {
    return Tensor::from(node_->shape, node_->values, requires_grad);
}

namespace {

void topo_visit(detail::Node* n, std::unordered_set<detail::Node*>& seen,
                std::vector<detail::Node*>& order) {
    // Iterative DFS; sequence graphs get deep enough to overflow a recursive one.
    struct Frame {
        detail::Node* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    if (!seen.insert(n).second) return;
    stack.push_back({n, 0});
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            detail::Node* p = f.node->parents[f.next_parent++].get();
            if (seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }
}

}  // namespace

void backward(const Tensor& loss) {
    if (!loss.defined()) throw ShapeError("backward: undefined loss tensor");
    if (loss.numel() != 1) {
        throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    }
    std::unordered_set<detail::Node*> seen;
    std::vector<detail::Node*> order;  // parents before children
    topo_visit(loss.node(), seen, order);

    for (detail::Node* n : order) {
        if (n->grad.empty()) n->grad.assign(n->values.size(), 0.0);
    }
    loss.node()->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

void zero_grads(const std::vector<Tensor>& params) {
    for (const Tensor& p : params) p.zero_grad();
}

}  // namespace ser
