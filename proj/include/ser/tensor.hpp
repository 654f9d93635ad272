#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ser {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // sized lazily, kept across backward calls until zeroed
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Pulls this node's grad and accumulates (+=) into parents' grads.
    std::function<void(Node&)> backward_fn;
};

}  // namespace detail

// Dense row-major tensor participating in reverse-mode differentiation.
// Value type over a shared node; copies alias the same storage. A graph and
// its tensors are confined to one thread; distinct model instances may run in
// parallel.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->values.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape[i]; }

    // Tensor is a shared handle: storage is mutable through const handles,
    // like a smart pointer.
    std::vector<double>& values() const { return node_->values; }

    bool requires_grad() const { return node_->requires_grad; }

    // Gradient buffer, allocated zero-filled on first access.
    std::vector<double>& grad() const;
    bool has_grad() const { return !node_->grad.empty(); }
    void zero_grad() const;

    double operator()(std::size_t i) const { return node_->values[i]; }
    double operator()(std::size_t r, std::size_t c) const {
        return node_->values[r * node_->shape[1] + c];
    }
    double& at(std::size_t i) const { return node_->values[i]; }
    double& at(std::size_t r, std::size_t c) const {
        return node_->values[r * node_->shape[1] + c];
    }

    // Fresh leaf with the same shape/values; no graph history shared.
    Tensor detached_copy(bool requires_grad) const;

    detail::Node* node() const { return node_.get(); }
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

    static Tensor wrap(std::shared_ptr<detail::Node> node) {
        Tensor t;
        t.node_ = std::move(node);
        return t;
    }

  private:
    std::shared_ptr<detail::Node> node_;
};

// Reverse-mode pass from a scalar loss. Grads accumulate additively into every
// requires_grad tensor on the path; parameter grads are not zeroed implicitly.
void backward(const Tensor& loss);

void zero_grads(const std::vector<Tensor>& params);

}  // namespace ser
