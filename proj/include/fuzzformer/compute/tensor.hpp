#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fuzzformer::compute {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

class TensorNode;
using Tensor = std::shared_ptr<TensorNode>;

/// Called during backward with the node whose gradient is complete; pushes
/// that gradient into the node's parents.
using BackwardFn = std::function<void(const TensorNode&)>;

/// A dense row-major array of doubles that remembers how it was produced.
///
/// Nodes are created eagerly: every operation computes its value immediately
/// and, when any input requires a gradient, records a closure that maps the
/// output gradient back onto its inputs. Leaves created with `parameter()`
/// accumulate gradients across `backward()` calls until zeroed.
class TensorNode {
public:
    TensorNode(Shape shape, std::vector<double> value, bool requires_grad, std::string op);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return value_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    std::span<const double> value() const { return value_; }
    std::span<double> mutable_value() { return value_; }
    /// Gradient storage is allocated (zero-filled) on first access.
    std::span<const double> grad() const {
        ensure_grad();
        return grad_;
    }
    std::span<double> mutable_grad() {
        ensure_grad();
        return grad_;
    }
    double item() const;

    bool requires_grad() const { return requires_grad_; }
    bool is_leaf() const { return parents_.empty(); }
    const std::string& op() const { return op_; }
    const std::vector<Tensor>& parents() const { return parents_; }

    void zero_grad();

private:
    friend Tensor make_node(std::string op, Shape shape, std::vector<double> value,
                            std::vector<Tensor> parents, BackwardFn backward);
    friend void backward(const Tensor& root);

    void ensure_grad() const {
        if (grad_.size() != value_.size()) grad_.assign(value_.size(), 0.0);
    }

    Shape shape_;
    std::vector<double> value_;
    mutable std::vector<double> grad_;
    bool requires_grad_;
    std::string op_;
    std::vector<Tensor> parents_;
    BackwardFn backward_;
};

/// Builds an interior node. Validates finiteness of `value` (throwing
/// NonFiniteError naming `op`), and records `backward` only when some parent
/// requires a gradient and recording is enabled.
Tensor make_node(std::string op, Shape shape, std::vector<double> value,
                 std::vector<Tensor> parents, BackwardFn backward);

Tensor constant(Shape shape, std::vector<double> value);
Tensor constant_scalar(double value);
Tensor zeros(Shape shape);
/// A trainable leaf.
Tensor parameter(Shape shape, std::vector<double> value);

/// Returns the values at `root`. Evaluation is eager, so this only validates
/// that the root is finite and copies it out.
std::vector<double> forward_eval(const Tensor& root);

/// Reverse-mode sweep from a scalar root. Interior gradients are reset first;
/// leaf gradients accumulate.
void backward(const Tensor& root);

/// Disables graph recording for its lifetime (evaluation-only passes).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

}  // namespace fuzzformer::compute
