#include "fuzzformer/compute/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "fuzzformer/error.hpp"

namespace fuzzformer::compute {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t element_count(const Shape& shape) {
    std::size_t n = 1;
    for (auto extent : shape) n *= extent;
    return n;
}

std::string to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

TensorNode::TensorNode(Shape shape, std::vector<double> value, bool requires_grad, std::string op)
    : shape_(std::move(shape)),
      value_(std::move(value)),
      requires_grad_(requires_grad),
      op_(std::move(op)) {
    if (element_count(shape_) != value_.size()) {
        throw ShapeError(op_ + ": shape " + to_string(shape_) + " does not match " +
                         std::to_string(value_.size()) + " values");
    }
}

double TensorNode::item() const {
    if (value_.size() != 1) throw ShapeError(op_ + ": item() on non-scalar " + to_string(shape_));
    return value_[0];
}

void TensorNode::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

Tensor make_node(std::string op, Shape shape, std::vector<double> value,
                 std::vector<Tensor> parents, BackwardFn backward) {
    for (double v : value) {
        if (!std::isfinite(v)) throw NonFiniteError(op + ": produced a non-finite value");
    }
    bool needs_grad = false;
    if (g_grad_enabled) {
        for (const auto& p : parents) needs_grad = needs_grad || p->requires_grad();
    }
    auto node = std::make_shared<TensorNode>(std::move(shape), std::move(value), needs_grad,
                                             std::move(op));
    if (needs_grad) {
        node->parents_ = std::move(parents);
        node->backward_ = std::move(backward);
    }
    return node;
}

Tensor constant(Shape shape, std::vector<double> value) {
    for (double v : value) {
        if (!std::isfinite(v)) throw NonFiniteError("constant: non-finite input value");
    }
    return std::make_shared<TensorNode>(std::move(shape), std::move(value), false, "constant");
}

Tensor constant_scalar(double value) { return constant({1}, {value}); }

Tensor zeros(Shape shape) {
    auto n = element_count(shape);
    return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor parameter(Shape shape, std::vector<double> value) {
    for (double v : value) {
        if (!std::isfinite(v)) throw NonFiniteError("parameter: non-finite initial value");
    }
    return std::make_shared<TensorNode>(std::move(shape), std::move(value), true, "parameter");
}

std::vector<double> forward_eval(const Tensor& root) {
    for (double v : root->value()) {
        if (!std::isfinite(v)) throw NonFiniteError(root->op() + ": non-finite value at root");
    }
    return {root->value().begin(), root->value().end()};
}

void backward(const Tensor& root) {
    if (root->size() != 1) {
        throw ShapeError("backward: root must be scalar, got " + to_string(root->shape()));
    }
    if (!root->requires_grad()) return;

    // Iterative post-order DFS; `order` ends up topologically sorted.
    std::vector<TensorNode*> order;
    std::unordered_set<const TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents_.size()) {
            TensorNode* parent = node->parents_[next++].get();
            if (parent->requires_grad() && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (auto* node : order) {
        if (node->is_leaf()) {
            node->ensure_grad();
        } else {
            node->grad_.assign(node->value_.size(), 0.0);
        }
    }
    root->grad_[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backward_) node->backward_(*node);
    }
    for (auto* node : order) {
        for (double g : node->grad_) {
            if (!std::isfinite(g)) throw NonFiniteError(node->op_ + ": non-finite gradient");
        }
    }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

}  // namespace fuzzformer::compute
