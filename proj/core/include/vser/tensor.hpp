#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vser/error.hpp"

namespace vser {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) {
        if (d <= 0) throw ShapeError("non-positive dimension");
        n *= d;
    }
    return n;
}

namespace detail {
inline thread_local bool g_grad_enabled = true;
}

inline bool grad_enabled() { return detail::g_grad_enabled; }

// Disables tape construction for its scope (frozen-model inference).
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(detail::g_grad_enabled) {
        detail::g_grad_enabled = false;
    }
    ~NoGradGuard() { detail::g_grad_enabled = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Reverse-mode autograd tensor. A Tensor is a cheap handle onto a shared
// node; ops build a tape of backprop closures which backward() runs in
// reverse topological order. Ownership flows from results to parents only,
// so graphs are freed as soon as the result handles go out of scope.
template <class S>
class Tensor {
  public:
    struct Node {
        std::vector<S> value;
        std::vector<S> grad;  // allocated lazily, same length as value
        Shape shape;
        bool requires_grad = false;
        std::function<void()> backprop;
        std::vector<std::shared_ptr<Node>> parents;
    };

    Tensor() = default;

    static Tensor from(Shape shape, std::vector<S> value,
                       bool requires_grad = false) {
        if (shape_numel(shape) != static_cast<int64_t>(value.size()))
            throw ShapeError("value size does not match shape");
        Tensor t;
        t.n_ = std::make_shared<Node>();
        t.n_->shape = std::move(shape);
        t.n_->value = std::move(value);
        t.n_->requires_grad = requires_grad;
        return t;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto n = shape_numel(shape);
        return from(std::move(shape), std::vector<S>(static_cast<size_t>(n), S(0)),
                    requires_grad);
    }

    static Tensor full(Shape shape, S v, bool requires_grad = false) {
        auto n = shape_numel(shape);
        return from(std::move(shape), std::vector<S>(static_cast<size_t>(n), v),
                    requires_grad);
    }

    static Tensor scalar(S v, bool requires_grad = false) {
        return from({1}, {v}, requires_grad);
    }

    // A Tensor is a shared handle; constness is shallow, as in mainstream
    // tensor libraries, so backward closures can accumulate gradients
    // through captured handles.
    bool defined() const { return static_cast<bool>(n_); }
    const Shape& shape() const { return n_->shape; }
    int dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(n_->shape.size()); }
    int64_t size() const { return static_cast<int64_t>(n_->value.size()); }

    std::vector<S>& value() const { return n_->value; }

    S item() const {
        if (size() != 1) throw ShapeError("item() on non-scalar");
        return n_->value[0];
    }

    bool requires_grad() const { return n_ && n_->requires_grad; }
    void set_requires_grad(bool rg) const { n_->requires_grad = rg; }

    // Gradient buffer, allocated (zero) on first touch.
    std::vector<S>& grad() const {
        if (n_->grad.empty()) n_->grad.assign(n_->value.size(), S(0));
        return n_->grad;
    }
    bool has_grad() const { return n_ && !n_->grad.empty(); }
    void zero_grad() const {
        if (n_ && !n_->grad.empty())
            std::fill(n_->grad.begin(), n_->grad.end(), S(0));
    }

    // Used by ops: marks this tensor as an op result.
    void set_op(std::vector<Tensor> parents, std::function<void()> backprop) {
        n_->requires_grad = true;
        n_->parents.reserve(parents.size());
        for (auto& p : parents) n_->parents.push_back(p.n_);
        n_->backprop = std::move(backprop);
    }

    Node* node() const { return n_.get(); }

    // Value copy detached from the tape.
    Tensor detached() const { return from(n_->shape, n_->value, false); }

    void backward() const {
        if (size() != 1) throw ShapeError("backward() requires a scalar root");
        std::vector<Node*> order;
        topo_collect(order);
        n_->grad.assign(1, S(1));
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            if ((*it)->backprop) (*it)->backprop();
        }
    }

  private:
    void topo_collect(std::vector<Node*>& order) const {
        std::unordered_set<Node*> seen;
        // iterative postorder DFS: parents precede children in `order`
        std::vector<std::pair<Node*, size_t>> stack;
        stack.emplace_back(n_.get(), 0);
        seen.insert(n_.get());
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->parents.size()) {
                Node* p = node->parents[next++].get();
                if (p && !seen.count(p)) {
                    seen.insert(p);
                    stack.emplace_back(p, 0);
                }
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<Node> n_;
};

}  // namespace vser
