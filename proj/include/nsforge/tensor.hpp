#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "nsforge/common.hpp"

namespace nsforge {

// Reverse-mode autodiff over a dynamically recorded op graph. Tensors are
// cheap handles onto shared nodes; ops append nodes whose closures later
// push gradients to their parents. Scalar type T is float for training and
// double for the finite-difference oracle suites.

inline bool& autograd_mode() {
    thread_local bool enabled = true;
    return enabled;
}

// Disables graph recording in scope (inference, samplers, evaluation).
struct NoGradScope {
    bool prev;
    NoGradScope() : prev(autograd_mode()) { autograd_mode() = false; }
    ~NoGradScope() { autograd_mode() = prev; }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;
};

template <typename T>
struct TensorNode {
    std::vector<int64_t> shape;
    std::vector<T> value;
    std::vector<T> grad;  // allocated on first use
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void()> backward_fn;
    uint64_t id = 0;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

namespace detail {
inline uint64_t next_node_id() {
    static std::atomic<uint64_t> counter{0};
    return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false) {
        return filled(std::move(shape), T(0), requires_grad);
    }

    static Tensor filled(std::vector<int64_t> shape, T v, bool requires_grad = false) {
        Tensor t;
        t.node_ = std::make_shared<TensorNode<T>>();
        t.node_->shape = std::move(shape);
        t.node_->value.assign(numel(t.node_->shape), v);
        t.node_->requires_grad = requires_grad;
        t.node_->id = detail::next_node_id();
        return t;
    }

    static Tensor from_data(std::vector<int64_t> shape, std::vector<T> data,
                            bool requires_grad = false) {
        if (static_cast<int64_t>(data.size()) != numel(shape))
            throw std::invalid_argument("Tensor: data length does not match shape");
        Tensor t;
        t.node_ = std::make_shared<TensorNode<T>>();
        t.node_->shape = std::move(shape);
        t.node_->value = std::move(data);
        t.node_->requires_grad = requires_grad;
        t.node_->id = detail::next_node_id();
        return t;
    }

    static Tensor scalar(T v) { return from_data({1}, {v}); }

    // Output node for an op: inherits requires_grad from parents when
    // recording is enabled, and keeps parents alive only in that case.
    static Tensor op_result(std::vector<int64_t> shape,
                            std::initializer_list<Tensor> parents) {
        Tensor t = zeros(std::move(shape));
        if (autograd_mode()) {
            bool rg = false;
            for (const Tensor& p : parents) rg = rg || (p.defined() && p.requires_grad());
            if (rg) {
                t.node_->requires_grad = true;
                for (const Tensor& p : parents)
                    if (p.defined()) t.node_->parents.push_back(p.node_);
            }
        }
        return t;
    }

    bool defined() const { return static_cast<bool>(node_); }
    const std::vector<int64_t>& shape() const { return node_->shape; }
    int64_t size() const { return static_cast<int64_t>(node_->value.size()); }
    int64_t dim(int i) const { return node_->shape[i]; }

    T* data() { return node_->value.data(); }
    const T* data() const { return node_->value.data(); }
    std::vector<T>& values() { return node_->value; }
    const std::vector<T>& values() const { return node_->value; }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool rg) {
        node_->requires_grad = rg;
        return *this;
    }

    T* grad() {
        node_->ensure_grad();
        return node_->grad.data();
    }
    const std::vector<T>& grad_values() const { return node_->grad; }
    void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

    void set_backward(std::function<void()> fn) {
        node_->backward_fn = std::move(fn);
    }

    T item() const {
        if (size() != 1) throw std::invalid_argument("Tensor::item: not a scalar");
        return node_->value[0];
    }

    std::shared_ptr<TensorNode<T>> node() const { return node_; }

    static int64_t numel(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

private:
    std::shared_ptr<TensorNode<T>> node_;
};

// Reverse-mode sweep from a scalar loss. Nodes run in reverse construction
// order along a post-order walk, so accumulation order is deterministic.
template <typename T>
void backward(const Tensor<T>& loss) {
    if (loss.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar");
    if (!loss.requires_grad()) return;

    std::vector<TensorNode<T>*> order;
    std::unordered_set<TensorNode<T>*> seen;
    // Iterative post-order DFS.
    std::vector<std::pair<TensorNode<T>*, size_t>> stack;
    stack.push_back({loss.node().get(), 0});
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorNode<T>* p = node->parents[idx++].get();
            if (p->requires_grad && seen.insert(p).second)
                stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (TensorNode<T>* n : order) n->ensure_grad();
    loss.node()->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn();
}

// Fixed-structure pairwise reduction. Splitting at the midpoint makes the
// sum of 2^k equal addends exact (pure exponent shifts), which the
// pool/upsample recovery law relies on.
template <typename T, typename Get>
T pairwise_sum(int64_t lo, int64_t hi, Get&& get) {
    int64_t n = hi - lo;
    if (n <= 0) return T(0);
    if (n == 1) return get(lo);
    if (n == 2) return get(lo) + get(lo + 1);
    int64_t mid = lo + n / 2;
    return pairwise_sum<T>(lo, mid, get) + pairwise_sum<T>(mid, hi, get);
}

}  // namespace nsforge
