#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace tgaf {

struct Dims {
    int n = 0, c = 0, h = 0, w = 0;

    std::int64_t count() const {
        return std::int64_t(n) * c * h * w;
    }
    bool operator==(const Dims&) const = default;

    std::string str() const {
        std::ostringstream os;
        os << "[" << n << "," << c << "," << h << "," << w << "]";
        return os.str();
    }
};

[[noreturn]] inline void shape_error(const std::string& what, const Dims& a, const Dims& b) {
    throw std::invalid_argument("shape mismatch in " + what + ": " + a.str() + " vs " + b.str());
}

namespace detail {

// One node of the dynamically recorded computation graph. Leaf nodes
// (parameters, inputs) have no parents and no backward function.
template <typename T>
struct Node {
    Dims dims;
    std::vector<T> data;
    std::vector<T> grad;  // allocated lazily, only when requires_grad
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward_fn;  // reads this->grad, accumulates into parents

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
    }
};

}  // namespace detail

// Shared handle to a graph node. Copies alias the same storage; the data
// buffer is treated as immutable once an op has consumed the tensor, only
// the grad buffer mutates afterwards.
template <typename T>
class Tensor {
  public:
    using Scalar = T;

    Tensor() = default;

    explicit Tensor(Dims d, bool requires_grad = false)
        : node_(std::make_shared<detail::Node<T>>()) {
        if (d.n < 1 || d.c < 1 || d.h < 1 || d.w < 1)
            throw std::invalid_argument("tensor dims must all be >= 1, got " + d.str());
        node_->dims = d;
        node_->data.assign(static_cast<size_t>(d.count()), T(0));
        node_->requires_grad = requires_grad;
    }

    static Tensor full(Dims d, T value, bool requires_grad = false) {
        Tensor t(d, requires_grad);
        std::fill(t.data().begin(), t.data().end(), value);
        return t;
    }

    static Tensor from_data(Dims d, std::vector<T> values, bool requires_grad = false) {
        Tensor t(d, requires_grad);
        if (static_cast<std::int64_t>(values.size()) != d.count())
            throw std::invalid_argument("data length " + std::to_string(values.size()) +
                                        " does not match dims " + d.str());
        t.node_->data = std::move(values);
        return t;
    }

    bool valid() const { return node_ != nullptr; }
    const Dims& dims() const { return node_->dims; }
    std::int64_t count() const { return node_->dims.count(); }

    std::vector<T>& data() { return node_->data; }
    const std::vector<T>& data() const { return node_->data; }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::vector<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const std::vector<T>& grad_view() const { return node_->grad; }

    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    std::int64_t index(int n, int c, int y, int x) const {
        const Dims& d = node_->dims;
        return ((std::int64_t(n) * d.c + c) * d.h + y) * d.w + x;
    }
    T at(int n, int c, int y, int x) const { return node_->data[index(n, c, y, x)]; }
    T& at(int n, int c, int y, int x) { return node_->data[index(n, c, y, x)]; }

    // Op construction helper: makes the output node of an op whose inputs
    // are `parents`. The output requires grad iff any input does.
    static Tensor make_result(Dims d, std::initializer_list<Tensor> parents) {
        Tensor out(d);
        for (const Tensor& p : parents) {
            out.node_->parents.push_back(p.node_);
            if (p.requires_grad()) out.node_->requires_grad = true;
        }
        return out;
    }
    static Tensor make_result(Dims d, const std::vector<Tensor>& parents) {
        Tensor out(d);
        for (const Tensor& p : parents) {
            out.node_->parents.push_back(p.node_);
            if (p.requires_grad()) out.node_->requires_grad = true;
        }
        return out;
    }

    void set_backward(std::function<void()> fn) { node_->backward_fn = std::move(fn); }

    std::shared_ptr<detail::Node<T>> node() const { return node_; }

  private:
    std::shared_ptr<detail::Node<T>> node_;
};

// Reverse-mode sweep from a scalar loss. Interior grads are reset before
// the sweep; leaf grads accumulate additively across calls.
template <typename T>
void backward(Tensor<T> loss) {
    if (loss.count() != 1)
        throw std::invalid_argument("backward requires a scalar loss, got " + loss.dims().str());
    if (!loss.requires_grad()) return;  // nothing reachable needs gradients

    using NodeT = detail::Node<T>;
    std::vector<NodeT*> order;
    std::unordered_set<NodeT*> seen;
    // iterative post-order DFS
    std::vector<std::pair<NodeT*, size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            NodeT* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (NodeT* n : order) {
        if (!n->requires_grad) continue;
        if (n->backward_fn) {  // interior node: reset, leaves keep accumulating
            n->grad.assign(n->data.size(), T(0));
        } else {
            n->ensure_grad();
        }
    }
    loss.node()->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeT* n = *it;
        if (n->requires_grad && n->backward_fn) n->backward_fn();
    }
}

}  // namespace tgaf
