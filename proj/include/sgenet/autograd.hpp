#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sgenet/tensor.hpp"

namespace sgenet::nn {

// Define-by-run reverse-mode autodiff. Every op produces a fresh Node whose
// backward closure accumulates into the parents' grad buffers. Parameters are
// long-lived leaf nodes shared across step graphs.
template <class S>
struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.data.empty()) grad = Tensor<S>(value.shape, S(0));
    }
    void zero_grad() {
        if (!grad.data.empty()) std::fill(grad.data.begin(), grad.data.end(), S(0));
    }
};

template <class S>
class Value {
public:
    Value() = default;
    explicit Value(std::shared_ptr<Node<S>> n) : n_(std::move(n)) {}

    static Value leaf(Tensor<S> t, bool requires_grad = false) {
        auto n = std::make_shared<Node<S>>();
        n->value = std::move(t);
        n->requires_grad = requires_grad;
        return Value(std::move(n));
    }

    // Value is a reference-semantic handle: const applies to the handle, not
    // to the pointed-to node (same convention as shared_ptr).
    bool defined() const { return n_ != nullptr; }
    Tensor<S>& val() const { return n_->value; }
    Tensor<S>& grad() const {
        n_->ensure_grad();
        return n_->grad;
    }
    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool rg) const { n_->requires_grad = rg; }
    void zero_grad() const { n_->zero_grad(); }
    std::shared_ptr<Node<S>> node() const { return n_; }

    Value detach() const { return leaf(n_->value, false); }

    // Reverse-mode sweep from a scalar root.
    void backward() const {
        if (n_->value.numel() != 1)
            throw std::logic_error("backward() requires a scalar root");
        // Iterative post-order topological sort over the DAG.
        std::vector<Node<S>*> order;
        std::unordered_set<Node<S>*> seen;
        std::vector<std::pair<Node<S>*, size_t>> stack;
        stack.emplace_back(n_.get(), 0);
        seen.insert(n_.get());
        while (!stack.empty()) {
            auto& [node, idx] = stack.back();
            if (idx < node->parents.size()) {
                Node<S>* p = node->parents[idx++].get();
                if (p->requires_grad && !seen.count(p)) {
                    seen.insert(p);
                    stack.emplace_back(p, 0);
                }
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
        n_->ensure_grad();
        n_->grad.data[0] = S(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node<S>* node = *it;
            if (node->backward_fn) node->backward_fn(*node);
        }
    }

private:
    std::shared_ptr<Node<S>> n_;
};

// Builds the result node for an op. Parents that cannot require grad are still
// recorded so the closure can reach their values, but the backward sweep only
// descends into grad-requiring subgraphs.
template <class S>
Value<S> make_op(Tensor<S> out, std::vector<Value<S>> parents,
                 std::function<void(Node<S>&)> backward_fn) {
    auto n = std::make_shared<Node<S>>();
    n->value = std::move(out);
    bool needs = false;
    for (const auto& p : parents) needs = needs || p.requires_grad();
    n->requires_grad = needs;
    if (needs) {
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node());
        n->backward_fn = std::move(backward_fn);
    }
    return Value<S>(std::move(n));
}

// Accumulate helper used inside backward closures.
template <class S>
void accum(const std::shared_ptr<Node<S>>& parent, const S* contrib) {
    if (!parent->requires_grad) return;
    parent->ensure_grad();
    S* g = parent->grad.data.data();
    const int64_t n = parent->grad.numel();
    for (int64_t i = 0; i < n; ++i) g[i] += contrib[i];
}

}  // namespace sgenet::nn
