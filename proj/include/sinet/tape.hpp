#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "sinet/common.hpp"
#include "sinet/tensor.hpp"

namespace sinet {

// Reverse-mode differentiation tape. Ops append nodes in execution order;
// backward() replays them in strict reverse order exactly once, accumulating
// gradients into per-node buffers. A tape is single-threaded and is consumed
// by its backward pass.
class Tape {
public:
    using BackwardFn = std::function<void(const Real* grad_out, Tape&)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers a tensor as a tracked leaf (parameter or input).
    Tensor watch(const Tensor& t) {
        require(!consumed_, ErrorKind::State, "cannot watch tensors on a consumed tape");
        nodes_.push_back(Node{t.shape(), {}, nullptr, true});
        grads_.emplace_back();
        return t.with_handle(this, static_cast<int>(nodes_.size()) - 1);
    }

    // Records an operation node. `inputs` lists the node ids of tracked
    // inputs (untracked inputs are simply omitted by the caller).
    int record(Shape out_shape, std::vector<int> inputs, BackwardFn fn) {
        require(!consumed_, ErrorKind::State, "cannot record ops on a consumed tape");
        nodes_.push_back(Node{out_shape, std::move(inputs), std::move(fn), false});
        grads_.emplace_back();
        return static_cast<int>(nodes_.size()) - 1;
    }

    // Runs the reverse pass from a scalar loss. May be called once.
    void backward(const Tensor& loss) {
        require(!consumed_, ErrorKind::State, "backward invoked twice on a consumed tape");
        require(loss.tape() == this, ErrorKind::State,
                "loss tensor was not produced through this tape");
        require(loss.numel() == 1, ErrorKind::Shape,
                "backward requires a scalar loss, got " + loss.shape().str());
        consumed_ = true;
        trace_.clear();

        grad_buffer(loss.node())[0] = Real(1);
        for (int id = loss.node(); id >= 0; --id) {
            if (grads_[id].empty()) continue; // node does not influence the loss
            trace_.push_back(id);
            Node& node = nodes_[id];
            if (node.is_leaf) continue;
            node.backward(grads_[id].data(), *this);
            node.backward = nullptr;    // release saved activations
            if (!keep_for_.empty() && keep_for_[id]) continue;
            grads_[id].clear();         // only leaf gradients are retained
            grads_[id].shrink_to_fit();
        }
    }

    bool consumed() const { return consumed_; }

    // Gradient of a leaf (or explicitly retained node) after backward().
    Tensor grad(const Tensor& t) const {
        require(consumed_, ErrorKind::State, "grad() requires a completed backward pass");
        require(t.tape() == this && t.node() >= 0, ErrorKind::State,
                "tensor is not tracked by this tape");
        const Node& node = nodes_[t.node()];
        if (grads_[t.node()].empty()) {
            return Tensor::zeros(node.shape.n, node.shape.c, node.shape.h, node.shape.w);
        }
        return Tensor::wrap(node.shape, grads_[t.node()]);
    }

    // Ask the tape to keep a non-leaf node's gradient through backward().
    void retain_grad(const Tensor& t) {
        require(t.tape() == this && t.node() >= 0, ErrorKind::State,
                "tensor is not tracked by this tape");
        if (keep_for_.size() < nodes_.size()) keep_for_.resize(nodes_.size() + 1024, false);
        keep_for_[t.node()] = true;
    }

    // Gradient accumulator for node `id`; allocated lazily at the node shape.
    std::vector<Real>& grad_buffer(int id) {
        if (grads_[id].empty()) grads_[id].assign(nodes_[id].shape.numel(), Real(0));
        return grads_[id];
    }

    const Shape& node_shape(int id) const { return nodes_[id].shape; }
    std::size_t node_count() const { return nodes_.size(); }

    // Node ids visited by the last backward pass, in visit order.
    const std::vector<int>& backward_trace() const { return trace_; }

    // Structural reachability: ids of leaf nodes that can influence `from`.
    std::vector<int> reachable_leaves(const Tensor& from) const {
        require(from.tape() == this && from.node() >= 0, ErrorKind::State,
                "tensor is not tracked by this tape");
        std::vector<char> seen(nodes_.size(), 0);
        std::vector<int> stack{from.node()};
        std::vector<int> leaves;
        seen[from.node()] = 1;
        while (!stack.empty()) {
            int id = stack.back();
            stack.pop_back();
            if (nodes_[id].is_leaf) leaves.push_back(id);
            for (int in : nodes_[id].inputs) {
                if (!seen[in]) {
                    seen[in] = 1;
                    stack.push_back(in);
                }
            }
        }
        return leaves;
    }

private:
    struct Node {
        Shape shape;
        std::vector<int> inputs;
        BackwardFn backward;
        bool is_leaf;
    };

    std::vector<Node> nodes_;
    std::vector<std::vector<Real>> grads_;
    std::vector<char> keep_for_;
    std::vector<int> trace_;
    bool consumed_ = false;
};

// The tape shared by a set of op inputs; errors out on a mix of tapes.
inline Tape* common_tape(std::initializer_list<const Tensor*> inputs) {
    Tape* tape = nullptr;
    for (const Tensor* t : inputs) {
        if (!t || !t->tracked()) continue;
        if (!tape) {
            tape = t->tape();
        } else {
            require(tape == t->tape(), ErrorKind::State,
                    "op inputs belong to different tapes");
        }
    }
    return tape;
}

} // namespace sinet
