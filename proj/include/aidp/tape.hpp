#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "aidp/tensor.hpp"

namespace aidp {

class Tape;

/// Lightweight handle to a node on a tape.
class Var {
  public:
    Var() = default;
    Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

    Tape* tape() const { return tape_; }
    std::uint32_t index() const { return index_; }
    bool valid() const { return tape_ != nullptr; }

    const Tensor& value() const;
    /// Gradient of the last backward pass; zero tensor shape-of-value
    /// semantics: throws if the node does not track gradients.
    const std::vector<double>& grad() const;
    Tensor grad_tensor() const;

  private:
    Tape* tape_ = nullptr;
    std::uint32_t index_ = 0;
};

/// Define-by-run reverse-mode tape. Rebuilt per forward pass; single-threaded
/// by contract (one forward/backward pair never shared across threads).
class Tape {
  public:
    struct Node {
        const char* op = "";
        Tensor out;
        std::vector<double> grad;  // same numel as out when requires_grad
        bool requires_grad = false;
        // Accumulates into parent grads; invoked in reverse creation order.
        std::function<void(Tape&, Node&)> backward_fn;
    };

    /// Register an input value. Gradient tracking follows t.requires_grad.
    Var leaf(Tensor t);
    Var leaf(Tensor t, bool requires_grad);

    /// Register an operator output. requires_grad is OR over parents.
    Var make_node(const char* op, std::initializer_list<Var> parents, Tensor out,
                  std::function<void(Tape&, Node&)> backward_fn);

    /// Reverse-mode sweep from a scalar loss. All gradient buffers are
    /// zeroed first, so repeated calls on the same graph are identical.
    void backward(Var loss);

    Node& node(std::uint32_t i) { return nodes_[i]; }
    const Node& node(std::uint32_t i) const { return nodes_[i]; }
    std::size_t size() const { return nodes_.size(); }

  private:
    // Deque keeps node references stable while the graph grows, so callers
    // may hold value() references across further op construction.
    std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->node(index_).out; }

inline const std::vector<double>& Var::grad() const {
    const auto& n = tape_->node(index_);
    if (!n.requires_grad)
        throw ContractError("gradient requested for a node that does not require grad");
    return n.grad;
}

}  // namespace aidp
