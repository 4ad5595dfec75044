#include "aidp/tape.hpp"

#include <algorithm>

namespace aidp {

Tensor Var::grad_tensor() const {
    const auto& g = grad();
    Tensor t = Tensor::uninit(value().shape());
    std::copy(g.begin(), g.end(), t.data());
    return t;
}

Var Tape::leaf(Tensor t) { return leaf(std::move(t), t.requires_grad); }

Var Tape::leaf(Tensor t, bool requires_grad) {
    Node n;
    n.op = "leaf";
    n.out = std::move(t);
    n.out.requires_grad = requires_grad;
    n.requires_grad = requires_grad;
    if (requires_grad) n.grad.assign(n.out.size(), 0.0);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::make_node(const char* op, std::initializer_list<Var> parents, Tensor out,
                    std::function<void(Tape&, Node&)> backward_fn) {
    bool rg = false;
    for (const Var& p : parents) {
        if (p.tape() != this) throw ContractError("operands live on different tapes");
        rg = rg || nodes_[p.index()].requires_grad;
    }
    Node n;
    n.op = op;
    n.out = std::move(out);
    n.out.requires_grad = rg;
    n.requires_grad = rg;
    if (rg) {
        n.grad.assign(n.out.size(), 0.0);
        n.backward_fn = std::move(backward_fn);
    }
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::backward(Var loss) {
    if (loss.tape() != this) throw ContractError("loss lives on a different tape");
    Node& root = nodes_[loss.index()];
    if (root.out.size() != 1) throw ContractError("backward requires a scalar loss");
    for (Node& n : nodes_)
        if (n.requires_grad) std::fill(n.grad.begin(), n.grad.end(), 0.0);
    if (!root.requires_grad) {
        // Constant graph: every gradient is zero; expose them on the tensors.
        for (Node& n : nodes_)
            if (n.requires_grad) n.out.grad = n.grad;
        return;
    }
    root.grad[0] = 1.0;
    for (std::uint32_t i = loss.index() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.backward_fn) n.backward_fn(*this, n);
    }
    for (Node& n : nodes_)
        if (n.requires_grad) n.out.grad = n.grad;
}

}  // namespace aidp
