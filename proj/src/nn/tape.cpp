#include "saw/nn/tape.hpp"

#include "saw/errors.hpp"

namespace saw::nn {

const Tensor& Var::value() const { return tape->value(id); }
const Tensor& Var::grad() const { return tape->grad(id); }
bool Var::requires_grad() const { return tape->requires_grad(id); }

Var Tape::constant(Tensor value) { return record(std::move(value), false, nullptr); }

Var Tape::leaf(Tensor value) { return record(std::move(value), true, nullptr); }

Var Tape::record(Tensor value, bool requires_grad, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, requires_grad ? std::move(backward) : nullptr});
    return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.shape() != n.value.shape()) n.grad = Tensor::zeros_like(n.value);
    return n.grad;
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw InputError("backward: variable belongs to another tape");
    if (value(loss.id).size() != 1) {
        throw ShapeError("backward: loss must be a single element, got shape " + shape_str(value(loss.id).shape()));
    }
    grad_buffer(loss.id)[0] += 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.backward || n.grad.shape() != n.value.shape()) continue;
        n.backward(*this, i);
    }
}

}  // namespace saw::nn
