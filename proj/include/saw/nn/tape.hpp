#pragma once

#include <cstddef>
#include <deque>
#include <functional>

#include "saw/nn/tensor.hpp"

namespace saw::nn {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Tensor& grad() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    bool requires_grad() const;
};

/// Reverse-mode autodiff record. Nodes are appended in evaluation order, which
/// is a topological order; backward() walks them once in reverse, and
/// gradients accumulate additively where a value fans out.
///
/// A Tape is used from one thread at a time. Independent Tapes may run
/// concurrently.
class Tape {
public:
    // Called with the tape and the id of the node being differentiated.
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf without gradient.
    Var constant(Tensor value);
    /// Leaf that accumulates a gradient.
    Var leaf(Tensor value);

    /// Records an op result. `backward` runs only if some input requires grad.
    Var record(Tensor value, bool requires_grad, BackwardFn backward);

    /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must hold one element.
    void backward(Var loss);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    /// Gradient buffer of `id`, zero-initialized on first access.
    Tensor& grad_buffer(std::size_t id);

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        BackwardFn backward;
    };
    // deque: references to earlier nodes stay valid while recording.
    std::deque<Node> nodes_;
};

}  // namespace saw::nn
