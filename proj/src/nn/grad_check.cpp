#include "saw/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "saw/errors.hpp"

namespace saw::nn {

namespace {

double evaluate(const ScalarFn& f, const Tensor& x) {
    Tape tape;
    const Var out = f(tape, tape.constant(x));
    if (out.value().size() != 1) throw ShapeError("grad_check: function output has shape " + shape_str(out.shape()));
    return out.value()[0];
}

}  // namespace

double grad_check(const ScalarFn& f, const Tensor& x, double h) {
    Tensor analytic;
    {
        Tape tape;
        const Var in = tape.leaf(x);
        const Var out = f(tape, in);
        if (out.value().size() != 1) {
            throw ShapeError("grad_check: function output has shape " + shape_str(out.shape()));
        }
        tape.backward(out);
        analytic = tape.grad(in.id).shape() == x.shape() ? tape.grad(in.id) : Tensor::zeros_like(x);
    }
    double worst = 0.0;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = evaluate(f, probe);
        probe[i] = x[i] - h;
        const double down = evaluate(f, probe);
        probe[i] = x[i];
        const double fd = (up - down) / (2.0 * h);
        const double ad = analytic[i];
        worst = std::max(worst, std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd)));
    }
    return worst;
}

}  // namespace saw::nn
