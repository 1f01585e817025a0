#pragma once

#include <functional>

#include "saw/nn/tape.hpp"

namespace saw::nn {

/// Builds a scalar (1-element) output from the input variable on the given tape.
using ScalarFn = std::function<Var(Tape&, Var)>;

/// Max over coordinates of |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|), where
/// g_fd is the central difference with step h. Throws ShapeError if f is not
/// scalar-valued.
double grad_check(const ScalarFn& f, const Tensor& x, double h = 1e-5);

}  // namespace saw::nn
