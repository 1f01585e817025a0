#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "saw/nn/tensor.hpp"

namespace saw::nn {

/// Named parameters, iterated in name order.
using ParamMap = std::map<std::string, Tensor>;

struct AdamOptions {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias-corrected moments.
class Adam {
public:
    explicit Adam(AdamOptions opt = {}) : opt_(opt) {}

    /// One update of every parameter that has an entry in `grads`.
    void step(ParamMap& params, const ParamMap& grads);

    std::uint64_t steps() const noexcept { return t_; }
    const AdamOptions& options() const noexcept { return opt_; }
    void set_lr(double lr) { opt_.lr = lr; }

private:
    AdamOptions opt_;
    ParamMap m_;
    ParamMap v_;
    std::uint64_t t_ = 0;
};

}  // namespace saw::nn
