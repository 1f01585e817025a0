#include "saw/nn/adam.hpp"

#include <cmath>

#include "saw/errors.hpp"

namespace saw::nn {

void Adam::step(ParamMap& params, const ParamMap& grads) {
    for (const auto& [name, g] : grads) {
        const auto it = params.find(name);
        if (it == params.end()) throw InputError("adam: gradient for unknown parameter '" + name + "'");
        require_same_shape(it->second, g, ("adam: parameter '" + name + "'").c_str());
    }
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (const auto& [name, g] : grads) {
        Tensor& p = params.at(name);
        auto [mit, m_new] = m_.try_emplace(name, Tensor::zeros_like(p));
        auto [vit, v_new] = v_.try_emplace(name, Tensor::zeros_like(p));
        Tensor& m = mit->second;
        Tensor& v = vit->second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g[i];
            v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * g[i] * g[i];
            p[i] -= opt_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt_.eps);
        }
    }
}

}  // namespace saw::nn
