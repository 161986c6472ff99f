#include "exitrack/nn/adam.hpp"

#include <cmath>

namespace exitrack::nn {

Adam::Adam(const ParameterSet& params, AdamConfig cfg)
    : cfg_(cfg), m_(params.zero_gradients()), v_(params.zero_gradients()) {}

void Adam::step(ParameterSet& params, const Gradients& grads) {
    step(params, grads, std::vector<bool>(static_cast<std::size_t>(params.size()), true));
}

void Adam::step(ParameterSet& params, const Gradients& grads, const std::vector<bool>& trainable) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (int i = 0; i < params.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (!trainable[k]) continue;
        m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * grads[k];
        v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * grads[k].cwiseProduct(grads[k]);
        Matrix& p = params.value(i);
        if (cfg_.weight_decay > 0.0) p *= (1.0 - cfg_.lr * cfg_.weight_decay);
        p.array() -= cfg_.lr * (m_[k].array() / bc1) / ((v_[k].array() / bc2).sqrt() + cfg_.eps);
    }
}

}  // namespace exitrack::nn
