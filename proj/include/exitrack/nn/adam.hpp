#pragma once

#include <vector>

#include "exitrack/nn/parameters.hpp"

namespace exitrack::nn {

struct AdamConfig {
    double lr{1e-3};
    double beta1{0.9};
    double beta2{0.999};
    double eps{1e-8};
    double weight_decay{0.0};  // decoupled (AdamW style)
};

class Adam {
public:
    Adam(const ParameterSet& params, AdamConfig cfg);

    /// One update. Parameters with trainable[i] == false are left untouched, moments included.
    void step(ParameterSet& params, const Gradients& grads, const std::vector<bool>& trainable);
    void step(ParameterSet& params, const Gradients& grads);

    [[nodiscard]] long steps() const { return t_; }
    AdamConfig& config() { return cfg_; }

private:
    AdamConfig cfg_;
    Gradients m_;
    Gradients v_;
    long t_{0};
};

}  // namespace exitrack::nn
