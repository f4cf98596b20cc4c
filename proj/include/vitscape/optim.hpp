#pragma once

#include "vitscape/params.hpp"

namespace vitscape {

struct AdamWConfig {
    double lr = 1e-3;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
};

struct OptimizerState {
    ParameterSet m; // first moments
    ParameterSet v; // second moments
    long step = 0;

    static OptimizerState init(const ParameterSet& params);
};

// Bias-corrected Adam with decoupled weight decay. Decay multiplies the
// parameter directly (p -= lr * wd * p) before the adaptive step; the
// adaptive step never sees the decay.
void adamw_step(ParameterSet& params, const ParameterSet& grads, OptimizerState& state,
                const AdamWConfig& cfg);

} // namespace vitscape
