#include "vitscape/optim.hpp"

#include "vitscape/errors.hpp"

#include <cmath>

namespace vitscape {

OptimizerState OptimizerState::init(const ParameterSet& params) {
    OptimizerState s;
    s.m = ParameterSet::zeros_like(params);
    s.v = ParameterSet::zeros_like(params);
    s.step = 0;
    return s;
}

void adamw_step(ParameterSet& params, const ParameterSet& grads, OptimizerState& state,
                const AdamWConfig& cfg) {
    require_same_layout(params, grads, "adamw_step params/grads");
    require_same_layout(params, state.m, "adamw_step params/state");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params.value(i);
        const Tensor& g = grads.value(i);
        Tensor& m = state.m.value(i);
        Tensor& v = state.v.value(i);
        for (long long k = 0; k < p.numel(); ++k) {
            const double gk = g[k];
            if (!std::isfinite(gk)) {
                throw std::runtime_error("adamw_step: non-finite gradient for " + params.name(i));
            }
            if (cfg.weight_decay != 0.0) {
                p[k] -= cfg.lr * cfg.weight_decay * p[k];
            }
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            p[k] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

} // namespace vitscape
