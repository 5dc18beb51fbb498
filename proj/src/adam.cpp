#include "divgan/adam.hpp"

#include "divgan/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace divgan {

AdamState AdamState::zeros_like(const std::vector<Tensor>& params)
{
    AdamState s;
    for (const Tensor& p : params) {
        s.m.emplace_back(p.shape(), 0.0);
        s.v.emplace_back(p.shape(), 0.0);
    }
    return s;
}

void validate(const AdamHyper& hyper)
{
    if (!(hyper.lr > 0.0)) throw std::invalid_argument("adam: lr must be positive");
    if (!(hyper.beta1 >= 0.0 && hyper.beta1 < 1.0)) throw std::invalid_argument("adam: beta1 must lie in [0, 1)");
    if (!(hyper.beta2 >= 0.0 && hyper.beta2 < 1.0)) throw std::invalid_argument("adam: beta2 must lie in [0, 1)");
    if (!(hyper.eps > 0.0)) throw std::invalid_argument("adam: eps must be positive");
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamHyper& hyper)
{
    validate(hyper);
    if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size()) {
        throw ShapeError("adam_step: parameter, gradient and state lists differ in length");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        require_same_shape(params[k], grads[k], "adam_step");
        require_same_shape(params[k], state.m[k], "adam_step");
        require_same_shape(params[k], state.v[k], "adam_step");
        if (!grads[k].all_finite()) {
            throw DomainError("adam_step: non-finite gradient in parameter tensor " + std::to_string(k));
        }
    }

    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double correction1 = 1.0 - std::pow(hyper.beta1, t);
    const double correction2 = 1.0 - std::pow(hyper.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        double* p = params[k].data();
        const double* g = grads[k].data();
        double* m = state.m[k].data();
        double* v = state.v[k].data();
        for (std::size_t i = 0; i < params[k].size(); ++i) {
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            p[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
        }
    }
}

} // namespace divgan
