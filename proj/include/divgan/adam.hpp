#pragma once

#include "divgan/tensor.hpp"

#include <cstdint>
#include <vector>

namespace divgan {

struct AdamHyper {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First and second moment buffers mirroring a parameter list.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::int64_t t = 0;

    static AdamState zeros_like(const std::vector<Tensor>& params);
    bool operator==(const AdamState&) const = default;
};

void validate(const AdamHyper& hyper);

/// One bias-corrected Adam update, applied in place to `params` and `state`.
/// Throws DomainError on non-finite gradients before touching anything.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamHyper& hyper);

} // namespace divgan
