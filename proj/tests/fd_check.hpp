#pragma once
// Central-finite-difference gradient checking against the reverse-mode tape.
// Framework-free so both the unit tests and the acceptance gate can use it.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "sinet/tape.hpp"
#include "sinet/tensor.hpp"

namespace fd {

using sinet::Real;
using sinet::Tape;
using sinet::Tensor;

struct FdResult {
    Real max_rel = 0;
    std::size_t probes = 0;
};

// Relative error with a floor so near-zero gradient pairs compare absolutely.
inline Real rel_error(Real analytic, Real numeric) {
    const Real denom = std::max({std::abs(analytic), std::abs(numeric), Real(1e-6)});
    return std::abs(analytic - numeric) / denom;
}

// `f` maps the input tensors to a scalar loss. The analytic pass watches all
// inputs on one tape; the numeric pass re-evaluates `f` on perturbed copies.
// Probes are taken at a fixed stride so large tensors stay affordable.
inline FdResult check_gradients(const std::vector<Tensor>& inputs,
                                const std::function<Tensor(const std::vector<Tensor>&)>& f,
                                Real eps = Real(1e-5),
                                std::size_t max_probes_per_input = 24) {
    Tape tape;
    std::vector<Tensor> watched;
    watched.reserve(inputs.size());
    for (const Tensor& t : inputs) watched.push_back(tape.watch(t));
    tape.backward(f(watched));
    std::vector<std::vector<Real>> analytic;
    analytic.reserve(inputs.size());
    for (const Tensor& w : watched) analytic.push_back(tape.grad(w).values());

    FdResult result;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const std::size_t n = inputs[i].numel();
        const std::size_t step = std::max<std::size_t>(1, n / max_probes_per_input);
        for (std::size_t j = 0; j < n; j += step) {
            std::vector<Tensor> probe = inputs;
            std::vector<Real> hi = inputs[i].values();
            std::vector<Real> lo = hi;
            hi[j] += eps;
            lo[j] -= eps;
            probe[i] = Tensor::from_data(inputs[i].shape(), std::move(hi));
            const Real up = f(probe).item();
            probe[i] = Tensor::from_data(inputs[i].shape(), std::move(lo));
            const Real down = f(probe).item();
            const Real numeric = (up - down) / (2 * eps);
            result.max_rel = std::max(result.max_rel, rel_error(analytic[i][j], numeric));
            ++result.probes;
        }
    }
    return result;
}

} // namespace fd
