#pragma once

#include <cmath>
#include <vector>

#include "plast/activation.hpp"

namespace plast::testing {

// Central finite difference of the scalar activation value.
inline double fd_deriv(const ActivationSpec& spec, const ActivationState& state,
                       double x, double h = 1e-5) {
    return (act_value(spec, state, x + h) - act_value(spec, state, x - h)) /
           (2 * h);
}

// One representative parameter grid per kind, drawn from the documented
// sweep values.
inline std::vector<ActivationSpec> sweep_specs() {
    using K = ActKind;
    std::vector<ActivationSpec> out;
    out.push_back({.kind = K::ReLU});
    for (double a : {0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0})
        out.push_back({.kind = K::LeakyReLU, .alpha = a});
    for (double a : {0.1, 0.25, 0.65, 0.9})
        out.push_back({.kind = K::PReLU, .alpha = a, .scope = PreluScope::Neuron});
    out.push_back({.kind = K::RReLU, .lower = 0.6, .upper = 0.8});
    out.push_back({.kind = K::RReLU, .lower = 0.125, .upper = 0.333});
    out.push_back({.kind = K::Sigmoid});
    out.push_back({.kind = K::Tanh});
    for (double b : {0.05, 0.5, 1.0}) {
        out.push_back({.kind = K::Swish, .beta = b});
        out.push_back({.kind = K::GeLU, .beta = b});
    }
    for (double a : {0.5, 1.0, 2.4, 3.9}) {
        out.push_back({.kind = K::ELU, .alpha = a});
        out.push_back({.kind = K::CELU, .alpha = a});
    }
    for (double a : {1.0, kSeluAlpha, 3.7})
        out.push_back({.kind = K::SELU, .alpha = a});
    out.push_back({.kind = K::CReLU});
    out.push_back({.kind = K::Rational, .deg_p = 5, .deg_q = 4});
    for (double a : {0.1, 0.5, 0.9})
        for (double cp : {1.0, 3.0, 5.0})
            out.push_back({.kind = K::SmoothLeaky, .alpha = a, .c = cp, .p = cp});
    out.push_back({.kind = K::RandSmoothLeaky, .c = 3.0, .p = 2.0, .lower = 0.3,
                   .upper = 0.6});
    out.push_back({.kind = K::BoPReLU, .alpha = 0.65, .lower = 0.6, .upper = 0.8,
                   .scope = PreluScope::Neuron});
    out.push_back({.kind = K::RSELU, .lower = 0.9232, .upper = 2.4232});
    return out;
}

}  // namespace plast::testing
