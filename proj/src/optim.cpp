#include "mtbr/optim.hpp"

#include <cmath>

#include "mtbr/errors.hpp"

namespace mtbr {

namespace {

void check_shapes(std::span<Tensor* const> params, std::span<const Tensor> grads) {
    if (params.size() != grads.size()) {
        throw DimensionError("optimizer: " + std::to_string(params.size()) + " parameters but " +
                             std::to_string(grads.size()) + " gradients");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->shape() != grads[i].shape()) {
            throw DimensionError("optimizer: parameter " + std::to_string(i) + " is " +
                                 shape_str(params[i]->shape()) + ", gradient is " + shape_str(grads[i].shape()));
        }
    }
}

}  // namespace

void sgd_step(std::span<Tensor* const> params, std::span<const Tensor> grads, double lr) {
    check_shapes(params, grads);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i]->data();
        const auto g = grads[i].data();
        for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
    }
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& s) {
    check_shapes(params, grads);
    if (s.m.empty()) {
        for (auto* p : params) {
            s.m.emplace_back(p->shape());
            s.v.emplace_back(p->shape());
        }
    }
    if (s.m.size() != params.size()) throw DimensionError("adam: state does not match the parameter list");
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (s.m[i].shape() != params[i]->shape()) throw DimensionError("adam: moment shape mismatch");
        auto p = params[i]->data();
        auto m = s.m[i].data();
        auto v = s.v[i].data();
        const auto g = grads[i].data();
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * g[k];
            v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * g[k] * g[k];
            const double m_hat = m[k] / c1;
            const double v_hat = v[k] / c2;
            p[k] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
        }
    }
}

}  // namespace mtbr
