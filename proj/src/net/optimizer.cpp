#include "semdet/net/optimizer.hpp"

#include "semdet/common/errors.hpp"

#include <cmath>

namespace semdet::net {

Adam::Adam(const AdamConfig& cfg, const Network<float>& model) : cfg_(cfg)
{
    if (!(cfg.lr > 0.0) || !(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0) ||
        !(cfg.eps > 0.0)) {
        throw ValidationFailure("adam: lr and eps must be positive, betas in [0, 1)");
    }
    for (const auto& p : model.parameters()) {
        m_.emplace_back(p.value.shape());
        v_.emplace_back(p.value.shape());
    }
}

void Adam::step(Network<float>& model, const Gradients<float>& grads)
{
    auto& params = model.parameters();
    if (grads.size() != params.size() || m_.size() != params.size()) {
        throw ShapeMismatch("adam: gradient count does not match the model");
    }
    ++steps_;
    const double b1 = cfg_.beta1;
    const double b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, steps_);
    const double c2 = 1.0 - std::pow(b2, steps_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& w = params[i].value;
        const auto& g = grads[i];
        if (g.shape() != w.shape()) {
            throw ShapeMismatch("adam: gradient shape mismatch for " + params[i].name);
        }
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double gk = g[k];
            const double mk = b1 * m[k] + (1.0 - b1) * gk;
            const double vk = b2 * v[k] + (1.0 - b2) * gk * gk;
            m[k] = static_cast<float>(mk);
            v[k] = static_cast<float>(vk);
            w[k] = static_cast<float>(w[k] - cfg_.lr * (mk / c1) / (std::sqrt(vk / c2) + cfg_.eps));
        }
    }
}

} // namespace semdet::net
