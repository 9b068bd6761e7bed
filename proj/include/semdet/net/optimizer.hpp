#pragma once

#include "semdet/net/network.hpp"

namespace semdet::net {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moments are kept per parameter element.
class Adam {
public:
    Adam(const AdamConfig& cfg, const Network<float>& model);

    void step(Network<float>& model, const Gradients<float>& grads);

    int steps() const { return steps_; }
    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }
    const std::vector<Tensor<float>>& first_moment() const { return m_; }
    const std::vector<Tensor<float>>& second_moment() const { return v_; }

private:
    AdamConfig cfg_;
    int steps_ = 0;
    std::vector<Tensor<float>> m_;
    std::vector<Tensor<float>> v_;
};

} // namespace semdet::net
