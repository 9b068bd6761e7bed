#pragma once

#include "semdet/codec/codec.hpp"
#include "semdet/net/network.hpp"

#include <cstdint>
#include <span>

namespace semdet::net {

struct LossWeights {
    double heatmap = 1.0;
    double offset = 1.0;
    double size = 0.1;
    double alpha = 2.0;  // focal focusing exponent
    double beta = 4.0;   // penalty reduction exponent near centres

    void validate() const;
};

inline constexpr double kProbClip = 1e-4;

/// Penalty-reduced pixelwise focal loss on probabilities (clipped to
/// [1e-4, 1-1e-4]), normalized by the number of Y == 1 cells (at least 1).
template <typename T>
T focal_loss(std::span<const T> pred, std::span<const float> target, double alpha, double beta);

/// Same loss evaluated on logits; writes d loss / d logit. Cells whose
/// probability is clipped get zero gradient.
template <typename T>
T focal_loss_logits(std::span<const T> logits, std::span<const float> target, double alpha, double beta,
                    std::span<T> dlogits);

/// Mean absolute error over masked cells and all `channels` components.
/// pred/target are channels x cells; 0 when the mask is empty. Writes the
/// gradient w.r.t. pred when `dpred` is non-empty.
template <typename T>
T masked_l1_loss(std::span<const T> pred, std::span<const float> target, std::span<const std::uint8_t> mask,
                 int channels, std::span<T> dpred = {});

struct LossBreakdown {
    double total = 0.0;
    double heatmap = 0.0;
    double offset = 0.0;
    double size = 0.0;
};

/// Loss of one image and its gradient w.r.t. every parameter.
/// Throws NonFiniteLoss if the loss is not finite.
template <typename T>
LossBreakdown backward(const Network<T>& model, std::span<const T> input, const codec::EncodedTarget& target,
                       const LossWeights& weights, Gradients<T>& grads);

/// Loss only (no gradient).
template <typename T>
LossBreakdown evaluate_loss(const Network<T>& model, std::span<const T> input, const codec::EncodedTarget& target,
                            const LossWeights& weights);

/// sum += g, elementwise over every tensor.
template <typename T>
void accumulate(Gradients<T>& sum, const Gradients<T>& g);

} // namespace semdet::net
