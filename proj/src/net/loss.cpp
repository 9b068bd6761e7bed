#include "semdet/net/loss.hpp"

#include "semdet/common/errors.hpp"

#include <algorithm>
#include <cmath>

namespace semdet::net {

void LossWeights::validate() const
{
    if (!(heatmap >= 0.0 && offset >= 0.0 && size >= 0.0) || !std::isfinite(heatmap + offset + size)) {
        throw ValidationFailure("loss weights must be finite and non-negative");
    }
    if (!(alpha > 0.0 && beta > 0.0) || !std::isfinite(alpha + beta)) {
        throw ValidationFailure("focal exponents must be finite and positive");
    }
}

namespace {

std::size_t count_positives(std::span<const float> target)
{
    return static_cast<std::size_t>(std::count(target.begin(), target.end(), 1.0f));
}

double clip_prob(double p)
{
    return std::clamp(p, kProbClip, 1.0 - kProbClip);
}

double sigmoid(double z)
{
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double focal_term(double p, float y, double alpha, double beta)
{
    if (y == 1.0f) {
        return -std::pow(1.0 - p, alpha) * std::log(p);
    }
    return -std::pow(1.0 - y, beta) * std::pow(p, alpha) * std::log(1.0 - p);
}

} // namespace

template <typename T>
T focal_loss(std::span<const T> pred, std::span<const float> target, double alpha, double beta)
{
    if (pred.size() != target.size()) {
        throw ShapeMismatch("focal_loss: prediction and target sizes differ");
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, count_positives(target)));
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        sum += focal_term(clip_prob(static_cast<double>(pred[i])), target[i], alpha, beta);
    }
    return static_cast<T>(sum / n);
}

template <typename T>
T focal_loss_logits(std::span<const T> logits, std::span<const float> target, double alpha, double beta,
                    std::span<T> dlogits)
{
    if (logits.size() != target.size() || dlogits.size() != logits.size()) {
        throw ShapeMismatch("focal_loss_logits: logits, target and gradient sizes differ");
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, count_positives(target)));
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double raw = sigmoid(static_cast<double>(logits[i]));
        const double p = clip_prob(raw);
        const float y = target[i];
        sum += focal_term(p, y, alpha, beta);
        double g = 0.0;
        if (raw == p) {
            if (y == 1.0f) {
                g = alpha * p * std::pow(1.0 - p, alpha) * std::log(p) - std::pow(1.0 - p, alpha + 1.0);
            } else {
                g = -std::pow(1.0 - y, beta) *
                    (alpha * std::pow(p, alpha) * (1.0 - p) * std::log(1.0 - p) - std::pow(p, alpha + 1.0));
            }
        }
        dlogits[i] = static_cast<T>(g / n);
    }
    return static_cast<T>(sum / n);
}

template <typename T>
T masked_l1_loss(std::span<const T> pred, std::span<const float> target, std::span<const std::uint8_t> mask,
                 int channels, std::span<T> dpred)
{
    const std::size_t cells = mask.size();
    if (pred.size() != cells * static_cast<std::size_t>(channels) || target.size() != pred.size() ||
        (!dpred.empty() && dpred.size() != pred.size())) {
        throw ShapeMismatch("masked_l1_loss: size mismatch");
    }
    const std::size_t masked = static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(),
                                                                      [](std::uint8_t m) { return m != 0; }));
    if (!dpred.empty()) {
        std::fill(dpred.begin(), dpred.end(), T{0});
    }
    if (masked == 0) {
        return T{0};
    }
    const double denom = static_cast<double>(masked) * channels;
    double sum = 0.0;
    for (int c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < cells; ++i) {
            if (!mask[i]) {
                continue;
            }
            const std::size_t k = static_cast<std::size_t>(c) * cells + i;
            const double d = static_cast<double>(pred[k]) - target[k];
            sum += std::abs(d);
            if (!dpred.empty()) {
                dpred[k] = static_cast<T>((d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / denom);
            }
        }
    }
    return static_cast<T>(sum / denom);
}

namespace {

template <typename T>
void check_target(const Network<T>& model, const codec::EncodedTarget& target)
{
    const auto& cfg = model.config();
    const int hw = cfg.out_size();
    if (target.num_classes != cfg.num_classes || target.height != hw || target.width != hw) {
        throw ShapeMismatch("target is " + std::to_string(target.num_classes) + "x" + std::to_string(target.height) +
                            "x" + std::to_string(target.width) + ", model head is " +
                            std::to_string(cfg.num_classes) + "x" + std::to_string(hw) + "x" + std::to_string(hw));
    }
}

template <typename T>
LossBreakdown compute(const ForwardPass<T>& pass, const codec::EncodedTarget& target,
                      const LossWeights& w, HeadGradients<T>* grads)
{
    LossBreakdown out;
    const std::span<const std::uint8_t> mask(target.center_mask);
    if (grads) {
        grads->heatmap_logits = Tensor<T>(pass.heatmap_logits.shape());
        grads->offset = Tensor<T>(pass.offset.shape());
        grads->size_raw = Tensor<T>(pass.size_raw.shape());
        out.heatmap = focal_loss_logits<T>(pass.heatmap_logits.data(), target.heatmap, w.alpha, w.beta,
                                           grads->heatmap_logits.data());
        out.offset = masked_l1_loss<T>(pass.offset.data(), target.offset, mask, 2, grads->offset.data());
        const Tensor<T> size = pass.size();
        out.size = masked_l1_loss<T>(size.data(), target.size, mask, 2, grads->size_raw.data());
        for (std::size_t i = 0; i < size.size(); ++i) {
            const T raw = pass.size_raw[i];
            const bool clamped = raw < T(-kSizeLogClamp) || raw > T(kSizeLogClamp);
            grads->size_raw[i] = clamped ? T{0} : static_cast<T>(grads->size_raw[i] * size[i] * w.size);
        }
        for (auto& g : grads->heatmap_logits.data()) {
            g = static_cast<T>(g * w.heatmap);
        }
        for (auto& g : grads->offset.data()) {
            g = static_cast<T>(g * w.offset);
        }
    } else {
        out.heatmap = focal_loss<T>(pass.heatmap().data(), target.heatmap, w.alpha, w.beta);
        out.offset = masked_l1_loss<T>(pass.offset.data(), target.offset, mask, 2);
        out.size = masked_l1_loss<T>(pass.size().data(), target.size, mask, 2);
    }
    out.total = w.heatmap * out.heatmap + w.offset * out.offset + w.size * out.size;
    if (!std::isfinite(out.total)) {
        throw NonFiniteLoss("loss is not finite (heatmap " + std::to_string(out.heatmap) + ", offset " +
                            std::to_string(out.offset) + ", size " + std::to_string(out.size) + ")");
    }
    return out;
}

} // namespace

template <typename T>
LossBreakdown backward(const Network<T>& model, std::span<const T> input, const codec::EncodedTarget& target,
                       const LossWeights& weights, Gradients<T>& grads)
{
    check_target(model, target);
    const ForwardPass<T> pass = model.forward(input);
    HeadGradients<T> hg;
    const LossBreakdown out = compute<T>(pass, target, weights, &hg);
    grads = model.backward(pass, hg);
    return out;
}

template <typename T>
LossBreakdown evaluate_loss(const Network<T>& model, std::span<const T> input, const codec::EncodedTarget& target,
                            const LossWeights& weights)
{
    check_target(model, target);
    return compute<T>(model.forward(input), target, weights, nullptr);
}

template <typename T>
void accumulate(Gradients<T>& sum, const Gradients<T>& g)
{
    if (sum.size() != g.size()) {
        throw ShapeMismatch("accumulate: gradient lists differ in length");
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (sum[i].shape() != g[i].shape()) {
            throw ShapeMismatch("accumulate: shape mismatch at parameter " + std::to_string(i));
        }
        for (std::size_t k = 0; k < g[i].size(); ++k) {
            sum[i][k] += g[i][k];
        }
    }
}

#define SEMDET_INSTANTIATE_LOSS(T)                                                                               \
    template T focal_loss<T>(std::span<const T>, std::span<const float>, double, double);                      \
    template T focal_loss_logits<T>(std::span<const T>, std::span<const float>, double, double, std::span<T>); \
    template T masked_l1_loss<T>(std::span<const T>, std::span<const float>, std::span<const std::uint8_t>,    \
                                 int, std::span<T>);                                                            \
    template LossBreakdown backward<T>(const Network<T>&, std::span<const T>, const codec::EncodedTarget&,     \
                                       const LossWeights&, Gradients<T>&);                                     \
    template LossBreakdown evaluate_loss<T>(const Network<T>&, std::span<const T>,                              \
                                            const codec::EncodedTarget&, const LossWeights&);                  \
    template void accumulate<T>(Gradients<T>&, const Gradients<T>&);

SEMDET_INSTANTIATE_LOSS(float)
SEMDET_INSTANTIATE_LOSS(double)

} // namespace semdet::net
