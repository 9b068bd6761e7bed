#pragma once

#include "semdet/net/kernels.hpp"
#include "semdet/net/tensor.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace semdet::net {

/// Encoder-decoder layout: stride-2 conv stages, then nearest-upsample + conv
/// stages, then three heads (heatmap, offset, size) on the decoder output.
struct ModelConfig {
    int in_size = 480;
    int in_channels = 1;
    std::vector<int> down_channels{16, 32, 64, 64};
    std::vector<int> up_channels{64, 32};
    int head_channels = 32;  // 0: heads are a single 1x1 conv
    int num_classes = 5;
    double heatmap_prior = 0.1;  // initial sigmoid output of the heatmap head
    double size_prior = 16.0;    // initial size-head output, pixels

    int stride_out() const;
    int out_size() const { return in_size / stride_out(); }
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Keeps the encoder and trims or extends the decoder so that the heads sit
/// at `stride`. Throws ValidationFailure for a stride the encoder cannot give.
ModelConfig with_output_stride(ModelConfig cfg, int stride);

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
};

/// One gradient tensor per parameter, in parameter order.
template <typename T>
using Gradients = std::vector<Tensor<T>>;

/// Cached activations of one forward pass; input to backward.
template <typename T>
struct ForwardPass {
    std::vector<Tensor<T>> conv_in;   // per layer, after any upsampling
    std::vector<Tensor<T>> conv_out;  // per layer, after any ReLU
    Tensor<T> heatmap_logits;         // C x h x w
    Tensor<T> offset;                 // 2 x h x w
    Tensor<T> size_raw;               // 2 x h x w, log-space

    /// sigmoid(heatmap_logits)
    Tensor<T> heatmap() const;
    /// exp(clamp(size_raw)), strictly positive
    Tensor<T> size() const;
};

/// Gradients of a scalar loss with respect to the three head outputs.
template <typename T>
struct HeadGradients {
    Tensor<T> heatmap_logits;
    Tensor<T> offset;
    Tensor<T> size_raw;
};

inline constexpr double kSizeLogClamp = 10.0;

template <typename T>
class Network {
public:
    /// All parameters zero; call initialize() for a trainable start.
    explicit Network(const ModelConfig& cfg);

    /// He-uniform conv weights, zero biases, heatmap and size head biases set
    /// from the configured priors. Deterministic in `seed`.
    void initialize(std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    std::vector<Parameter<T>>& parameters() { return params_; }
    const std::vector<Parameter<T>>& parameters() const { return params_; }
    std::size_t parameter_count() const;

    /// Index of the named parameter, or -1.
    int find(const std::string& name) const;

    /// `image` is in_channels x in_size x in_size, already normalized.
    /// Throws ShapeMismatch on a wrong-sized input.
    ForwardPass<T> forward(std::span<const T> image) const;

    Gradients<T> backward(const ForwardPass<T>& pass, const HeadGradients<T>& grads) const;

    Gradients<T> zero_gradients() const;

    template <typename U>
    Network<U> cast() const
    {
        Network<U> out(cfg_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            const auto& src = params_[i].value;
            auto& dst = out.parameters()[i].value;
            for (std::size_t k = 0; k < src.size(); ++k) {
                dst[k] = static_cast<U>(src[k]);
            }
        }
        return out;
    }

private:
    struct Layer {
        std::string name;
        ConvShape shape;
        bool relu = true;
        bool upsample = false;
        int source = -1;  // producing layer, -1 for the image
        int weight = -1;
        int bias = -1;
    };

    int add_layer(const std::string& name, int source, int in_c, int in_hw, int out_c, int kernel, int stride,
                  bool relu, bool upsample);

    ModelConfig cfg_;
    std::vector<Parameter<T>> params_;
    std::vector<Layer> layers_;
    int heatmap_layer_ = -1;
    int offset_layer_ = -1;
    int size_layer_ = -1;
};

extern template class Network<float>;
extern template class Network<double>;

/// pixel/255 standardized with the given statistics.
std::vector<float> normalize_image(std::span<const std::uint8_t> pixels, double mean, double std);

} // namespace semdet::net
