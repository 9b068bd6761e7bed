#include "semdet/net/network.hpp"

#include "semdet/common/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace semdet::net {

int ModelConfig::stride_out() const
{
    const int levels = static_cast<int>(down_channels.size()) - static_cast<int>(up_channels.size());
    return levels >= 0 ? (1 << levels) : 0;
}

void ModelConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ValidationFailure("model config: " + msg); };
    if (down_channels.empty()) {
        fail("need at least one downsampling stage");
    }
    if (up_channels.size() > down_channels.size()) {
        fail("more upsampling than downsampling stages");
    }
    const int total_down = 1 << down_channels.size();
    if (in_size <= 0 || in_size % total_down != 0) {
        fail("in_size " + std::to_string(in_size) + " is not divisible by " + std::to_string(total_down));
    }
    if (in_channels < 1 || num_classes < 1 || head_channels < 0) {
        fail("channel counts must be positive");
    }
    for (int c : down_channels) {
        if (c < 1) {
            fail("stage channels must be positive");
        }
    }
    for (int c : up_channels) {
        if (c < 1) {
            fail("stage channels must be positive");
        }
    }
    if (!(heatmap_prior > 0.0 && heatmap_prior < 1.0) || !(size_prior > 0.0)) {
        fail("priors out of range");
    }
}

ModelConfig with_output_stride(ModelConfig cfg, int stride)
{
    const int levels = static_cast<int>(cfg.down_channels.size());
    int shift = 0;
    while (shift <= levels && (1 << shift) != stride) {
        ++shift;
    }
    if (shift > levels) {
        throw ValidationFailure("stride " + std::to_string(stride) + " is not a power of two in [1, " +
                                std::to_string(1 << levels) + "]");
    }
    const std::size_t ups = static_cast<std::size_t>(levels - shift);
    std::vector<int> up;
    for (std::size_t i = 0; i < ups; ++i) {
        // mirror the encoder widths on the way back up
        up.push_back(i < cfg.up_channels.size() ? cfg.up_channels[i]
                                                : cfg.down_channels[static_cast<std::size_t>(
                                                      std::max(0, levels - 2 - static_cast<int>(i)))]);
    }
    cfg.up_channels = std::move(up);
    return cfg;
}

nlohmann::json to_json(const ModelConfig& cfg)
{
    return {{"in_size", cfg.in_size},
            {"in_channels", cfg.in_channels},
            {"down_channels", cfg.down_channels},
            {"up_channels", cfg.up_channels},
            {"head_channels", cfg.head_channels},
            {"num_classes", cfg.num_classes},
            {"heatmap_prior", cfg.heatmap_prior},
            {"size_prior", cfg.size_prior},
            {"stride_out", cfg.stride_out()}};
}

ModelConfig model_config_from_json(const nlohmann::json& j)
{
    try {
        ModelConfig cfg;
        cfg.in_size = j.at("in_size").get<int>();
        cfg.in_channels = j.at("in_channels").get<int>();
        cfg.down_channels = j.at("down_channels").get<std::vector<int>>();
        cfg.up_channels = j.at("up_channels").get<std::vector<int>>();
        cfg.head_channels = j.at("head_channels").get<int>();
        cfg.num_classes = j.at("num_classes").get<int>();
        cfg.heatmap_prior = j.at("heatmap_prior").get<double>();
        cfg.size_prior = j.at("size_prior").get<double>();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ParseFailure(std::string("model config: ") + e.what());
    }
}

template <typename T>
Tensor<T> ForwardPass<T>::heatmap() const
{
    Tensor<T> out(heatmap_logits.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = T{1} / (T{1} + std::exp(-heatmap_logits[i]));
    }
    return out;
}

template <typename T>
Tensor<T> ForwardPass<T>::size() const
{
    Tensor<T> out(size_raw.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(std::clamp(size_raw[i], T(-kSizeLogClamp), T(kSizeLogClamp)));
    }
    return out;
}

template <typename T>
Network<T>::Network(const ModelConfig& cfg) : cfg_(cfg)
{
    cfg_.validate();
    int hw = cfg_.in_size;
    int c = cfg_.in_channels;
    int src = -1;
    for (std::size_t i = 0; i < cfg_.down_channels.size(); ++i) {
        src = add_layer("backbone.down" + std::to_string(i), src, c, hw, cfg_.down_channels[i], 3, 2, true, false);
        hw /= 2;
        c = cfg_.down_channels[i];
    }
    for (std::size_t i = 0; i < cfg_.up_channels.size(); ++i) {
        hw *= 2;
        src = add_layer("backbone.up" + std::to_string(i), src, c, hw, cfg_.up_channels[i], 3, 1, true, true);
        c = cfg_.up_channels[i];
    }
    const int feature = src;
    auto head = [&](const std::string& name, int out_c) {
        int s = feature;
        int in_c = c;
        if (cfg_.head_channels > 0) {
            s = add_layer("head." + name + ".conv", feature, c, hw, cfg_.head_channels, 3, 1, true, false);
            in_c = cfg_.head_channels;
        }
        return add_layer("head." + name + ".out", s, in_c, hw, out_c, 1, 1, false, false);
    };
    heatmap_layer_ = head("heatmap", cfg_.num_classes);
    offset_layer_ = head("offset", 2);
    size_layer_ = head("size", 2);
}

template <typename T>
int Network<T>::add_layer(const std::string& name, int source, int in_c, int in_hw, int out_c, int kernel,
                          int stride, bool relu, bool upsample)
{
    Layer l;
    l.name = name;
    l.shape = ConvShape{in_c, in_hw, in_hw, out_c, kernel, stride, kernel / 2};
    l.relu = relu;
    l.upsample = upsample;
    l.source = source;
    l.weight = static_cast<int>(params_.size());
    params_.push_back({name + ".weight", Tensor<T>({out_c, in_c, kernel, kernel})});
    l.bias = static_cast<int>(params_.size());
    params_.push_back({name + ".bias", Tensor<T>({out_c})});
    layers_.push_back(l);
    return static_cast<int>(layers_.size()) - 1;
}

template <typename T>
void Network<T>::initialize(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    for (const auto& l : layers_) {
        auto& w = params_[static_cast<std::size_t>(l.weight)].value;
        const double bound = std::sqrt(6.0 / l.shape.patch());
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] = static_cast<T>(dist(rng));
        }
        params_[static_cast<std::size_t>(l.bias)].value.fill(T{0});
    }
    const double p = cfg_.heatmap_prior;
    params_[static_cast<std::size_t>(layers_[static_cast<std::size_t>(heatmap_layer_)].bias)].value.fill(
        static_cast<T>(std::log(p / (1.0 - p))));
    params_[static_cast<std::size_t>(layers_[static_cast<std::size_t>(size_layer_)].bias)].value.fill(
        static_cast<T>(std::log(cfg_.size_prior)));
}

template <typename T>
std::size_t Network<T>::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& p : params_) {
        n += p.value.size();
    }
    return n;
}

template <typename T>
int Network<T>::find(const std::string& name) const
{
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

template <typename T>
Gradients<T> Network<T>::zero_gradients() const
{
    Gradients<T> g;
    g.reserve(params_.size());
    for (const auto& p : params_) {
        g.emplace_back(p.value.shape());
    }
    return g;
}

template <typename T>
ForwardPass<T> Network<T>::forward(std::span<const T> image) const
{
    const std::size_t expected = static_cast<std::size_t>(cfg_.in_channels) * cfg_.in_size * cfg_.in_size;
    if (image.size() != expected) {
        throw ShapeMismatch("forward: input has " + std::to_string(image.size()) + " values, model expects " +
                            std::to_string(expected));
    }
    ForwardPass<T> pass;
    pass.conv_in.resize(layers_.size());
    pass.conv_out.resize(layers_.size());
    Tensor<T> input({cfg_.in_channels, cfg_.in_size, cfg_.in_size});
    std::copy(image.begin(), image.end(), input.ptr());

    std::vector<T> scratch;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        const Tensor<T>& src = l.source < 0 ? input : pass.conv_out[static_cast<std::size_t>(l.source)];
        const Tensor<T>* conv_input = &src;
        if (l.upsample) {
            Tensor<T> up({src.dim(0), 2 * src.dim(1), 2 * src.dim(2)});
            kernels::upsample2x(src.ptr(), src.dim(0), src.dim(1), src.dim(2), up.ptr());
            pass.conv_in[li] = std::move(up);
            conv_input = &pass.conv_in[li];
        } else if (l.source < 0) {
            pass.conv_in[li] = input;
            conv_input = &pass.conv_in[li];
        }
        Tensor<T> out({l.shape.out_c, l.shape.out_h(), l.shape.out_w()});
        kernels::conv2d_forward(l.shape, conv_input->ptr(), params_[static_cast<std::size_t>(l.weight)].value.ptr(),
                                params_[static_cast<std::size_t>(l.bias)].value.ptr(), out.ptr(), scratch);
        if (l.relu) {
            kernels::relu(out.ptr(), out.size());
        }
        pass.conv_out[li] = std::move(out);
    }
    pass.heatmap_logits = pass.conv_out[static_cast<std::size_t>(heatmap_layer_)];
    pass.offset = pass.conv_out[static_cast<std::size_t>(offset_layer_)];
    pass.size_raw = pass.conv_out[static_cast<std::size_t>(size_layer_)];
    return pass;
}

template <typename T>
Gradients<T> Network<T>::backward(const ForwardPass<T>& pass, const HeadGradients<T>& grads) const
{
    auto check = [](const Tensor<T>& g, const Tensor<T>& ref, const char* what) {
        if (g.shape() != ref.shape()) {
            throw ShapeMismatch(std::string("backward: ") + what + " gradient shape " + shape_string(g.shape()) +
                                " != " + shape_string(ref.shape()));
        }
    };
    check(grads.heatmap_logits, pass.heatmap_logits, "heatmap");
    check(grads.offset, pass.offset, "offset");
    check(grads.size_raw, pass.size_raw, "size");

    Gradients<T> out = zero_gradients();
    std::vector<Tensor<T>> dout(layers_.size());
    dout[static_cast<std::size_t>(heatmap_layer_)] = grads.heatmap_logits;
    dout[static_cast<std::size_t>(offset_layer_)] = grads.offset;
    dout[static_cast<std::size_t>(size_layer_)] = grads.size_raw;

    std::vector<T> scratch;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& l = layers_[li];
        Tensor<T>& g = dout[li];
        if (g.empty()) {
            continue;
        }
        if (l.relu) {
            kernels::relu_backward(pass.conv_out[li].ptr(), g.ptr(), g.size());
        }
        const Tensor<T>& conv_input = (l.upsample || l.source < 0) ? pass.conv_in[li]
                                                                    : pass.conv_out[static_cast<std::size_t>(l.source)];
        Tensor<T> din;
        if (l.source >= 0) {
            din = Tensor<T>(conv_input.shape());
        }
        kernels::conv2d_backward(l.shape, conv_input.ptr(), params_[static_cast<std::size_t>(l.weight)].value.ptr(),
                                 g.ptr(), out[static_cast<std::size_t>(l.weight)].ptr(),
                                 out[static_cast<std::size_t>(l.bias)].ptr(), l.source >= 0 ? din.ptr() : nullptr,
                                 scratch);
        g = Tensor<T>();
        if (l.source < 0) {
            continue;
        }
        if (l.upsample) {
            const Tensor<T>& src = pass.conv_out[static_cast<std::size_t>(l.source)];
            Tensor<T> down(src.shape());
            kernels::upsample2x_backward(din.ptr(), src.dim(0), src.dim(1), src.dim(2), down.ptr());
            din = std::move(down);
        }
        Tensor<T>& target = dout[static_cast<std::size_t>(l.source)];
        if (target.empty()) {
            target = std::move(din);
        } else {
            for (std::size_t i = 0; i < target.size(); ++i) {
                target[i] += din[i];
            }
        }
    }
    return out;
}

template struct ForwardPass<float>;
template struct ForwardPass<double>;
template class Network<float>;
template class Network<double>;

std::vector<float> normalize_image(std::span<const std::uint8_t> pixels, double mean, double std)
{
    std::vector<float> out(pixels.size());
    const double inv = 1.0 / std;
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        out[i] = static_cast<float>((pixels[i] / 255.0 - mean) * inv);
    }
    return out;
}

} // namespace semdet::net
