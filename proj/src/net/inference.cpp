#include "semdet/net/inference.hpp"

#include "semdet/common/errors.hpp"

namespace semdet::net {

codec::CodecConfig codec_for(const ModelConfig& model, int top_k)
{
    codec::CodecConfig cfg;
    cfg.stride = model.stride_out();
    cfg.num_classes = model.num_classes;
    cfg.top_k = top_k;
    return cfg;
}

std::vector<Detection> infer(const Network<float>& model, const GrayImage& image, double mean, double std,
                             const codec::CodecConfig& cfg, codec::DecodeStats* stats)
{
    const ModelConfig& mc = model.config();
    if (image.width() != mc.in_size || image.height() != mc.in_size) {
        throw ShapeMismatch("image is " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                            ", model input is " + std::to_string(mc.in_size) + "x" + std::to_string(mc.in_size));
    }
    if (cfg.stride != mc.stride_out() || cfg.num_classes != mc.num_classes) {
        throw ShapeMismatch("codec stride/classes do not match the model heads");
    }
    const std::vector<float> input = normalize_image(image.pixels(), mean, std);
    const ForwardPass<float> pass = model.forward(input);
    const Tensor<float> heat = pass.heatmap();
    const Tensor<float> size = pass.size();
    codec::HeadMaps maps;
    maps.num_classes = mc.num_classes;
    maps.height = mc.out_size();
    maps.width = mc.out_size();
    maps.heatmap = heat.data();
    maps.offset = pass.offset.data();
    maps.size = size.data();
    return codec::decode_detections(maps, mc.in_size, cfg, stats);
}

codec::DetectionTable infer_split(const Network<float>& model, const synth::DatasetManifest& manifest, double mean,
                                  double std, const codec::CodecConfig& cfg)
{
    codec::DetectionTable table;
    for (const auto& entry : manifest.entries) {
        table[entry.image] = infer(model, read_pgm(manifest.image_path(entry)), mean, std, cfg);
    }
    return table;
}

} // namespace semdet::net
