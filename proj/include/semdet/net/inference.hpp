#pragma once

#include "semdet/codec/codec.hpp"
#include "semdet/common/image.hpp"
#include "semdet/net/network.hpp"
#include "semdet/synth/dataset.hpp"

namespace semdet::net {

/// Codec settings that agree with the model's head layout.
codec::CodecConfig codec_for(const ModelConfig& model, int top_k = 100);

/// Forward pass plus decode. Input statistics are those the model was
/// trained with.
std::vector<Detection> infer(const Network<float>& model, const GrayImage& image, double mean, double std,
                             const codec::CodecConfig& cfg, codec::DecodeStats* stats = nullptr);

/// Detections for every image of a split, keyed by image name.
codec::DetectionTable infer_split(const Network<float>& model, const synth::DatasetManifest& manifest, double mean,
                                  double std, const codec::CodecConfig& cfg);

} // namespace semdet::net
