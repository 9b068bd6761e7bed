#pragma once

#include "semdet/codec/codec.hpp"
#include "semdet/common/rng.hpp"
#include "semdet/net/network.hpp"

#include <vector>

// Small double-precision setup shared by the gradient tests.
struct TinySetup {
    semdet::net::ModelConfig cfg;
    std::vector<double> input;
    semdet::codec::EncodedTarget target;

    explicit TinySetup(int size = 64, std::uint64_t seed = 3)
    {
        cfg.in_size = size;
        cfg.down_channels = {4, 8, 8};
        cfg.up_channels = {8};
        cfg.head_channels = 4;
        cfg.num_classes = 2;
        semdet::Rng rng = semdet::make_rng(seed, 0, 0);
        input.resize(static_cast<std::size_t>(size * size));
        for (auto& v : input) v = semdet::uniform_real(rng, -1.5, 1.5);
        semdet::codec::CodecConfig cc;
        cc.stride = cfg.stride_out();
        cc.num_classes = 2;
        const double s = size;
        const std::vector<semdet::Annotation> anns{{0, {0.15 * s, 0.2 * s, 0.25 * s, 0.3 * s}},
                                                   {1, {0.6 * s, 0.55 * s, 0.2 * s, 0.15 * s}}};
        target = semdet::codec::encode_targets(anns, size, cc);
    }
};
