#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "sinet/params.hpp"

namespace sinet {

// Five-level strided convolutional pyramid: a stride-2 stem plus four stages
// of (stride-2 conv-bn-relu, stride-1 conv-bn-relu). Level k has spatial size
// (H/2^k, W/2^k).
struct BackboneConfig {
    std::array<int, 5> widths{16, 24, 32, 48, 64};
    std::uint64_t seed = 1;

    void validate() const {
        for (int w : widths)
            require(w > 0, ErrorKind::Config, "backbone widths must be positive");
    }
};

struct BackboneParams {
    ConvUnit stem;
    std::array<std::array<ConvUnit, 2>, 4> stages;

    void init(const BackboneConfig& cfg, Rng& rng) {
        cfg.validate();
        ConvSpec stem_spec = conv_bn_spec(3, cfg.widths[0], 3, 3, 1, 2);
        stem.init("backbone.stem", stem_spec, rng);
        for (int s = 0; s < 4; ++s) {
            const int in_w = cfg.widths[s];
            const int out_w = cfg.widths[s + 1];
            const std::string prefix = "backbone.stage" + std::to_string(s + 1);
            stages[s][0].init(prefix + ".a", conv_bn_spec(in_w, out_w, 3, 3, 1, 2), rng);
            stages[s][1].init(prefix + ".b", conv_bn_spec(out_w, out_w, 3, 3, 1, 1), rng);
        }
    }

    void visit(const ParamVisitor& fn) {
        stem.visit(fn);
        for (auto& stage : stages)
            for (auto& unit : stage) unit.visit(fn);
    }
};

struct FeaturePyramid {
    std::array<Tensor, 5> levels; // levels[k-1] = f_k at stride 2^k
};

inline FeaturePyramid extract_pyramid(const Tensor& image, const BackboneParams& params,
                                      TrainContext* ctx = nullptr) {
    require(image.c() == 3, ErrorKind::Shape,
            "backbone expects a 3-channel image, got " + image.shape().str());
    require(image.h() % 32 == 0 && image.w() % 32 == 0, ErrorKind::Shape,
            "image dimensions must be divisible by 32, got " + image.shape().str());
    FeaturePyramid pyr;
    Tensor x = relu(params.stem.forward(image, ctx));
    pyr.levels[0] = x;
    for (int s = 0; s < 4; ++s) {
        x = relu(params.stages[s][0].forward(x, ctx));
        x = relu(params.stages[s][1].forward(x, ctx));
        pyr.levels[s + 1] = x;
    }
    return pyr;
}

} // namespace sinet
