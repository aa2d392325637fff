#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "sinet/backbone.hpp"
#include "sinet/params.hpp"

namespace sinet {

enum class ConvStyle { Asymmetric, Symmetric };
enum class DecoderStyle { Ncd, Pd };

struct SinetConfig {
    int channels = 32;                       // C
    std::array<int, 4> dilations{1, 3, 5, 7};
    ConvStyle conv_style = ConvStyle::Asymmetric;
    DecoderStyle decoder = DecoderStyle::Ncd;
    std::array<int, 3> reverse_pattern{1, 0, 0}; // per refinement block, all levels
    std::array<int, 3> group_sizes{32, 8, 1};    // g_1, g_2, g_3
    BackboneConfig backbone;

    void validate() const {
        backbone.validate();
        require(channels > 0, ErrorKind::Config, "channel width must be positive");
        for (int d : dilations) {
            require(d >= 1, ErrorKind::Config, "dilation rates must be >= 1");
            require(d % 2 == 1, ErrorKind::Config,
                    "dilation rates must be odd (they double as kernel sizes)");
        }
        for (int g : group_sizes) {
            require(g >= 1, ErrorKind::Config, "group sizes must be >= 1");
            require(channels % g == 0, ErrorKind::Config,
                    "channel width " + std::to_string(channels) +
                        " not divisible by group size " + std::to_string(g));
        }
        for (int f : reverse_pattern)
            require(f == 0 || f == 1, ErrorKind::Config, "reverse pattern flags must be 0/1");
    }
};

// ---------------------------------------------------------------------------
// texture enhancement
// ---------------------------------------------------------------------------

// Branch i: 1x1 channel reduction, then (for rate d > 1) a dxd convolution
// (factorized as dx1 + 1xd in asymmetric mode) and a 3x3 convolution with
// dilation d. All units are conv-bn; ReLU follows each logical layer.
struct TemBranchParams {
    ConvUnit reduce;
    ConvUnit mid;            // symmetric style
    ConvUnit mid_v, mid_h;   // asymmetric style
    ConvUnit dil;

    void init(const std::string& prefix, int in_c, int c, int rate, ConvStyle style,
              Rng& rng) {
        reduce.init(prefix + ".reduce", conv_bn_spec(in_c, c, 1, 1), rng);
        if (rate > 1) {
            if (style == ConvStyle::Asymmetric) {
                mid_v.init(prefix + ".mid_v", conv_bn_spec(c, c, rate, 1), rng);
                mid_h.init(prefix + ".mid_h", conv_bn_spec(c, c, 1, rate), rng);
            } else {
                mid.init(prefix + ".mid", conv_bn_spec(c, c, rate, rate), rng);
            }
            dil.init(prefix + ".dil", conv_bn_spec(c, c, 3, 3, rate), rng);
        }
    }

    void visit(const ParamVisitor& fn) {
        reduce.visit(fn);
        mid.visit(fn);
        mid_v.visit(fn);
        mid_h.visit(fn);
        dil.visit(fn);
    }

    Tensor forward(const Tensor& x, TrainContext* ctx) const {
        Tensor t = relu(reduce.forward(x, ctx));
        if (mid.exists()) {
            t = relu(mid.forward(t, ctx));
        } else if (mid_v.exists()) {
            t = relu(mid_h.forward(mid_v.forward(t, ctx), ctx));
        }
        if (dil.exists()) t = relu(dil.forward(t, ctx));
        return t;
    }
};

struct TemParams {
    std::array<TemBranchParams, 4> branches;
    ConvUnit cat_reduce;
    ConvUnit shortcut;

    void init(const std::string& prefix, int in_c, const SinetConfig& cfg, Rng& rng) {
        const int c = cfg.channels;
        for (int i = 0; i < 4; ++i)
            branches[i].init(prefix + ".b" + std::to_string(i + 1), in_c, c,
                             cfg.dilations[i], cfg.conv_style, rng);
        cat_reduce.init(prefix + ".cat", conv_bn_spec(4 * c, c, 3, 3), rng);
        shortcut.init(prefix + ".shortcut", conv_bn_spec(in_c, c, 1, 1), rng);
    }

    void visit(const ParamVisitor& fn) {
        for (auto& b : branches) b.visit(fn);
        cat_reduce.visit(fn);
        shortcut.visit(fn);
    }
};

inline Tensor tem(const Tensor& f, const TemParams& p, TrainContext* ctx = nullptr) {
    std::vector<Tensor> outs;
    outs.reserve(4);
    for (const auto& b : p.branches) outs.push_back(b.forward(f, ctx));
    Tensor merged = p.cat_reduce.forward(concat_channels(outs), ctx);
    return relu(elementwise_add(merged, p.shortcut.forward(f, ctx)));
}

// ---------------------------------------------------------------------------
// decoder: coarse localization map
// ---------------------------------------------------------------------------

struct NcdParams {
    std::array<ConvUnit, 3> gates; // plain 3x3 convs producing gating maps
    ConvUnit head1, head2;         // conv-bn-relu aggregation
    ConvUnit out;                  // plain 3x3 conv to 1 channel

    void init(const std::string& prefix, int c, Rng& rng) {
        for (int u = 0; u < 3; ++u)
            gates[u].init(prefix + ".gate" + std::to_string(u + 1),
                          conv_plain_spec(c, c, 3, 3), rng);
        head1.init(prefix + ".head1", conv_bn_spec(2 * c, c, 3, 3), rng);
        head2.init(prefix + ".head2", conv_bn_spec(2 * c, c, 3, 3), rng);
        out.init(prefix + ".out", conv_plain_spec(c, 1, 3, 3), rng);
    }

    void visit(const ParamVisitor& fn) {
        for (auto& g : gates) g.visit(fn);
        head1.visit(fn);
        head2.visit(fn);
        out.visit(fn);
    }
};

// Aggregates the three deepest enhanced features into the coarse map C_6 at
// stride 8. Multiplicative gating propagates high-level evidence downward:
// either neighbor-connected (each refined level gates the next) or with
// direct skip connections from the deepest level (the ablation variant).
inline Tensor decode_coarse(const Tensor& f3, const Tensor& f4, const Tensor& f5,
                            const NcdParams& p, DecoderStyle style,
                            TrainContext* ctx = nullptr) {
    require(f3.c() == f4.c() && f4.c() == f5.c(), ErrorKind::Shape,
            "decoder inputs must share the channel width");
    require(f3.h() == 2 * f4.h() && f4.h() == 2 * f5.h() && f3.w() == 2 * f4.w() &&
                f4.w() == 2 * f5.w(),
            ErrorKind::Shape, "decoder inputs must sit at strides 8/16/32");

    Tensor nc5 = f5;
    Tensor nc4 = elementwise_mul(f4, p.gates[0].forward(upsample_bilinear(f5, 2), ctx));
    Tensor nc3;
    if (style == DecoderStyle::Ncd) {
        Tensor g2 = p.gates[1].forward(upsample_bilinear(nc4, 2), ctx);
        Tensor g3 = p.gates[2].forward(upsample_bilinear(f4, 2), ctx);
        nc3 = elementwise_mul(elementwise_mul(f3, g2), g3);
    } else {
        Tensor g2 = p.gates[1].forward(upsample_bilinear(f4, 2), ctx);
        Tensor g3 = p.gates[2].forward(upsample_to_factor(f5, 4), ctx);
        nc3 = elementwise_mul(elementwise_mul(f3, g2), g3);
    }

    Tensor h1 = relu(p.head1.forward(concat_channels({upsample_bilinear(nc5, 2), nc4}), ctx));
    Tensor h2 = relu(p.head2.forward(concat_channels({upsample_bilinear(h1, 2), nc3}), ctx));
    return p.out.forward(h2, ctx);
}

// ---------------------------------------------------------------------------
// group-reversal refinement
// ---------------------------------------------------------------------------

// 1 - sigmoid(resized next-level logits): erases the estimated object region.
// k = 5 downsamples the stride-8 coarse map by 4; k = 3, 4 upsample by 2.
inline Tensor reverse_guidance(const Tensor& c_next, int k) {
    require(c_next.c() == 1, ErrorKind::Shape,
            "reverse guidance expects a single-channel map, got " + c_next.shape().str());
    require(k == 3 || k == 4 || k == 5, ErrorKind::Config,
            "reverse guidance level must be 3, 4 or 5");
    Tensor s = k == 5 ? downsample(c_next, 4) : upsample_bilinear(c_next, 2);
    return affine(sigmoid(s), -1, 1);
}

// Splits the candidate features into C/g groups and interleaves the guidance
// map after each group, giving C + C/g channels.
inline Tensor ggo(const Tensor& p, const Tensor& r, int group_size) {
    require(r.c() == 1, ErrorKind::Shape, "guidance must be single-channel");
    require(r.h() == p.h() && r.w() == p.w() && r.n() == p.n(), ErrorKind::Shape,
            "guidance spatial size must match features");
    std::vector<Tensor> parts = split_channels(p, group_size);
    std::vector<Tensor> inter;
    inter.reserve(parts.size() * 2);
    for (Tensor& part : parts) {
        inter.push_back(std::move(part));
        inter.push_back(r);
    }
    return concat_channels(inter);
}

struct GraBlockParams {
    ConvUnit v; // C + C/g -> C
    ConvUnit w; // C -> 1

    void init(const std::string& prefix, int c, int group_size, Rng& rng) {
        v.init(prefix + ".v", conv_plain_spec(c + c / group_size, c, 3, 3), rng);
        w.init(prefix + ".w", conv_plain_spec(c, 1, 3, 3), rng);
    }

    void visit(const ParamVisitor& fn) {
        v.visit(fn);
        w.visit(fn);
    }
};

struct GraLevelParams {
    std::array<GraBlockParams, 3> blocks;

    void init(const std::string& prefix, const SinetConfig& cfg, Rng& rng) {
        for (int i = 0; i < 3; ++i)
            blocks[i].init(prefix + ".block" + std::to_string(i + 1), cfg.channels,
                           cfg.group_sizes[i], rng);
    }

    void visit(const ParamVisitor& fn) {
        for (auto& b : blocks) b.visit(fn);
    }
};

// One refinement block: optionally reverse the incoming guidance, interleave
// it into the feature groups, then residual-update features and guidance.
inline std::pair<Tensor, Tensor> gra_block(const Tensor& p, const Tensor& r,
                                           const GraBlockParams& bp, int group_size,
                                           bool reverse_flag, TrainContext* ctx = nullptr) {
    Tensor guide = reverse_flag ? affine(r, -1, 1) : r;
    Tensor q = ggo(p, guide, group_size);
    Tensor p_next = elementwise_add(p, bp.v.forward(q, ctx));
    Tensor r_next = elementwise_add(guide, bp.w.forward(p_next, ctx));
    return {p_next, r_next};
}

// Runs the three blocks of one pyramid level. `s` holds the resized
// next-level logits; the guidance state enters as sigmoid(s) and the
// configured pattern decides which blocks reverse it.
inline Tensor gra_level(const Tensor& f, const Tensor& s, const GraLevelParams& lp,
                        const SinetConfig& cfg, TrainContext* ctx = nullptr) {
    Tensor p = f;
    Tensor r = sigmoid(s);
    for (int i = 0; i < 3; ++i) {
        auto [p_next, r_next] =
            gra_block(p, r, lp.blocks[i], cfg.group_sizes[i], cfg.reverse_pattern[i] != 0, ctx);
        p = p_next;
        r = r_next;
    }
    return r;
}

// ---------------------------------------------------------------------------
// full model
// ---------------------------------------------------------------------------

struct SinetParams {
    BackboneParams backbone;
    std::array<TemParams, 3> tems;      // levels 3, 4, 5
    NcdParams ncd;
    std::array<GraLevelParams, 3> gras; // levels 3, 4, 5

    static SinetParams make(const SinetConfig& cfg) {
        cfg.validate();
        Rng rng(cfg.backbone.seed);
        SinetParams p;
        p.backbone.init(cfg.backbone, rng);
        for (int k = 3; k <= 5; ++k)
            p.tems[k - 3].init("tem" + std::to_string(k), cfg.backbone.widths[k - 1], cfg,
                               rng);
        p.ncd.init("ncd", cfg.channels, rng);
        for (int k = 3; k <= 5; ++k)
            p.gras[k - 3].init("gra" + std::to_string(k), cfg, rng);
        return p;
    }

    void visit(const ParamVisitor& fn) {
        backbone.visit(fn);
        for (auto& t : tems) t.visit(fn);
        ncd.visit(fn);
        for (auto& g : gras) g.visit(fn);
    }

    // const enumeration (values only)
    void visit(const std::function<void(const std::string&, const Tensor&, ParamKind)>& fn)
        const {
        auto& self = const_cast<SinetParams&>(*this);
        self.visit(ParamVisitor(
            [&fn](const std::string& n, Tensor& t, ParamKind k) { fn(n, t, k); }));
    }

    std::map<std::string, Tensor> to_map() const {
        std::map<std::string, Tensor> m;
        visit([&](const std::string& n, const Tensor& t, ParamKind) { m.emplace(n, t); });
        return m;
    }

    // Copy of the params with every trainable weight registered on the tape.
    SinetParams watched(Tape& tape) const {
        SinetParams copy = *this;
        copy.visit([&tape](const std::string&, Tensor& t, ParamKind kind) {
            if (kind == ParamKind::Weight) t = tape.watch(t);
        });
        return copy;
    }

    void apply_stat_updates(const std::vector<std::pair<std::string, Tensor>>& updates) {
        if (updates.empty()) return;
        std::map<std::string, const Tensor*> pending;
        for (const auto& [name, value] : updates) pending[name] = &value;
        visit([&pending](const std::string& n, Tensor& t, ParamKind kind) {
            if (kind != ParamKind::RunningStat) return;
            auto it = pending.find(n);
            if (it != pending.end()) t = it->second->detached();
        });
    }
};

struct SideOutputs {
    Tensor c6, c5, c4, c3;                 // strides 8, 32, 16, 8
    Tensor c6_up, c5_up, c4_up, c3_up;     // input resolution
};

inline SideOutputs sinet_forward(const Tensor& image, const SinetParams& params,
                                 const SinetConfig& cfg, TrainContext* ctx = nullptr) {
    cfg.validate();
    FeaturePyramid pyr = extract_pyramid(image, params.backbone, ctx);
    Tensor f3 = tem(pyr.levels[2], params.tems[0], ctx);
    Tensor f4 = tem(pyr.levels[3], params.tems[1], ctx);
    Tensor f5 = tem(pyr.levels[4], params.tems[2], ctx);

    SideOutputs out;
    out.c6 = decode_coarse(f3, f4, f5, params.ncd, cfg.decoder, ctx);

    Tensor s5 = downsample(out.c6, 4);
    out.c5 = elementwise_add(gra_level(f5, s5, params.gras[2], cfg, ctx), s5);
    Tensor s4 = upsample_bilinear(out.c5, 2);
    out.c4 = elementwise_add(gra_level(f4, s4, params.gras[1], cfg, ctx), s4);
    Tensor s3 = upsample_bilinear(out.c4, 2);
    out.c3 = elementwise_add(gra_level(f3, s3, params.gras[0], cfg, ctx), s3);

    out.c6_up = upsample_to_factor(out.c6, 8);
    out.c5_up = upsample_to_factor(out.c5, 32);
    out.c4_up = upsample_to_factor(out.c4, 16);
    out.c3_up = upsample_to_factor(out.c3, 8);
    return out;
}

} // namespace sinet
