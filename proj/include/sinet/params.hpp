#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sinet/init.hpp"
#include "sinet/ops.hpp"
#include "sinet/tape.hpp"
#include "sinet/tensor.hpp"

namespace sinet {

inline constexpr Real kBnEps = Real(1e-5);
inline constexpr Real kBnMomentum = Real(0.1);

enum class ParamKind { Weight, RunningStat };

using ParamVisitor = std::function<void(const std::string&, Tensor&, ParamKind)>;

// Side channel for training-mode forward passes: carries the mode flag and
// collects batch-norm running-statistic updates (applied after the step, so
// the forward stays a pure function of its inputs).
struct TrainContext {
    bool training = false;
    Real bn_momentum = kBnMomentum;
    std::vector<std::pair<std::string, Tensor>> stat_updates;
};

// A named convolution with optional batch normalization. Plain units carry a
// bias; batch-normalized units fold the bias into beta.
struct ConvUnit {
    std::string name;
    ConvSpec spec;
    Tensor w, b, gamma, beta, rm, rv;

    bool exists() const { return !w.empty(); }

    void init(std::string unit_name, const ConvSpec& s, Rng& rng) {
        spec = s;
        spec.validate();
        name = std::move(unit_name);
        w = he_normal(rng, {s.out_channels, s.in_channels, s.kernel_h, s.kernel_w});
        if (s.has_batchnorm) {
            b = Tensor{};
            gamma = Tensor::full(1, s.out_channels, 1, 1, 1);
            beta = Tensor::zeros(1, s.out_channels, 1, 1);
            rm = Tensor::zeros(1, s.out_channels, 1, 1);
            rv = Tensor::full(1, s.out_channels, 1, 1, 1);
        } else {
            b = Tensor::zeros(1, s.out_channels, 1, 1);
            gamma = beta = rm = rv = Tensor{};
        }
    }

    void visit(const ParamVisitor& fn) {
        if (!exists()) return;
        fn(name + ".w", w, ParamKind::Weight);
        if (!spec.has_batchnorm) {
            fn(name + ".b", b, ParamKind::Weight);
        } else {
            fn(name + ".gamma", gamma, ParamKind::Weight);
            fn(name + ".beta", beta, ParamKind::Weight);
            fn(name + ".rm", rm, ParamKind::RunningStat);
            fn(name + ".rv", rv, ParamKind::RunningStat);
        }
    }

    Tensor forward(const Tensor& x, TrainContext* ctx) const {
        Tensor y = conv2d(x, w, b, spec);
        if (!spec.has_batchnorm) return y;
        if (ctx && ctx->training) {
            auto res = batchnorm_train(y, gamma, beta, rm, rv, kBnEps, ctx->bn_momentum);
            ctx->stat_updates.emplace_back(name + ".rm", res.new_running_mean);
            ctx->stat_updates.emplace_back(name + ".rv", res.new_running_var);
            return res.y;
        }
        return batchnorm(y, gamma, beta, rm, rv, kBnEps);
    }
};

// Spec builders for the two unit flavors used throughout the model.
inline ConvSpec conv_bn_spec(int in_c, int out_c, int kh, int kw, int dilation = 1,
                             int stride = 1) {
    ConvSpec s;
    s.in_channels = in_c;
    s.out_channels = out_c;
    s.kernel_h = kh;
    s.kernel_w = kw;
    s.dilation = dilation;
    s.stride = stride;
    s.pad_h = dilation * (kh - 1) / 2;
    s.pad_w = dilation * (kw - 1) / 2;
    s.has_batchnorm = true;
    return s;
}

inline ConvSpec conv_plain_spec(int in_c, int out_c, int kh, int kw) {
    ConvSpec s = conv_bn_spec(in_c, out_c, kh, kw);
    s.has_batchnorm = false;
    return s;
}

} // namespace sinet
