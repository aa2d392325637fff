#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sinet/common.hpp"
#include "sinet/parallel.hpp"
#include "sinet/tape.hpp"
#include "sinet/tensor.hpp"

namespace sinet {

// 2D convolution geometry. Kernels may be asymmetric (kernel_h != kernel_w),
// so padding is per axis; dilation and stride apply to both axes.
struct ConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel_h = 1;
    int kernel_w = 1;
    int dilation = 1;
    int stride = 1;
    int pad_h = 0;
    int pad_w = 0;
    bool has_batchnorm = false;

    int out_dim(int in, int kernel, int pad) const {
        return (in + 2 * pad - dilation * (kernel - 1) - 1) / stride + 1;
    }

    void validate() const {
        require(in_channels > 0 && out_channels > 0, ErrorKind::Config,
                "conv channels must be positive");
        require(kernel_h > 0 && kernel_w > 0, ErrorKind::Config, "conv kernel must be positive");
        require(dilation >= 1, ErrorKind::Config, "conv dilation must be >= 1");
        require(stride >= 1, ErrorKind::Config, "conv stride must be >= 1");
        require(pad_h >= 0 && pad_w >= 0, ErrorKind::Config, "conv padding must be >= 0");
    }
};

namespace detail {

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), ErrorKind::Shape,
            std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
}

// Valid output range [lo, hi) for one conv axis so that the sampled input
// index ow*stride - pad + k*dilation stays inside [0, in).
inline std::pair<int, int> conv_axis_range(int out, int in, int stride, int pad, int tap) {
    int shift = tap - pad; // input index = o*stride + shift
    int lo = shift < 0 ? (-shift + stride - 1) / stride : 0;
    int hi_num = in - 1 - shift;
    int hi = hi_num < 0 ? 0 : hi_num / stride + 1;
    return {std::min(lo, out), std::min(hi, out)};
}

struct LerpAxis {
    std::vector<int> i0, i1;
    std::vector<Real> t;
};

// Half-pixel-centers sampling grid (align-corners = false), clamped at the
// borders. Used by both up- and down-sampling so the two stay adjoint-like.
inline LerpAxis bilinear_axis(int out, int in) {
    LerpAxis ax;
    ax.i0.resize(out);
    ax.i1.resize(out);
    ax.t.resize(out);
    double scale = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
        double src = (i + 0.5) * scale - 0.5;
        int lo = static_cast<int>(std::floor(src));
        double frac = src - lo;
        if (lo < 0) {
            lo = 0;
            frac = 0.0;
        } else if (lo >= in - 1) {
            lo = in - 1;
            frac = 0.0;
        }
        ax.i0[i] = lo;
        ax.i1[i] = std::min(lo + 1, in - 1);
        ax.t[i] = static_cast<Real>(frac);
    }
    return ax;
}

} // namespace detail

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

// weight: (out_channels, in_channels, kernel_h, kernel_w); bias: empty tensor
// or (1, out_channels, 1, 1).
inline Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                     const ConvSpec& spec) {
    spec.validate();
    require(x.c() == spec.in_channels, ErrorKind::Shape,
            "conv2d: input has " + std::to_string(x.c()) + " channels, spec expects " +
                std::to_string(spec.in_channels));
    require(weight.n() == spec.out_channels && weight.c() == spec.in_channels &&
                weight.h() == spec.kernel_h && weight.w() == spec.kernel_w,
            ErrorKind::Shape, "conv2d: weight shape " + weight.shape().str() +
                                  " does not match spec");
    bool has_bias = !bias.empty();
    if (has_bias) {
        require(bias.shape() == Shape{1, spec.out_channels, 1, 1}, ErrorKind::Shape,
                "conv2d: bias shape " + bias.shape().str() + " must be (1," +
                    std::to_string(spec.out_channels) + ",1,1)");
    }
    const int N = x.n(), IC = x.c(), H = x.h(), W = x.w();
    const int OC = spec.out_channels;
    const int OH = spec.out_dim(H, spec.kernel_h, spec.pad_h);
    const int OW = spec.out_dim(W, spec.kernel_w, spec.pad_w);
    require(OH >= 1 && OW >= 1, ErrorKind::Shape,
            "conv2d: kernel does not fit input height/width " + x.shape().str());

    std::vector<Real> out(static_cast<std::size_t>(N) * OC * OH * OW);
    const Real* xd = x.data();
    const Real* wd = weight.data();
    const Real* bd = has_bias ? bias.data() : nullptr;
    const int KH = spec.kernel_h, KW = spec.kernel_w, S = spec.stride, D = spec.dilation;

    parallel_for(static_cast<std::size_t>(N) * OC, [&](std::size_t job) {
        const int n = static_cast<int>(job) / OC;
        const int oc = static_cast<int>(job) % OC;
        Real* op = out.data() + (static_cast<std::size_t>(n) * OC + oc) * OH * OW;
        std::fill(op, op + static_cast<std::size_t>(OH) * OW, bd ? bd[oc] : Real(0));
        for (int ic = 0; ic < IC; ++ic) {
            const Real* xp = xd + (static_cast<std::size_t>(n) * IC + ic) * H * W;
            const Real* wp = wd + (static_cast<std::size_t>(oc) * IC + ic) * KH * KW;
            for (int kh = 0; kh < KH; ++kh) {
                for (int kw = 0; kw < KW; ++kw) {
                    const Real wv = wp[kh * KW + kw];
                    if (wv == Real(0)) continue;
                    auto [lo, hi] = detail::conv_axis_range(OW, W, S, spec.pad_w, kw * D);
                    if (lo >= hi) continue;
                    const int shift_w = kw * D - spec.pad_w;
                    for (int oh = 0; oh < OH; ++oh) {
                        const int ih = oh * S - spec.pad_h + kh * D;
                        if (ih < 0 || ih >= H) continue;
                        const Real* xrow = xp + static_cast<std::size_t>(ih) * W;
                        Real* orow = op + static_cast<std::size_t>(oh) * OW;
                        if (S == 1) {
                            const Real* src = xrow + shift_w;
                            for (int ow = lo; ow < hi; ++ow) orow[ow] += wv * src[ow];
                        } else {
                            for (int ow = lo; ow < hi; ++ow)
                                orow[ow] += wv * xrow[ow * S + shift_w];
                        }
                    }
                }
            }
        }
    });

    Tensor result = Tensor::wrap({N, OC, OH, OW}, std::move(out));
    Tape* tape = common_tape({&x, &weight, &bias});
    if (!tape) return result;

    int id = tape->record(
        result.shape(), [&] {
            std::vector<int> in;
            for (const Tensor* t : {&x, &weight, &bias})
                if (t->tracked()) in.push_back(t->node());
            return in;
        }(),
        [xs = x.detached(), ws = weight.detached(), xn = x.node(), wn = weight.node(),
         bn = bias.tracked() ? bias.node() : -1, spec, N, IC, H, W, OC, OH, OW, KH, KW, S,
         D](const Real* gout, Tape& tp) {
            const Real* xd = xs.data();
            const Real* wd = ws.data();
            if (xn >= 0) {
                auto& gx = tp.grad_buffer(xn);
                parallel_for(static_cast<std::size_t>(N) * IC, [&](std::size_t job) {
                    const int n = static_cast<int>(job) / IC;
                    const int ic = static_cast<int>(job) % IC;
                    Real* gxp = gx.data() + (static_cast<std::size_t>(n) * IC + ic) * H * W;
                    for (int oc = 0; oc < OC; ++oc) {
                        const Real* gp =
                            gout + (static_cast<std::size_t>(n) * OC + oc) * OH * OW;
                        const Real* wp =
                            wd + (static_cast<std::size_t>(oc) * IC + ic) * KH * KW;
                        for (int kh = 0; kh < KH; ++kh) {
                            for (int kw = 0; kw < KW; ++kw) {
                                const Real wv = wp[kh * KW + kw];
                                if (wv == Real(0)) continue;
                                auto [lo, hi] =
                                    detail::conv_axis_range(OW, W, S, spec.pad_w, kw * D);
                                if (lo >= hi) continue;
                                const int shift_w = kw * D - spec.pad_w;
                                for (int oh = 0; oh < OH; ++oh) {
                                    const int ih = oh * S - spec.pad_h + kh * D;
                                    if (ih < 0 || ih >= H) continue;
                                    Real* gxrow = gxp + static_cast<std::size_t>(ih) * W;
                                    const Real* grow = gp + static_cast<std::size_t>(oh) * OW;
                                    if (S == 1) {
                                        Real* dst = gxrow + shift_w;
                                        for (int ow = lo; ow < hi; ++ow)
                                            dst[ow] += wv * grow[ow];
                                    } else {
                                        for (int ow = lo; ow < hi; ++ow)
                                            gxrow[ow * S + shift_w] += wv * grow[ow];
                                    }
                                }
                            }
                        }
                    }
                });
            }
            if (wn >= 0) {
                auto& gw = tp.grad_buffer(wn);
                parallel_for(static_cast<std::size_t>(OC), [&](std::size_t ocj) {
                    const int oc = static_cast<int>(ocj);
                    for (int ic = 0; ic < IC; ++ic) {
                        for (int kh = 0; kh < KH; ++kh) {
                            for (int kw = 0; kw < KW; ++kw) {
                                auto [lo, hi] =
                                    detail::conv_axis_range(OW, W, S, spec.pad_w, kw * D);
                                if (lo >= hi) continue;
                                const int shift_w = kw * D - spec.pad_w;
                                Real acc = 0;
                                for (int n = 0; n < N; ++n) {
                                    const Real* gp =
                                        gout + (static_cast<std::size_t>(n) * OC + oc) * OH * OW;
                                    const Real* xp =
                                        xd + (static_cast<std::size_t>(n) * IC + ic) * H * W;
                                    for (int oh = 0; oh < OH; ++oh) {
                                        const int ih = oh * S - spec.pad_h + kh * D;
                                        if (ih < 0 || ih >= H) continue;
                                        const Real* grow =
                                            gp + static_cast<std::size_t>(oh) * OW;
                                        const Real* xrow =
                                            xp + static_cast<std::size_t>(ih) * W;
                                        if (S == 1) {
                                            const Real* src = xrow + shift_w;
                                            for (int ow = lo; ow < hi; ++ow)
                                                acc += grow[ow] * src[ow];
                                        } else {
                                            for (int ow = lo; ow < hi; ++ow)
                                                acc += grow[ow] * xrow[ow * S + shift_w];
                                        }
                                    }
                                }
                                gw[(static_cast<std::size_t>(oc) * IC + ic) * KH * KW +
                                   kh * KW + kw] += acc;
                            }
                        }
                    }
                });
            }
            if (bn >= 0) {
                auto& gb = tp.grad_buffer(bn);
                for (int oc = 0; oc < OC; ++oc) {
                    Real acc = 0;
                    for (int n = 0; n < N; ++n) {
                        const Real* gp = gout + (static_cast<std::size_t>(n) * OC + oc) * OH * OW;
                        for (std::size_t i = 0; i < static_cast<std::size_t>(OH) * OW; ++i)
                            acc += gp[i];
                    }
                    gb[oc] += acc;
                }
            }
        });
    return result.with_handle(tape, id);
}

// ---------------------------------------------------------------------------
// batch normalization
// ---------------------------------------------------------------------------

namespace detail {

inline void check_bn_params(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                            const Tensor& mean, const Tensor& var, Real eps) {
    require(eps > Real(0), ErrorKind::Config, "batchnorm eps must be positive");
    const Shape want{1, x.c(), 1, 1};
    require(gamma.shape() == want, ErrorKind::Shape,
            "batchnorm gamma shape " + gamma.shape().str() + " != " + want.str());
    require(beta.shape() == want, ErrorKind::Shape,
            "batchnorm beta shape " + beta.shape().str() + " != " + want.str());
    require(mean.shape() == want, ErrorKind::Shape,
            "batchnorm mean shape " + mean.shape().str() + " != " + want.str());
    require(var.shape() == want, ErrorKind::Shape,
            "batchnorm var shape " + var.shape().str() + " != " + want.str());
}

} // namespace detail

// Inference-mode batch normalization: per-channel affine transform using the
// running statistics.
inline Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        const Tensor& running_mean, const Tensor& running_var, Real eps) {
    detail::check_bn_params(x, gamma, beta, running_mean, running_var, eps);
    const int N = x.n(), C = x.c();
    const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
    std::vector<Real> out(x.numel());
    std::vector<Real> scale(C), shift(C), invstd(C);
    for (int c = 0; c < C; ++c) {
        invstd[c] = Real(1) / std::sqrt(running_var.data()[c] + eps);
        scale[c] = gamma.data()[c] * invstd[c];
        shift[c] = beta.data()[c] - running_mean.data()[c] * scale[c];
    }
    const Real* xd = x.data();
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) out[base + i] = scale[c] * xd[base + i] + shift[c];
        }
    }
    Tensor result = Tensor::wrap(x.shape(), std::move(out));
    Tape* tape = common_tape({&x, &gamma, &beta});
    if (!tape) return result;

    int id = tape->record(
        result.shape(), [&] {
            std::vector<int> in;
            for (const Tensor* t : {&x, &gamma, &beta})
                if (t->tracked()) in.push_back(t->node());
            return in;
        }(),
        [xs = x.detached(), rm = running_mean.detached(), sc = scale, is = invstd,
         xn = x.node(), gn = gamma.tracked() ? gamma.node() : -1,
         bn = beta.tracked() ? beta.node() : -1, N, C, plane](const Real* gout, Tape& tp) {
            if (xn >= 0) {
                auto& gx = tp.grad_buffer(xn);
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < C; ++c) {
                        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
                        for (std::size_t i = 0; i < plane; ++i)
                            gx[base + i] += sc[c] * gout[base + i];
                    }
            }
            if (gn >= 0) {
                auto& gg = tp.grad_buffer(gn);
                const Real* xd = xs.data();
                for (int c = 0; c < C; ++c) {
                    Real acc = 0;
                    for (int n = 0; n < N; ++n) {
                        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
                        for (std::size_t i = 0; i < plane; ++i)
                            acc += gout[base + i] * (xd[base + i] - rm.data()[c]) * is[c];
                    }
                    gg[c] += acc;
                }
            }
            if (bn >= 0) {
                auto& gb = tp.grad_buffer(bn);
                for (int c = 0; c < C; ++c) {
                    Real acc = 0;
                    for (int n = 0; n < N; ++n) {
                        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
                        for (std::size_t i = 0; i < plane; ++i) acc += gout[base + i];
                    }
                    gb[c] += acc;
                }
            }
        });
    return result.with_handle(tape, id);
}

struct BatchNormResult {
    Tensor y;
    Tensor new_running_mean; // untracked: statistics carry no gradient
    Tensor new_running_var;
};

// Training-mode batch normalization: normalizes with batch statistics and
// returns updated running statistics (running = (1-momentum)*running +
// momentum*batch; variance update uses the unbiased estimate).
inline BatchNormResult batchnorm_train(const Tensor& x, const Tensor& gamma,
                                       const Tensor& beta, const Tensor& running_mean,
                                       const Tensor& running_var, Real eps, Real momentum) {
    detail::check_bn_params(x, gamma, beta, running_mean, running_var, eps);
    require(momentum > Real(0) && momentum <= Real(1), ErrorKind::Config,
            "batchnorm momentum must be in (0, 1]");
    const int N = x.n(), C = x.c();
    const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
    const std::size_t count = static_cast<std::size_t>(N) * plane;
    require(count > 0, ErrorKind::Shape, "batchnorm_train on empty tensor");

    std::vector<Real> mu(C, 0), var(C, 0), invstd(C);
    const Real* xd = x.data();
    for (int c = 0; c < C; ++c) {
        Real sum = 0;
        for (int n = 0; n < N; ++n) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) sum += xd[base + i];
        }
        mu[c] = sum / static_cast<Real>(count);
        Real sq = 0;
        for (int n = 0; n < N; ++n) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const Real d = xd[base + i] - mu[c];
                sq += d * d;
            }
        }
        var[c] = sq / static_cast<Real>(count);
        invstd[c] = Real(1) / std::sqrt(var[c] + eps);
    }

    std::vector<Real> out(x.numel());
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
            const Real g = gamma.data()[c], b = beta.data()[c];
            for (std::size_t i = 0; i < plane; ++i)
                out[base + i] = g * (xd[base + i] - mu[c]) * invstd[c] + b;
        }

    std::vector<Real> nrm(C), nrv(C);
    for (int c = 0; c < C; ++c) {
        const Real unbiased =
            count > 1 ? var[c] * static_cast<Real>(count) / static_cast<Real>(count - 1)
                      : var[c];
        nrm[c] = (Real(1) - momentum) * running_mean.data()[c] + momentum * mu[c];
        nrv[c] = (Real(1) - momentum) * running_var.data()[c] + momentum * unbiased;
    }

    BatchNormResult res;
    res.y = Tensor::wrap(x.shape(), std::move(out));
    res.new_running_mean = Tensor::wrap({1, C, 1, 1}, std::move(nrm));
    res.new_running_var = Tensor::wrap({1, C, 1, 1}, std::move(nrv));

    Tape* tape = common_tape({&x, &gamma, &beta});
    if (!tape) return res;

    int id = tape->record(
        res.y.shape(), [&] {
            std::vector<int> in;
            for (const Tensor* t : {&x, &gamma, &beta})
                if (t->tracked()) in.push_back(t->node());
            return in;
        }(),
        [xs = x.detached(), gs = gamma.detached(), mu, invstd, xn = x.node(),
         gn = gamma.tracked() ? gamma.node() : -1, bn = beta.tracked() ? beta.node() : -1,
         N, C, plane, count](const Real* gout, Tape& tp) {
            const Real* xd = xs.data();
            // Per-channel reductions shared by all gradient terms.
            std::vector<Real> sum_g(C, 0), sum_gx(C, 0);
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        const Real xhat = (xd[base + i] - mu[c]) * invstd[c];
                        sum_g[c] += gout[base + i];
                        sum_gx[c] += gout[base + i] * xhat;
                    }
                }
            if (xn >= 0) {
                auto& gx = tp.grad_buffer(xn);
                const Real inv_count = Real(1) / static_cast<Real>(count);
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < C; ++c) {
                        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
                        const Real k = gs.data()[c] * invstd[c];
                        for (std::size_t i = 0; i < plane; ++i) {
                            const Real xhat = (xd[base + i] - mu[c]) * invstd[c];
                            gx[base + i] += k * (gout[base + i] - sum_g[c] * inv_count -
                                                 xhat * sum_gx[c] * inv_count);
                        }
                    }
            }
            if (gn >= 0) {
                auto& gg = tp.grad_buffer(gn);
                for (int c = 0; c < C; ++c) gg[c] += sum_gx[c];
            }
            if (bn >= 0) {
                auto& gb = tp.grad_buffer(bn);
                for (int c = 0; c < C; ++c) gb[c] += sum_g[c];
            }
        });
    res.y = res.y.with_handle(tape, id);
    return res;
}

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

inline Tensor relu(const Tensor& x) {
    std::vector<Real> out(x.numel());
    const Real* xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > Real(0) ? xd[i] : Real(0);
    Tensor result = Tensor::wrap(x.shape(), std::move(out));
    Tape* tape = x.tape();
    if (!tape) return result;
    int id = tape->record(result.shape(), {x.node()},
                          [xs = x.detached(), xn = x.node()](const Real* gout, Tape& tp) {
                              auto& gx = tp.grad_buffer(xn);
                              const Real* xd = xs.data();
                              for (std::size_t i = 0; i < gx.size(); ++i)
                                  if (xd[i] > Real(0)) gx[i] += gout[i];
                          });
    return result.with_handle(tape, id);
}

inline Tensor sigmoid(const Tensor& x) {
    std::vector<Real> out(x.numel());
    const Real* xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        // Branch on sign for numerical stability at large |x|.
        const Real v = xd[i];
        out[i] = v >= Real(0) ? Real(1) / (Real(1) + std::exp(-v))
                              : std::exp(v) / (Real(1) + std::exp(v));
    }
    Tensor result = Tensor::wrap(x.shape(), std::move(out));
    Tape* tape = x.tape();
    if (!tape) return result;
    int id = tape->record(result.shape(), {x.node()},
                          [ys = result.detached(), xn = x.node()](const Real* gout, Tape& tp) {
                              auto& gx = tp.grad_buffer(xn);
                              const Real* yd = ys.data();
                              for (std::size_t i = 0; i < gx.size(); ++i)
                                  gx[i] += gout[i] * yd[i] * (Real(1) - yd[i]);
                          });
    return result.with_handle(tape, id);
}

// y = scale * x + shift, elementwise.
inline Tensor affine(const Tensor& x, Real scale, Real shift) {
    std::vector<Real> out(x.numel());
    const Real* xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * xd[i] + shift;
    Tensor result = Tensor::wrap(x.shape(), std::move(out));
    Tape* tape = x.tape();
    if (!tape) return result;
    int id = tape->record(result.shape(), {x.node()},
                          [scale, xn = x.node()](const Real* gout, Tape& tp) {
                              auto& gx = tp.grad_buffer(xn);
                              for (std::size_t i = 0; i < gx.size(); ++i)
                                  gx[i] += scale * gout[i];
                          });
    return result.with_handle(tape, id);
}

inline Tensor elementwise_add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "elementwise_add");
    std::vector<Real> out(a.numel());
    const Real* ad = a.data();
    const Real* bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
    Tensor result = Tensor::wrap(a.shape(), std::move(out));
    Tape* tape = common_tape({&a, &b});
    if (!tape) return result;
    int id = tape->record(
        result.shape(), [&] {
            std::vector<int> in;
            for (const Tensor* t : {&a, &b})
                if (t->tracked()) in.push_back(t->node());
            return in;
        }(),
        [an = a.tracked() ? a.node() : -1, bn = b.tracked() ? b.node() : -1](const Real* gout,
                                                                             Tape& tp) {
            for (int node : {an, bn}) {
                if (node < 0) continue;
                auto& g = tp.grad_buffer(node);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += gout[i];
            }
        });
    return result.with_handle(tape, id);
}

inline Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "elementwise_mul");
    std::vector<Real> out(a.numel());
    const Real* ad = a.data();
    const Real* bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
    Tensor result = Tensor::wrap(a.shape(), std::move(out));
    Tape* tape = common_tape({&a, &b});
    if (!tape) return result;
    int id = tape->record(
        result.shape(), [&] {
            std::vector<int> in;
            for (const Tensor* t : {&a, &b})
                if (t->tracked()) in.push_back(t->node());
            return in;
        }(),
        [as = a.detached(), bs = b.detached(), an = a.tracked() ? a.node() : -1,
         bn = b.tracked() ? b.node() : -1](const Real* gout, Tape& tp) {
            if (an >= 0) {
                auto& g = tp.grad_buffer(an);
                const Real* other = bs.data();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += gout[i] * other[i];
            }
            if (bn >= 0) {
                auto& g = tp.grad_buffer(bn);
                const Real* other = as.data();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += gout[i] * other[i];
            }
        });
    return result.with_handle(tape, id);
}

// ---------------------------------------------------------------------------
// channel concat / split
// ---------------------------------------------------------------------------

inline Tensor concat_channels(const std::vector<Tensor>& parts) {
    require(!parts.empty(), ErrorKind::Shape, "concat_channels: no inputs");
    const int N = parts[0].n(), H = parts[0].h(), W = parts[0].w();
    int C = 0;
    for (const Tensor& p : parts) {
        require(p.n() == N && p.h() == H && p.w() == W, ErrorKind::Shape,
                "concat_channels: incompatible shape " + p.shape().str());
        C += p.c();
    }
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    std::vector<Real> out(static_cast<std::size_t>(N) * C * plane);
    int coff = 0;
    for (const Tensor& p : parts) {
        const Real* pd = p.data();
        for (int n = 0; n < N; ++n) {
            const std::size_t src = static_cast<std::size_t>(n) * p.c() * plane;
            const std::size_t dst = (static_cast<std::size_t>(n) * C + coff) * plane;
            std::copy(pd + src, pd + src + static_cast<std::size_t>(p.c()) * plane,
                      out.begin() + dst);
        }
        coff += p.c();
    }
    Tensor result = Tensor::wrap({N, C, H, W}, std::move(out));

    Tape* tape = nullptr;
    for (const Tensor& p : parts) {
        if (!p.tracked()) continue;
        if (!tape) tape = p.tape();
        else
            require(tape == p.tape(), ErrorKind::State, "op inputs belong to different tapes");
    }
    if (!tape) return result;

    struct Piece {
        int node;
        int coff;
        int channels;
    };
    std::vector<Piece> pieces;
    std::vector<int> in_nodes;
    coff = 0;
    for (const Tensor& p : parts) {
        if (p.tracked()) {
            pieces.push_back({p.node(), coff, p.c()});
            in_nodes.push_back(p.node());
        }
        coff += p.c();
    }
    int id = tape->record(result.shape(), in_nodes,
                          [pieces, N, C, plane](const Real* gout, Tape& tp) {
                              for (const Piece& pc : pieces) {
                                  auto& g = tp.grad_buffer(pc.node);
                                  for (int n = 0; n < N; ++n) {
                                      const std::size_t src =
                                          (static_cast<std::size_t>(n) * C + pc.coff) * plane;
                                      const std::size_t dst =
                                          static_cast<std::size_t>(n) * pc.channels * plane;
                                      const std::size_t len =
                                          static_cast<std::size_t>(pc.channels) * plane;
                                      for (std::size_t i = 0; i < len; ++i)
                                          g[dst + i] += gout[src + i];
                                  }
                              }
                          });
    return result.with_handle(tape, id);
}

// Splits into C/group_size groups of group_size channels, preserving order;
// concat_channels of the result is the identity.
inline std::vector<Tensor> split_channels(const Tensor& x, int group_size) {
    require(group_size >= 1, ErrorKind::Config, "split_channels: group size must be >= 1");
    require(x.c() % group_size == 0, ErrorKind::Shape,
            "split_channels: " + std::to_string(x.c()) + " channels not divisible by group size " +
                std::to_string(group_size));
    const int groups = x.c() / group_size;
    const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    std::vector<Tensor> out;
    out.reserve(groups);
    const Real* xd = x.data();
    for (int gi = 0; gi < groups; ++gi) {
        std::vector<Real> part(static_cast<std::size_t>(N) * group_size * plane);
        for (int n = 0; n < N; ++n) {
            const std::size_t src =
                (static_cast<std::size_t>(n) * C + gi * group_size) * plane;
            std::copy(xd + src, xd + src + static_cast<std::size_t>(group_size) * plane,
                      part.begin() + static_cast<std::size_t>(n) * group_size * plane);
        }
        Tensor piece = Tensor::wrap({N, group_size, H, W}, std::move(part));
        if (Tape* tape = x.tape()) {
            int id = tape->record(
                piece.shape(), {x.node()},
                [xn = x.node(), gi, group_size, N, C, plane](const Real* gout, Tape& tp) {
                    auto& g = tp.grad_buffer(xn);
                    for (int n = 0; n < N; ++n) {
                        const std::size_t dst =
                            (static_cast<std::size_t>(n) * C + gi * group_size) * plane;
                        const std::size_t src =
                            static_cast<std::size_t>(n) * group_size * plane;
                        const std::size_t len = static_cast<std::size_t>(group_size) * plane;
                        for (std::size_t i = 0; i < len; ++i) g[dst + i] += gout[src + i];
                    }
                });
            piece = piece.with_handle(tape, id);
        }
        out.push_back(std::move(piece));
    }
    return out;
}

// ---------------------------------------------------------------------------
// bilinear resize
// ---------------------------------------------------------------------------

namespace detail {

inline Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
    require(out_h >= 1 && out_w >= 1, ErrorKind::Shape, "resize target must be positive");
    const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
    const LerpAxis ay = bilinear_axis(out_h, H);
    const LerpAxis ax = bilinear_axis(out_w, W);
    std::vector<Real> out(static_cast<std::size_t>(N) * C * out_h * out_w);
    const Real* xd = x.data();
    parallel_for(static_cast<std::size_t>(N) * C, [&](std::size_t job) {
        const Real* xp = xd + job * H * W;
        Real* op = out.data() + job * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            const Real ty = ay.t[oy];
            const Real* r0 = xp + static_cast<std::size_t>(ay.i0[oy]) * W;
            const Real* r1 = xp + static_cast<std::size_t>(ay.i1[oy]) * W;
            Real* orow = op + static_cast<std::size_t>(oy) * out_w;
            for (int ox = 0; ox < out_w; ++ox) {
                const Real tx = ax.t[ox];
                const Real top = r0[ax.i0[ox]] * (Real(1) - tx) + r0[ax.i1[ox]] * tx;
                const Real bot = r1[ax.i0[ox]] * (Real(1) - tx) + r1[ax.i1[ox]] * tx;
                orow[ox] = top * (Real(1) - ty) + bot * ty;
            }
        }
    });
    Tensor result = Tensor::wrap({N, C, out_h, out_w}, std::move(out));
    Tape* tape = x.tape();
    if (!tape) return result;
    int id = tape->record(
        result.shape(), {x.node()},
        [xn = x.node(), ay, ax, N, C, H, W, out_h, out_w](const Real* gout, Tape& tp) {
            auto& gx = tp.grad_buffer(xn);
            parallel_for(static_cast<std::size_t>(N) * C, [&](std::size_t job) {
                Real* gp = gx.data() + job * H * W;
                const Real* op = gout + job * out_h * out_w;
                for (int oy = 0; oy < out_h; ++oy) {
                    const Real ty = ay.t[oy];
                    Real* r0 = gp + static_cast<std::size_t>(ay.i0[oy]) * W;
                    Real* r1 = gp + static_cast<std::size_t>(ay.i1[oy]) * W;
                    const Real* orow = op + static_cast<std::size_t>(oy) * out_w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const Real tx = ax.t[ox];
                        const Real g = orow[ox];
                        r0[ax.i0[ox]] += g * (Real(1) - ty) * (Real(1) - tx);
                        r0[ax.i1[ox]] += g * (Real(1) - ty) * tx;
                        r1[ax.i0[ox]] += g * ty * (Real(1) - tx);
                        r1[ax.i1[ox]] += g * ty * tx;
                    }
                }
            });
        });
    return result.with_handle(tape, id);
}

} // namespace detail

inline Tensor upsample_bilinear(const Tensor& x, int factor) {
    require(factor == 2 || factor == 4, ErrorKind::Config,
            "upsample factor must be 2 or 4, got " + std::to_string(factor));
    return detail::resize_bilinear(x, x.h() * factor, x.w() * factor);
}

inline Tensor downsample(const Tensor& x, int factor) {
    require(factor == 2 || factor == 4, ErrorKind::Config,
            "downsample factor must be 2 or 4, got " + std::to_string(factor));
    require(x.h() % factor == 0 && x.w() % factor == 0, ErrorKind::Shape,
            "downsample: dimensions " + x.shape().str() + " not divisible by " +
                std::to_string(factor));
    return detail::resize_bilinear(x, x.h() / factor, x.w() / factor);
}

// Repeated x4/x2 up-sampling until the spatial size has grown by `factor`
// (a power of two). Used to bring side-output maps to input resolution.
inline Tensor upsample_to_factor(const Tensor& x, int factor) {
    require(factor >= 1 && (factor & (factor - 1)) == 0, ErrorKind::Config,
            "upsample factor must be a power of two");
    Tensor cur = x;
    int remaining = factor;
    while (remaining >= 4) {
        cur = upsample_bilinear(cur, 4);
        remaining /= 4;
    }
    if (remaining == 2) cur = upsample_bilinear(cur, 2);
    return cur;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

inline Tensor sum_all(const Tensor& x) {
    Real acc = 0;
    const Real* xd = x.data();
    for (std::size_t i = 0; i < x.numel(); ++i) acc += xd[i];
    Tensor result = Tensor::wrap({1, 1, 1, 1}, {acc});
    Tape* tape = x.tape();
    if (!tape) return result;
    int id = tape->record(result.shape(), {x.node()},
                          [xn = x.node()](const Real* gout, Tape& tp) {
                              auto& gx = tp.grad_buffer(xn);
                              for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gout[0];
                          });
    return result.with_handle(tape, id);
}

} // namespace sinet
