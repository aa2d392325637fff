#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sinet/model.hpp"
#include "sinet/ops.hpp"

namespace sinet {

namespace detail {

inline void check_binary_mask(const Tensor& gt) {
    for (std::size_t i = 0; i < gt.numel(); ++i) {
        const Real v = gt.data()[i];
        require(v == Real(0) || v == Real(1), ErrorKind::Validation,
                "ground truth must be binary (0/1), found " + std::to_string(v));
    }
}

inline Real stable_sigmoid(Real z) {
    return z >= Real(0) ? Real(1) / (Real(1) + std::exp(-z))
                        : std::exp(z) / (Real(1) + std::exp(z));
}

// per-element binary cross-entropy on logits, computed without overflow
inline Real bce_logit(Real z, Real g) {
    return std::max(z, Real(0)) - z * g + std::log1p(std::exp(-std::abs(z)));
}

} // namespace detail

// Per-pixel difficulty weights: 1 + 5 * |meanpool_{31x31, stride 1, pad 15}(G) - G|.
// Flat regions get weight 1; pixels near a boundary get up to 6. The mean pool
// uses zero padding and the full 31*31 divisor, applied separably.
inline Tensor boundary_weight_map(const Tensor& gt) {
    detail::check_binary_mask(gt);
    require(gt.c() == 1, ErrorKind::Shape,
            "weight map expects a single-channel mask, got " + gt.shape().str());
    const Tensor g = gt.detached();
    ConvSpec col{1, 1, 31, 1, 1, 1, 15, 0, false};
    ConvSpec row{1, 1, 1, 31, 1, 1, 0, 15, false};
    Tensor kcol = Tensor::full(1, 1, 31, 1, Real(1) / 31);
    Tensor krow = Tensor::full(1, 1, 1, 31, Real(1) / 31);
    Tensor mean = conv2d(conv2d(g, kcol, Tensor{}, col), krow, Tensor{}, row);
    std::vector<Real> out(g.numel());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = Real(1) + Real(5) * std::abs(mean.data()[i] - g.data()[i]);
    return Tensor::wrap(g.shape(), std::move(out));
}

namespace detail {

inline void check_loss_inputs(const Tensor& logits, const Tensor& gt, const Tensor& w) {
    require(logits.shape() == gt.shape(), ErrorKind::Shape,
            "loss: prediction shape " + logits.shape().str() + " != mask shape " +
                gt.shape().str());
    require(w.shape() == gt.shape(), ErrorKind::Shape,
            "loss: weight shape " + w.shape().str() + " != mask shape " + gt.shape().str());
    check_binary_mask(gt);
    for (std::size_t i = 0; i < w.numel(); ++i)
        require(w.data()[i] > Real(0), ErrorKind::Validation, "loss weights must be positive");
}

} // namespace detail

// Weighted binary cross-entropy on logits, normalized by the weight mass of
// each image and averaged over the batch.
inline Tensor weighted_bce(const Tensor& logits, const Tensor& gt, const Tensor& w) {
    detail::check_loss_inputs(logits, gt, w);
    const int N = logits.n();
    const std::size_t per = logits.numel() / N;
    Real loss = 0;
    std::vector<Real> wsum(N, 0);
    for (int n = 0; n < N; ++n) {
        const std::size_t base = n * per;
        Real acc = 0;
        for (std::size_t i = 0; i < per; ++i) {
            acc += w.data()[base + i] *
                   detail::bce_logit(logits.data()[base + i], gt.data()[base + i]);
            wsum[n] += w.data()[base + i];
        }
        loss += acc / wsum[n];
    }
    loss /= N;
    Tensor result = Tensor::wrap({1, 1, 1, 1}, {loss});
    Tape* tape = logits.tape();
    if (!tape) return result;
    int id = tape->record(
        result.shape(), {logits.node()},
        [zs = logits.detached(), gs = gt.detached(), ws = w.detached(), wsum, N, per,
         zn = logits.node()](const Real* gout, Tape& tp) {
            auto& gz = tp.grad_buffer(zn);
            for (int n = 0; n < N; ++n) {
                const std::size_t base = n * per;
                const Real k = gout[0] / (wsum[n] * N);
                for (std::size_t i = 0; i < per; ++i) {
                    const Real p = detail::stable_sigmoid(zs.data()[base + i]);
                    gz[base + i] += k * ws.data()[base + i] * (p - gs.data()[base + i]);
                }
            }
        });
    return result.with_handle(tape, id);
}

// Weighted IoU loss on logits: 1 - sum(w*p*g) / sum(w*(p + g - p*g)) per
// image, averaged over the batch.
inline Tensor weighted_iou(const Tensor& logits, const Tensor& gt, const Tensor& w) {
    detail::check_loss_inputs(logits, gt, w);
    const int N = logits.n();
    const std::size_t per = logits.numel() / N;
    Real loss = 0;
    std::vector<Real> inter(N, 0), uni(N, 0);
    for (int n = 0; n < N; ++n) {
        const std::size_t base = n * per;
        for (std::size_t i = 0; i < per; ++i) {
            const Real p = detail::stable_sigmoid(logits.data()[base + i]);
            const Real g = gt.data()[base + i];
            const Real wi = w.data()[base + i];
            inter[n] += wi * p * g;
            uni[n] += wi * (p + g - p * g);
        }
        require(uni[n] > Real(0), ErrorKind::Validation,
                "IoU loss undefined: empty mask with an all-zero prediction");
        loss += Real(1) - inter[n] / uni[n];
    }
    loss /= N;
    Tensor result = Tensor::wrap({1, 1, 1, 1}, {loss});
    Tape* tape = logits.tape();
    if (!tape) return result;
    int id = tape->record(
        result.shape(), {logits.node()},
        [zs = logits.detached(), gs = gt.detached(), ws = w.detached(), inter, uni, N, per,
         zn = logits.node()](const Real* gout, Tape& tp) {
            auto& gz = tp.grad_buffer(zn);
            for (int n = 0; n < N; ++n) {
                const std::size_t base = n * per;
                const Real u2 = uni[n] * uni[n];
                for (std::size_t i = 0; i < per; ++i) {
                    const Real p = detail::stable_sigmoid(zs.data()[base + i]);
                    const Real g = gs.data()[base + i];
                    const Real wi = ws.data()[base + i];
                    // d(1 - I/U)/dp = -(w*g*U - I*w*(1-g)) / U^2
                    const Real dp = -(wi * g * uni[n] - inter[n] * wi * (Real(1) - g)) / u2;
                    gz[base + i] += gout[0] / N * dp * p * (Real(1) - p);
                }
            }
        });
    return result.with_handle(tape, id);
}

// Combined per-map loss: weighted IoU + weighted BCE.
inline Tensor structure_loss(const Tensor& logits, const Tensor& gt, const Tensor& w) {
    return elementwise_add(weighted_iou(logits, gt, w), weighted_bce(logits, gt, w));
}

// Deep supervision: the combined loss applied to the coarse map and all three
// refinement side-outputs at ground-truth resolution. The weight map is
// computed once from the mask.
inline Tensor total_loss(const SideOutputs& out, const Tensor& gt) {
    Tensor w = boundary_weight_map(gt);
    Tensor loss = structure_loss(out.c6_up, gt, w);
    for (const Tensor* c : {&out.c5_up, &out.c4_up, &out.c3_up})
        loss = elementwise_add(loss, structure_loss(*c, gt, w));
    return loss;
}

} // namespace sinet
