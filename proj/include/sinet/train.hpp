#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "sinet/loss.hpp"
#include "sinet/model.hpp"

namespace sinet {

struct TrainConfig {
    int batch_size = 36;
    Real learning_rate = Real(1e-4);
    Real lr_decay_factor = Real(0.1);
    int lr_decay_every = 50; // epochs
    int epochs = 40;
    long max_steps = 0; // 0 = no cap
    Real beta1 = Real(0.9);
    Real beta2 = Real(0.999);
    Real adam_eps = Real(1e-8);
    Real bn_momentum = kBnMomentum;
    std::uint64_t seed = 42;

    void validate() const {
        require(batch_size > 0, ErrorKind::Config, "batch size must be positive");
        require(learning_rate >= 0, ErrorKind::Config, "learning rate must be >= 0");
        require(lr_decay_factor > 0, ErrorKind::Config, "lr decay factor must be positive");
        require(lr_decay_every > 0, ErrorKind::Config, "lr decay period must be positive");
        require(epochs > 0, ErrorKind::Config, "epoch count must be positive");
        require(max_steps >= 0, ErrorKind::Config, "step cap must be >= 0");
        require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, ErrorKind::Config,
                "Adam betas must lie in [0, 1)");
        require(adam_eps > 0, ErrorKind::Config, "Adam eps must be positive");
    }
};

// Adam with bias correction. State is keyed by parameter name so it survives
// the per-step rebuilding of parameter tensors.
class Adam {
public:
    Adam(Real beta1, Real beta2, Real eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void begin_step() { ++t_; }

    void update(const std::string& name, Tensor& value, const Tensor& grad, Real lr) {
        require(t_ > 0, ErrorKind::State, "Adam update outside a step");
        require(value.shape() == grad.shape(), ErrorKind::Shape,
                "Adam: gradient shape mismatch for " + name);
        State& st = state_[name];
        if (st.m.empty()) {
            st.m.assign(value.numel(), 0);
            st.v.assign(value.numel(), 0);
        }
        const Real c1 = Real(1) - std::pow(beta1_, static_cast<Real>(t_));
        const Real c2 = Real(1) - std::pow(beta2_, static_cast<Real>(t_));
        std::vector<Real> next(value.data(), value.data() + value.numel());
        for (std::size_t i = 0; i < next.size(); ++i) {
            const Real g = grad.data()[i];
            st.m[i] = beta1_ * st.m[i] + (Real(1) - beta1_) * g;
            st.v[i] = beta2_ * st.v[i] + (Real(1) - beta2_) * g * g;
            next[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps_);
        }
        value = Tensor::from_data(value.shape(), std::move(next));
    }

    long step_count() const { return t_; }

private:
    struct State {
        std::vector<Real> m, v;
    };
    Real beta1_, beta2_, eps_;
    long t_ = 0;
    std::map<std::string, State> state_;
};

// (image, binary mask) pair; image (1,3,H,W), mask (1,1,H,W).
using Sample = std::pair<Tensor, Tensor>;

namespace detail {

inline Tensor stack_batch(const std::vector<Sample>& data, const std::vector<int>& idx,
                          bool masks) {
    const Tensor& first = masks ? data[idx[0]].second : data[idx[0]].first;
    std::vector<Real> buf;
    buf.reserve(first.numel() * idx.size());
    for (int i : idx) {
        const Tensor& t = masks ? data[i].second : data[i].first;
        require(t.shape() == first.shape(), ErrorKind::Shape,
                "all samples in a batch must share one shape");
        buf.insert(buf.end(), t.data(), t.data() + t.numel());
    }
    return Tensor::from_data(
        {static_cast<int>(idx.size()), first.c(), first.h(), first.w()}, std::move(buf));
}

} // namespace detail

struct TrainResult {
    SinetParams params;
    std::vector<Real> loss_curve; // one entry per optimizer step
};

// Deterministic Adam training over (image, mask) pairs with the stepped
// learning-rate schedule. Stops after `epochs` or `max_steps`, whichever
// comes first.
inline TrainResult train(const std::vector<Sample>& dataset, const SinetConfig& model_cfg,
                         const TrainConfig& cfg) {
    cfg.validate();
    model_cfg.validate();
    require(!dataset.empty(), ErrorKind::Validation, "training dataset is empty");
    for (const Sample& s : dataset) {
        require(s.first.c() == 3 && s.second.c() == 1, ErrorKind::Shape,
                "samples must be (3-channel image, 1-channel mask)");
        require(s.first.h() == s.second.h() && s.first.w() == s.second.w(),
                ErrorKind::Shape, "image and mask sizes differ");
    }

    TrainResult res;
    res.params = SinetParams::make(model_cfg);
    Adam opt(cfg.beta1, cfg.beta2, cfg.adam_eps);
    Rng order(cfg.seed);
    std::vector<int> indices(dataset.size());
    std::iota(indices.begin(), indices.end(), 0);

    long steps = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const Real lr = cfg.learning_rate *
                        std::pow(cfg.lr_decay_factor,
                                 static_cast<Real>(epoch / cfg.lr_decay_every));
        std::shuffle(indices.begin(), indices.end(), order.engine());
        for (std::size_t start = 0; start < indices.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            if (cfg.max_steps > 0 && steps >= cfg.max_steps) return res;
            const std::size_t stop =
                std::min(indices.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<int> batch(indices.begin() + start, indices.begin() + stop);

            Tensor images = detail::stack_batch(dataset, batch, false);
            Tensor masks = detail::stack_batch(dataset, batch, true);

            Tape tape;
            SinetParams wp = res.params.watched(tape);
            TrainContext ctx;
            ctx.training = true;
            ctx.bn_momentum = cfg.bn_momentum;
            SideOutputs out = sinet_forward(images, wp, model_cfg, &ctx);
            Tensor loss = total_loss(out, masks);
            res.loss_curve.push_back(loss.item());
            tape.backward(loss);

            opt.begin_step();
            std::map<std::string, Tensor> grads;
            wp.visit([&](const std::string& n, const Tensor& t, ParamKind kind) {
                if (kind == ParamKind::Weight) grads.emplace(n, tape.grad(t));
            });
            res.params.visit(ParamVisitor([&](const std::string& n, Tensor& t, ParamKind kind) {
                if (kind == ParamKind::Weight) opt.update(n, t, grads.at(n), lr);
            }));
            res.params.apply_stat_updates(ctx.stat_updates);
            ++steps;
        }
    }
    return res;
}

// Mean intersection-over-union of thresholded predictions over a dataset.
inline Real mean_train_iou(const std::vector<Sample>& dataset, const SinetParams& params,
                           const SinetConfig& cfg, Real threshold = Real(0.5)) {
    require(!dataset.empty(), ErrorKind::Validation, "dataset is empty");
    Real total = 0;
    for (const Sample& s : dataset) {
        SideOutputs out = sinet_forward(s.first, params, cfg);
        Tensor p = sigmoid(out.c3_up);
        long inter = 0, uni = 0;
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const bool pred = p.data()[i] > threshold;
            const bool gt = s.second.data()[i] > Real(0.5);
            inter += pred && gt;
            uni += pred || gt;
        }
        total += uni == 0 ? Real(1) : static_cast<Real>(inter) / uni;
    }
    return total / dataset.size();
}

// ---------------------------------------------------------------------------
// synthetic low-contrast blob dataset
// ---------------------------------------------------------------------------

// Images contain an elliptical object whose texture matches the background;
// only a small fixed color shift separates it. Masks are the ellipse regions.
inline std::vector<Sample> make_toy_dataset(int count, int size, std::uint64_t seed) {
    require(count > 0, ErrorKind::Config, "toy dataset count must be positive");
    require(size >= 32 && size % 32 == 0, ErrorKind::Config,
            "toy image size must be a positive multiple of 32");
    Rng rng(seed);
    // the cue the model has to learn: constant across the dataset, small
    // against the texture amplitude
    const Real shift[3] = {Real(0.20), Real(-0.12), Real(0.08)};

    std::vector<Sample> data;
    data.reserve(count);
    for (int n = 0; n < count; ++n) {
        const Real base[3] = {rng.uniform(Real(0.3), Real(0.6)),
                              rng.uniform(Real(0.3), Real(0.6)),
                              rng.uniform(Real(0.3), Real(0.6))};
        // two sinusoidal texture components shared by all channels
        const Real fx1 = rng.uniform(Real(0.2), Real(0.7));
        const Real fy1 = rng.uniform(Real(0.2), Real(0.7));
        const Real ph1 = rng.uniform(0, Real(6.28318));
        const Real fx2 = rng.uniform(Real(0.05), Real(0.3));
        const Real fy2 = rng.uniform(Real(0.05), Real(0.3));
        const Real ph2 = rng.uniform(0, Real(6.28318));

        const Real cx = rng.uniform(Real(0.3), Real(0.7)) * size;
        const Real cy = rng.uniform(Real(0.3), Real(0.7)) * size;
        const Real ra = rng.uniform(Real(0.12), Real(0.28)) * size;
        const Real rb = rng.uniform(Real(0.12), Real(0.28)) * size;
        const Real rot = rng.uniform(0, Real(3.14159));
        const Real cr = std::cos(rot), sr = std::sin(rot);

        std::vector<Real> img(static_cast<std::size_t>(3) * size * size);
        std::vector<Real> mask(static_cast<std::size_t>(size) * size);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const Real tex = Real(0.12) * std::sin(fx1 * x + fy1 * y + ph1) +
                                 Real(0.10) * std::sin(fx2 * x - fy2 * y + ph2);
                const Real dx = x - cx, dy = y - cy;
                const Real u = (cr * dx + sr * dy) / ra;
                const Real v = (-sr * dx + cr * dy) / rb;
                const bool inside = u * u + v * v <= 1;
                mask[static_cast<std::size_t>(y) * size + x] = inside ? 1 : 0;
                for (int c = 0; c < 3; ++c) {
                    Real val = base[c] + tex + rng.uniform(Real(-0.04), Real(0.04));
                    if (inside) val += shift[c];
                    img[(static_cast<std::size_t>(c) * size + y) * size + x] =
                        std::clamp(val, Real(0), Real(1));
                }
            }
        data.emplace_back(Tensor::from_data({1, 3, size, size}, std::move(img)),
                          Tensor::from_data({1, 1, size, size}, std::move(mask)));
    }
    return data;
}

} // namespace sinet
