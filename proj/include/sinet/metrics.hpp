#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sinet/common.hpp"
#include "sinet/edt.hpp"
#include "sinet/tensor.hpp"

namespace sinet {

// Conventions shared by the production metrics and the test oracles. The
// degenerate rules cover inputs the metric definitions leave open; they are
// pinned here in one place.
namespace metric_convention {

inline constexpr Real kEps = 2.220446049250313e-16;
inline constexpr Real kSAlpha = Real(0.5);
inline constexpr int kEThresholds = 256;          // t = j/255, j in [0,255]
inline constexpr int kWfGaussianSize = 7;
inline constexpr Real kWfGaussianSigma = Real(5);
inline constexpr Real kWfBeta2 = Real(1);
// background importance 2 - exp(decay * dist), halving every 5 pixels
inline const Real kWfImportanceDecay = std::log(Real(0.5)) / Real(5);

// Degenerate rules:
//  - S-measure: empty GT -> 1 - mean(P); full GT -> mean(P); otherwise the
//    combined score is clamped below at 0. Zero-area centroid quadrants are
//    skipped; their area weight is zero. The quadrant boundary is the pixel
//    boundary nearest the mass centroid (clamped so neither side is empty on
//    axes longer than one pixel), which keeps the split mirror-consistent
//    except when the centroid falls exactly on a pixel center.
//  - E-measure: binarization is P >= t; empty GT scores the fraction of
//    pixels predicted background, full GT the fraction predicted foreground,
//    so an empty prediction against an empty GT scores exactly 1. The
//    enhanced-alignment sum is normalized by H*W, keeping every threshold
//    score inside [0,1].
//  - weighted F: empty GT -> 1 if the prediction is identically zero else 0.
//    The dependency filter uses replicate padding, so a constant error map is
//    a fixed point of the smoothing. Nearest-foreground ties resolve to the
//    smallest column, then the smallest row.

// boundary index for the centroid quadrant split along one axis
inline int centroid_split(Real centroid0, int extent) {
    const int b = static_cast<int>(std::round(centroid0 + Real(0.5)));
    return std::clamp(b, 1, std::max(1, extent - 1));
}

} // namespace metric_convention

struct GrayMap {
    int height = 0;
    int width = 0;
    std::vector<Real> values;   // row-major, clamped to [0,1]

    static GrayMap from_values(int h, int w, std::vector<Real> v) {
        require(h > 0 && w > 0, ErrorKind::Shape, "GrayMap: empty dims");
        require(v.size() == static_cast<std::size_t>(h) * w, ErrorKind::Shape,
                "GrayMap: value count does not match dims");
        for (Real& x : v) {
            require(is_finite(x), ErrorKind::Validation, "GrayMap: non-finite value");
            x = std::clamp(x, Real(0), Real(1));
        }
        return {h, w, std::move(v)};
    }
    static GrayMap constant(int h, int w, Real v) {
        return from_values(h, w, std::vector<Real>(static_cast<std::size_t>(h) * w, v));
    }
    static GrayMap from_tensor(const Tensor& t, int n = 0, int c = 0) {
        std::vector<Real> v(static_cast<std::size_t>(t.h()) * t.w());
        for (int y = 0; y < t.h(); ++y)
            for (int x = 0; x < t.w(); ++x)
                v[static_cast<std::size_t>(y) * t.w() + x] = t.at(n, c, y, x);
        return from_values(t.h(), t.w(), std::move(v));
    }
    Real at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
    std::size_t numel() const { return values.size(); }
};

struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> values;   // row-major, strictly 0/1

    static BinaryMask from_values(int h, int w, std::vector<std::uint8_t> v) {
        require(h > 0 && w > 0, ErrorKind::Shape, "BinaryMask: empty dims");
        require(v.size() == static_cast<std::size_t>(h) * w, ErrorKind::Shape,
                "BinaryMask: value count does not match dims");
        for (std::uint8_t x : v)
            require(x == 0 || x == 1, ErrorKind::Validation, "BinaryMask: non-binary value");
        return {h, w, std::move(v)};
    }
    static BinaryMask from_tensor(const Tensor& t, int n = 0, int c = 0) {
        std::vector<std::uint8_t> v(static_cast<std::size_t>(t.h()) * t.w());
        for (int y = 0; y < t.h(); ++y)
            for (int x = 0; x < t.w(); ++x) {
                const Real g = t.at(n, c, y, x);
                require(g == 0 || g == 1, ErrorKind::Validation,
                        "BinaryMask: tensor is not binary");
                v[static_cast<std::size_t>(y) * t.w() + x] = g > 0 ? 1 : 0;
            }
        return from_values(t.h(), t.w(), std::move(v));
    }
    bool at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c] != 0; }
    std::size_t numel() const { return values.size(); }
    std::size_t fg_count() const {
        std::size_t m = 0;
        for (std::uint8_t x : values) m += x;
        return m;
    }
};

namespace detail {

inline void check_metric_dims(const GrayMap& p, const BinaryMask& g) {
    require(p.height == g.height && p.width == g.width, ErrorKind::Shape,
            "metric: prediction and ground truth dims differ");
}

inline Real map_mean(const std::vector<Real>& v) {
    Real s = 0;
    for (Real x : v) s += x;
    return s / Real(v.size());
}

// 2*mu / (mu^2 + 1 + sigma + eps) over the masked selection, unbiased sigma
inline Real object_similarity(const std::vector<Real>& vals) {
    using metric_convention::kEps;
    if (vals.empty()) return 0;
    Real mu = 0;
    for (Real x : vals) mu += x;
    mu /= Real(vals.size());
    Real sigma = 0;
    if (vals.size() > 1) {
        Real acc = 0;
        for (Real x : vals) acc += (x - mu) * (x - mu);
        sigma = std::sqrt(acc / Real(vals.size() - 1));
    }
    return 2 * mu / (mu * mu + 1 + sigma + kEps);
}

// single-window SSIM between a prediction block and a binary block
inline Real ssim_block(const GrayMap& p, const BinaryMask& g, int r0, int r1, int c0,
                       int c1) {
    using metric_convention::kEps;
    const std::int64_t n = static_cast<std::int64_t>(r1 - r0) * (c1 - c0);
    Real mx = 0, my = 0;
    for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) {
            mx += p.at(r, c);
            my += g.at(r, c) ? 1 : 0;
        }
    mx /= Real(n);
    my /= Real(n);
    Real sx = 0, sy = 0, sxy = 0;
    for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) {
            const Real dx = p.at(r, c) - mx;
            const Real dy = (g.at(r, c) ? 1 : 0) - my;
            sx += dx * dx;
            sy += dy * dy;
            sxy += dx * dy;
        }
    const Real norm = Real(n - 1) + kEps;
    sx /= norm;
    sy /= norm;
    sxy /= norm;
    const Real a = 4 * mx * my * sxy;
    const Real b = (mx * mx + my * my) * (sx + sy);
    if (a != 0) return a / (b + kEps);
    return b == 0 ? Real(1) : Real(0);
}

inline std::array<Real, 256> e_threshold_levels() {
    std::array<Real, 256> t{};
    for (int j = 0; j < 256; ++j) t[j] = Real(j) / Real(255);
    return t;
}

// enhanced alignment of one (prediction, gt) cell given the two map means
inline Real enhanced_cell(Real d_fm, Real d_gt) {
    using metric_convention::kEps;
    const Real align = 2 * d_fm * d_gt / (d_fm * d_fm + d_gt * d_gt + kEps);
    return (align + 1) * (align + 1) / 4;
}

inline std::vector<Real> gaussian_kernel_7x5() {
    const int k = metric_convention::kWfGaussianSize;
    const Real sigma = metric_convention::kWfGaussianSigma;
    std::vector<Real> ker(static_cast<std::size_t>(k) * k);
    Real total = 0;
    for (int dy = 0; dy < k; ++dy)
        for (int dx = 0; dx < k; ++dx) {
            const Real ry = Real(dy - k / 2), rx = Real(dx - k / 2);
            const Real v = std::exp(-(ry * ry + rx * rx) / (2 * sigma * sigma));
            ker[static_cast<std::size_t>(dy) * k + dx] = v;
            total += v;
        }
    for (Real& v : ker) v /= total;
    return ker;
}

} // namespace detail

inline Real mae(const GrayMap& p, const BinaryMask& g) {
    detail::check_metric_dims(p, g);
    Real acc = 0;
    for (std::size_t i = 0; i < p.numel(); ++i)
        acc += std::abs(p.values[i] - Real(g.values[i]));
    return acc / Real(p.numel());
}

inline Real s_measure(const GrayMap& p, const BinaryMask& g) {
    using metric_convention::kSAlpha;
    detail::check_metric_dims(p, g);
    const std::size_t n = p.numel();
    const std::size_t m = g.fg_count();
    if (m == 0) return 1 - detail::map_mean(p.values);
    if (m == n) return detail::map_mean(p.values);

    // object term: foreground similarity on P, background similarity on 1-P
    std::vector<Real> fg_vals, bg_vals;
    fg_vals.reserve(m);
    bg_vals.reserve(n - m);
    for (std::size_t i = 0; i < n; ++i)
        (g.values[i] ? fg_vals : bg_vals)
            .push_back(g.values[i] ? p.values[i] : 1 - p.values[i]);
    const Real mu = Real(m) / Real(n);
    const Real s_object = mu * detail::object_similarity(fg_vals) +
                          (1 - mu) * detail::object_similarity(bg_vals);

    // region term: area-weighted SSIM over the four centroid quadrants
    Real col_mass = 0, row_mass = 0;
    for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c)
            if (g.at(r, c)) {
                col_mass += Real(c);
                row_mass += Real(r);
            }
    const int cx = metric_convention::centroid_split(col_mass / Real(m), g.width);
    const int cy = metric_convention::centroid_split(row_mass / Real(m), g.height);
    const Real area = Real(n);
    const std::array<std::array<int, 4>, 4> quads{{
        {0, cy, 0, cx},
        {0, cy, cx, g.width},
        {cy, g.height, 0, cx},
        {cy, g.height, cx, g.width},
    }};
    Real s_region = 0;
    for (const auto& q : quads) {
        const std::int64_t qn = static_cast<std::int64_t>(q[1] - q[0]) * (q[3] - q[2]);
        if (qn == 0) continue;
        const Real weight = Real(qn) / area;
        s_region += weight * detail::ssim_block(p, g, q[0], q[1], q[2], q[3]);
    }

    const Real s = kSAlpha * s_object + (1 - kSAlpha) * s_region;
    return std::max(s, Real(0));
}

inline Real e_measure_mean(const GrayMap& p, const BinaryMask& g) {
    detail::check_metric_dims(p, g);
    const std::size_t n = p.numel();
    const std::size_t m = g.fg_count();
    const auto levels = detail::e_threshold_levels();

    // per pixel, the number of levels at which it binarizes to foreground;
    // upper_bound applies the same P >= t predicate as a direct sweep
    std::array<std::int64_t, 257> hist_fg{}, hist_bg{};
    for (std::size_t i = 0; i < n; ++i) {
        const auto it = std::upper_bound(levels.begin(), levels.end(), p.values[i]);
        const std::size_t cnt = static_cast<std::size_t>(it - levels.begin());
        (g.values[i] ? hist_fg : hist_bg)[cnt] += 1;
    }
    std::array<std::int64_t, 258> suf_fg{}, suf_bg{};
    for (int c = 256; c >= 0; --c) {
        suf_fg[c] = suf_fg[c + 1] + hist_fg[c];
        suf_bg[c] = suf_bg[c + 1] + hist_bg[c];
    }

    Real acc = 0;
    for (int j = 0; j < metric_convention::kEThresholds; ++j) {
        const std::int64_t n11 = suf_fg[j + 1];   // fg pixels predicted fg at level j
        const std::int64_t n01 = suf_bg[j + 1];   // bg pixels predicted fg
        Real score;
        if (m == 0) {
            score = Real(static_cast<std::int64_t>(n) - n01) / Real(n);
        } else if (m == n) {
            score = Real(n11) / Real(n);
        } else {
            const Real mu_fm = Real(n11 + n01) / Real(n);
            const Real mu_gt = Real(m) / Real(n);
            const std::int64_t n10 = static_cast<std::int64_t>(m) - n11;
            const std::int64_t n00 = static_cast<std::int64_t>(n - m) - n01;
            const Real sum = Real(n11) * detail::enhanced_cell(1 - mu_fm, 1 - mu_gt) +
                             Real(n10) * detail::enhanced_cell(-mu_fm, 1 - mu_gt) +
                             Real(n01) * detail::enhanced_cell(1 - mu_fm, -mu_gt) +
                             Real(n00) * detail::enhanced_cell(-mu_fm, -mu_gt);
            score = sum / Real(n);
        }
        acc += score;
    }
    return acc / Real(metric_convention::kEThresholds);
}

inline Real weighted_f_measure(const GrayMap& p, const BinaryMask& g) {
    using namespace metric_convention;
    detail::check_metric_dims(p, g);
    const std::size_t n = p.numel();
    const std::size_t m = g.fg_count();
    if (m == 0) {
        Real mass = 0;
        for (Real x : p.values) mass += x;
        return mass == 0 ? Real(1) : Real(0);
    }

    std::vector<Real> err(n);
    for (std::size_t i = 0; i < n; ++i) err[i] = std::abs(p.values[i] - Real(g.values[i]));

    // background pixels inherit the error at their nearest foreground pixel
    const EdtResult edt = distance_transform(g.values, g.height, g.width);
    std::vector<Real> err_t(n);
    for (std::size_t i = 0; i < n; ++i)
        err_t[i] = g.values[i] ? err[i] : err[static_cast<std::size_t>(edt.nearest[i])];

    const std::vector<Real> ker = detail::gaussian_kernel_7x5();
    const int kh = kWfGaussianSize / 2;
    std::vector<Real> smoothed(n);
    for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c) {
            Real acc = 0;
            for (int dy = -kh; dy <= kh; ++dy)
                for (int dx = -kh; dx <= kh; ++dx) {
                    const int rr = std::clamp(r + dy, 0, g.height - 1);
                    const int cc = std::clamp(c + dx, 0, g.width - 1);
                    acc += ker[static_cast<std::size_t>(dy + kh) * kWfGaussianSize +
                               (dx + kh)] *
                           err_t[static_cast<std::size_t>(rr) * g.width + cc];
                }
            smoothed[static_cast<std::size_t>(r) * g.width + c] = acc;
        }

    Real fg_weighted = 0, bg_weighted = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Real corrected =
            g.values[i] && smoothed[i] < err[i] ? smoothed[i] : err[i];
        if (g.values[i]) {
            fg_weighted += corrected;
        } else {
            const Real importance = 2 - std::exp(kWfImportanceDecay * edt.dist[i]);
            bg_weighted += corrected * importance;
        }
    }

    const Real tp = Real(m) - fg_weighted;
    const Real recall = 1 - fg_weighted / Real(m);
    const Real precision = tp / (kEps + tp + bg_weighted);
    return (1 + kWfBeta2) * recall * precision / (kEps + kWfBeta2 * recall + precision);
}

struct MetricScores {
    Real s_alpha = 0;
    Real e_phi_mean = 0;
    Real f_beta_w = 0;
    Real mae_v = 0;
};

inline MetricScores evaluate_pair(const GrayMap& p, const BinaryMask& g) {
    return {s_measure(p, g), e_measure_mean(p, g), weighted_f_measure(p, g), mae(p, g)};
}

struct MetricReport {
    Real s_alpha = 0;
    Real e_phi_mean = 0;
    Real f_beta_w = 0;
    Real mae_v = 0;
    std::size_t image_count = 0;
};

inline MetricReport aggregate_scores(const std::vector<MetricScores>& scores) {
    require(!scores.empty(), ErrorKind::Validation, "aggregate_scores: no images");
    MetricReport rep;
    for (const MetricScores& s : scores) {
        rep.s_alpha += s.s_alpha;
        rep.e_phi_mean += s.e_phi_mean;
        rep.f_beta_w += s.f_beta_w;
        rep.mae_v += s.mae_v;
    }
    const Real n = Real(scores.size());
    rep.s_alpha /= n;
    rep.e_phi_mean /= n;
    rep.f_beta_w /= n;
    rep.mae_v /= n;
    rep.image_count = scores.size();
    return rep;
}

struct GeneralizationRow {
    Real self = 0;
    Real mean_others = 0;
    Real drop = 0;   // (self - mean_others) / self
};

inline std::vector<GeneralizationRow> generalization_table(
    const std::vector<std::vector<Real>>& scores) {
    const std::size_t n = scores.size();
    require(n >= 2, ErrorKind::Validation, "generalization_table: need at least 2 datasets");
    for (const auto& row : scores)
        require(row.size() == n, ErrorKind::Validation,
                "generalization_table: score matrix is not square");
    std::vector<GeneralizationRow> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        Real others = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) others += scores[i][j];
        out[i].self = scores[i][i];
        out[i].mean_others = others / Real(n - 1);
        require(out[i].self != 0, ErrorKind::Validation,
                "generalization_table: zero self score");
        out[i].drop = (out[i].self - out[i].mean_others) / out[i].self;
    }
    return out;
}

// bilinear resize with half-pixel centers, for matching prediction dims to GT
inline GrayMap resize_gray(const GrayMap& src, int h, int w) {
    require(h > 0 && w > 0, ErrorKind::Shape, "resize_gray: empty target");
    if (h == src.height && w == src.width) return src;
    std::vector<Real> out(static_cast<std::size_t>(h) * w);
    const Real sy = Real(src.height) / Real(h);
    const Real sx = Real(src.width) / Real(w);
    for (int r = 0; r < h; ++r) {
        Real fy = (Real(r) + Real(0.5)) * sy - Real(0.5);
        fy = std::clamp(fy, Real(0), Real(src.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const Real wy = fy - Real(y0);
        for (int c = 0; c < w; ++c) {
            Real fx = (Real(c) + Real(0.5)) * sx - Real(0.5);
            fx = std::clamp(fx, Real(0), Real(src.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const Real wx = fx - Real(x0);
            const Real top = src.at(y0, x0) * (1 - wx) + src.at(y0, x1) * wx;
            const Real bot = src.at(y1, x0) * (1 - wx) + src.at(y1, x1) * wx;
            out[static_cast<std::size_t>(r) * w + c] = top * (1 - wy) + bot * wy;
        }
    }
    return GrayMap::from_values(h, w, std::move(out));
}

} // namespace sinet
