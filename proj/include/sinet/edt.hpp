#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "sinet/common.hpp"

namespace sinet {

// Exact Euclidean distance transform on a binary mask, with the index of the
// nearest foreground pixel. Ties are broken toward the smallest column, then
// the smallest row, and the same rule is applied by every consumer so that
// propagated values are reproducible across implementations.
struct EdtResult {
    int height = 0;
    int width = 0;
    std::vector<Real> dist;     // Euclidean distance to nearest foreground
    std::vector<int> nearest;   // row-major index of that pixel, -1 if none
};

inline EdtResult distance_transform(const std::vector<std::uint8_t>& fg, int h, int w) {
    require(h > 0 && w > 0, ErrorKind::Shape, "distance_transform: empty grid");
    require(fg.size() == static_cast<std::size_t>(h) * w, ErrorKind::Shape,
            "distance_transform: mask size does not match dims");

    EdtResult out;
    out.height = h;
    out.width = w;
    out.dist.assign(fg.size(), 0);
    out.nearest.assign(fg.size(), -1);

    const std::int64_t kNone = -1;

    // per-column pass: nearest foreground row within the column
    std::vector<std::int64_t> col_d2(fg.size());
    std::vector<int> col_row(fg.size());
    for (int c = 0; c < w; ++c) {
        int last = -1;
        for (int r = 0; r < h; ++r) {
            const std::size_t i = static_cast<std::size_t>(r) * w + c;
            if (fg[i]) last = r;
            col_row[i] = last;
            col_d2[i] = last < 0 ? kNone : static_cast<std::int64_t>(r - last) * (r - last);
        }
        int next = -1;
        for (int r = h - 1; r >= 0; --r) {
            const std::size_t i = static_cast<std::size_t>(r) * w + c;
            if (fg[i]) next = r;
            if (next < 0) continue;
            const std::int64_t d2 = static_cast<std::int64_t>(next - r) * (next - r);
            // strict improvement keeps the smaller row on equal distance
            if (col_d2[i] == kNone || d2 < col_d2[i]) {
                col_d2[i] = d2;
                col_row[i] = next;
            }
        }
    }

    // per-row pass: lower envelope of parabolas rooted at columns that hold a
    // foreground pixel somewhere; envelope boundaries are kept as exact
    // rationals so equal-distance candidates resolve to the smaller column
    std::vector<int> site(w);
    std::vector<std::int64_t> site_f(w);
    std::vector<int> hull(w);
    std::vector<std::int64_t> bound_n(w + 1), bound_d(w + 1);
    for (int r = 0; r < h; ++r) {
        const std::size_t row0 = static_cast<std::size_t>(r) * w;
        int ns = 0;
        for (int c = 0; c < w; ++c)
            if (col_d2[row0 + c] != kNone) {
                site[ns] = c;
                site_f[ns] = col_d2[row0 + c];
                ++ns;
            }
        if (ns == 0) {
            for (int c = 0; c < w; ++c) {
                out.dist[row0 + c] = std::numeric_limits<Real>::infinity();
                out.nearest[row0 + c] = -1;
            }
            continue;
        }

        int k = 0;
        hull[0] = 0;
        bound_n[0] = std::numeric_limits<std::int64_t>::min() / 4;
        bound_d[0] = 1;
        for (int s = 1; s < ns; ++s) {
            const std::int64_t q = site[s];
            const std::int64_t fq = site_f[s] + q * q;
            while (true) {
                const std::int64_t v = site[hull[k]];
                const std::int64_t fv = site_f[hull[k]] + v * v;
                // intersection of parabola s with parabola hull[k]
                const std::int64_t num = fq - fv;
                const std::int64_t den = 2 * (q - v);
                // pop while the new parabola takes over at or before the
                // previous boundary: num/den <= bound_n[k]/bound_d[k]
                if (k > 0 && num * bound_d[k] <= bound_n[k] * den) {
                    --k;
                    continue;
                }
                ++k;
                hull[k] = s;
                bound_n[k] = num;
                bound_d[k] = den;
                break;
            }
        }

        int j = 0;
        for (int c = 0; c < w; ++c) {
            // advance while the next boundary is strictly left of c, so a
            // query exactly on a boundary stays with the earlier column
            while (j < k && bound_n[j + 1] < static_cast<std::int64_t>(c) * bound_d[j + 1]) ++j;
            const int bc = site[hull[j]];
            const std::int64_t dx = static_cast<std::int64_t>(c) - bc;
            const std::int64_t d2 = site_f[hull[j]] + dx * dx;
            out.dist[row0 + c] = std::sqrt(static_cast<Real>(d2));
            out.nearest[row0 + c] = col_row[row0 + bc] * w + bc;
        }
    }
    return out;
}

} // namespace sinet
