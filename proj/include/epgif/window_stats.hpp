#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "epgif/errors.hpp"
#include "epgif/image.hpp"

namespace epgif {

// Windowed statistics over square windows of radius r, computed in O(N) with
// prefix sums. Windows are truncated at the image border: a pixel near an edge
// averages only the pixels that exist, and every normalization divides by the
// true count of valid pixels, which is the product of the per-axis counts.

/// Number of valid window samples along one axis at index i of an axis of
/// length n with window radius r.
inline int axis_count(int i, int n, int r) {
    return std::min(i + r, n - 1) - std::max(i - r, 0) + 1;
}

/// Sum over the truncated window of every pixel, exact O(N) via one
/// horizontal and one vertical prefix-sum pass.
inline ImagePlane box_sum(const ImagePlane& p, int radius) {
    if (radius < 0)
        throw ParamError("box_sum: radius must be >= 0");
    const int w = p.width;
    const int h = p.height;

    ImagePlane horiz(w, h, 0.0, p.dynamic_range);
    std::vector<double> prefix(static_cast<std::size_t>(w) + 1);
    for (int y = 0; y < h; ++y) {
        const double* row = p.data.data() + static_cast<std::size_t>(y) * w;
        double* out = horiz.data.data() + static_cast<std::size_t>(y) * w;
        prefix[0] = 0.0;
        for (int x = 0; x < w; ++x)
            prefix[x + 1] = prefix[x] + row[x];
        for (int x = 0; x < w; ++x) {
            const int lo = std::max(x - radius, 0);
            const int hi = std::min(x + radius, w - 1);
            out[x] = prefix[hi + 1] - prefix[lo];
        }
    }

    // Column prefixes stored row-major so both sweeps stay cache-friendly.
    std::vector<double> vprefix(static_cast<std::size_t>(h + 1) * w, 0.0);
    for (int y = 0; y < h; ++y) {
        const double* in = horiz.data.data() + static_cast<std::size_t>(y) * w;
        const double* above = vprefix.data() + static_cast<std::size_t>(y) * w;
        double* below = vprefix.data() + static_cast<std::size_t>(y + 1) * w;
        for (int x = 0; x < w; ++x)
            below[x] = above[x] + in[x];
    }
    ImagePlane out(w, h, 0.0, p.dynamic_range);
    for (int y = 0; y < h; ++y) {
        const int lo = std::max(y - radius, 0);
        const int hi = std::min(y + radius, h - 1);
        const double* top = vprefix.data() + static_cast<std::size_t>(lo) * w;
        const double* bot = vprefix.data() + static_cast<std::size_t>(hi + 1) * w;
        double* orow = out.data.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x)
            orow[x] = bot[x] - top[x];
    }
    return out;
}

namespace detail {

/// Unevaluated double-double sum: value is hi + lo with |lo| <= ulp(hi).
struct CompensatedSum {
    double hi = 0.0;
    double lo = 0.0;
};

/// Error-free addition (Knuth two-sum): hi + lo == a + b exactly.
inline CompensatedSum two_sum(double a, double b) {
    const double s = a + b;
    const double bb = s - a;
    return {s, (a - (s - bb)) + (b - bb)};
}

inline CompensatedSum comp_add(CompensatedSum a, double b) {
    CompensatedSum s = two_sum(a.hi, b);
    s.lo += a.lo;
    return two_sum(s.hi, s.lo);
}

inline CompensatedSum comp_add(CompensatedSum a, CompensatedSum b) {
    CompensatedSum s = two_sum(a.hi, b.hi);
    s.lo += a.lo + b.lo;
    return two_sum(s.hi, s.lo);
}

inline CompensatedSum comp_sub(CompensatedSum a, CompensatedSum b) {
    return comp_add(a, CompensatedSum{-b.hi, -b.lo});
}

} // namespace detail

/// box_sum with compensated (double-double) prefix sums. Same O(N) cost
/// model and truncated-window semantics, but window sums keep roughly
/// squared-double precision relative to the prefix totals. Use this when the
/// summed field spans a huge dynamic range -- e.g. exp(-M) aggregation
/// weights, where a window of vanishing values next to order-one values
/// would otherwise dissolve into prefix-difference cancellation noise far
/// larger than the true window sum. Exact zeros stay exact, so anchored
/// callers keep their bitwise identities.
inline ImagePlane box_sum_compensated(const ImagePlane& p, int radius) {
    if (radius < 0)
        throw ParamError("box_sum_compensated: radius must be >= 0");
    using detail::CompensatedSum;
    const int w = p.width;
    const int h = p.height;

    std::vector<CompensatedSum> horiz(static_cast<std::size_t>(w) * h);
    std::vector<CompensatedSum> prefix(static_cast<std::size_t>(w) + 1);
    for (int y = 0; y < h; ++y) {
        const double* row = p.data.data() + static_cast<std::size_t>(y) * w;
        CompensatedSum* out = horiz.data() + static_cast<std::size_t>(y) * w;
        prefix[0] = CompensatedSum{};
        for (int x = 0; x < w; ++x)
            prefix[x + 1] = detail::comp_add(prefix[x], row[x]);
        for (int x = 0; x < w; ++x) {
            const int lo = std::max(x - radius, 0);
            const int hi = std::min(x + radius, w - 1);
            out[x] = detail::comp_sub(prefix[hi + 1], prefix[lo]);
        }
    }

    std::vector<CompensatedSum> vprefix(static_cast<std::size_t>(h + 1) * w);
    for (int y = 0; y < h; ++y) {
        const CompensatedSum* in = horiz.data() + static_cast<std::size_t>(y) * w;
        const CompensatedSum* above = vprefix.data() + static_cast<std::size_t>(y) * w;
        CompensatedSum* below = vprefix.data() + static_cast<std::size_t>(y + 1) * w;
        for (int x = 0; x < w; ++x)
            below[x] = detail::comp_add(above[x], in[x]);
    }
    ImagePlane out(w, h, 0.0, p.dynamic_range);
    for (int y = 0; y < h; ++y) {
        const int lo = std::max(y - radius, 0);
        const int hi = std::min(y + radius, h - 1);
        const CompensatedSum* top = vprefix.data() + static_cast<std::size_t>(lo) * w;
        const CompensatedSum* bot = vprefix.data() + static_cast<std::size_t>(hi + 1) * w;
        double* orow = out.data.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            const CompensatedSum s = detail::comp_sub(bot[x], top[x]);
            orow[x] = s.hi + s.lo;
        }
    }
    return out;
}

/// Mean over the truncated window. Computed on deviations from an anchor
/// value so that a constant input returns the same constant bit-for-bit:
/// the deviations are exactly zero, their prefix sums stay exactly zero,
/// and anchor + 0/count reproduces the anchor.
inline ImagePlane box_mean(const ImagePlane& p, int radius) {
    if (radius < 0)
        throw ParamError("box_mean: radius must be >= 0");
    if (radius == 0)
        return p;
    const double anchor = p.data.empty() ? 0.0 : p.data[0];
    ImagePlane dev = p;
    for (double& v : dev.data)
        v -= anchor;
    ImagePlane sums = box_sum(dev, radius);
    ImagePlane out(p.width, p.height, 0.0, p.dynamic_range);
    for (int y = 0; y < p.height; ++y) {
        const double cy = axis_count(y, p.height, radius);
        const double* srow = sums.data.data() + static_cast<std::size_t>(y) * p.width;
        double* orow = out.data.data() + static_cast<std::size_t>(y) * p.width;
        for (int x = 0; x < p.width; ++x) {
            const double count = cy * axis_count(x, p.width, radius);
            orow[x] = anchor + srow[x] / count;
        }
    }
    return out;
}

/// First and second windowed moments of a filter input X and guidance G.
/// Variances are clamped at zero; the covariance is left unclamped.
struct WindowStats {
    ImagePlane mean_X;
    ImagePlane mean_G;
    ImagePlane var_X;
    ImagePlane var_G;
    ImagePlane cov_GX;
    int radius = 0;
};

inline WindowStats window_stats(const ImagePlane& X, const ImagePlane& G,
                                int radius) {
    require_same_shape(X, G, "window_stats");
    WindowStats s;
    s.radius = radius;
    s.mean_X = box_mean(X, radius);
    s.mean_G = box_mean(G, radius);
    const ImagePlane mean_XX = box_mean(hadamard(X, X), radius);
    const ImagePlane mean_GG = box_mean(hadamard(G, G), radius);
    const ImagePlane mean_GX = box_mean(hadamard(G, X), radius);
    s.var_X = ImagePlane(X.width, X.height, 0.0, X.dynamic_range);
    s.var_G = ImagePlane(X.width, X.height, 0.0, X.dynamic_range);
    s.cov_GX = ImagePlane(X.width, X.height, 0.0, X.dynamic_range);
    for (std::size_t i = 0; i < X.data.size(); ++i) {
        s.var_X.data[i] =
            std::max(0.0, mean_XX.data[i] - s.mean_X.data[i] * s.mean_X.data[i]);
        s.var_G.data[i] =
            std::max(0.0, mean_GG.data[i] - s.mean_G.data[i] * s.mean_G.data[i]);
        s.cov_GX.data[i] =
            mean_GX.data[i] - s.mean_G.data[i] * s.mean_X.data[i];
    }
    return s;
}

/// Windowed variance of a single plane (clamped at zero).
inline ImagePlane local_variance(const ImagePlane& p, int radius) {
    const ImagePlane mean = box_mean(p, radius);
    const ImagePlane mean_sq = box_mean(hadamard(p, p), radius);
    ImagePlane out(p.width, p.height, 0.0, p.dynamic_range);
    for (std::size_t i = 0; i < p.data.size(); ++i)
        out.data[i] = std::max(0.0, mean_sq.data[i] - mean.data[i] * mean.data[i]);
    return out;
}

/// Windowed standard deviation of a single plane.
inline ImagePlane local_stddev(const ImagePlane& p, int radius) {
    ImagePlane out = local_variance(p, radius);
    for (double& v : out.data)
        v = std::sqrt(v);
    return out;
}

} // namespace epgif
