#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "epgif/epgif_filter.hpp"
#include "epgif/errors.hpp"
#include "epgif/image.hpp"

namespace epgif {

enum class FilterVariant { GIF, WGIF, GGIF, EPGIF };

// Reference implementation of all four filter variants with every windowed
// statistic evaluated by explicit double loops over the truncated window,
// including the EPGIF aggregation weights as literal windowed means of
// squared residuals. O(N * zeta^2): intended for small images in tests, as a
// fully independent check of the O(N) fast paths.

namespace oracle_detail {

template <typename F>
inline void for_window(int cx, int cy, int w, int h, int r, F&& body) {
    const int x0 = std::max(cx - r, 0);
    const int x1 = std::min(cx + r, w - 1);
    const int y0 = std::max(cy - r, 0);
    const int y1 = std::min(cy + r, h - 1);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            body(x, y);
}

inline double win_mean(const ImagePlane& img, int cx, int cy, int r) {
    double sum = 0.0;
    int n = 0;
    for_window(cx, cy, img.width, img.height, r, [&](int x, int y) {
        sum += img.at(x, y);
        ++n;
    });
    return sum / n;
}

inline double win_var(const ImagePlane& img, int cx, int cy, int r) {
    const double mean = win_mean(img, cx, cy, r);
    double sum = 0.0;
    int n = 0;
    for_window(cx, cy, img.width, img.height, r, [&](int x, int y) {
        const double d = img.at(x, y) - mean;
        sum += d * d;
        ++n;
    });
    return sum / n;
}

inline double win_cov(const ImagePlane& a, const ImagePlane& b, int cx, int cy,
                      int r) {
    const double ma = win_mean(a, cx, cy, r);
    const double mb = win_mean(b, cx, cy, r);
    double sum = 0.0;
    int n = 0;
    for_window(cx, cy, a.width, a.height, r, [&](int x, int y) {
        sum += (a.at(x, y) - ma) * (b.at(x, y) - mb);
        ++n;
    });
    return sum / n;
}

/// (value + eps) * mean(1 / (value + eps)) evaluated with plain loops.
inline ImagePlane naive_normalized_weighting(const ImagePlane& activity,
                                             double eps) {
    double inv_sum = 0.0;
    for (double v : activity.data)
        inv_sum += 1.0 / (v + eps);
    const double inv_mean = inv_sum / static_cast<double>(activity.data.size());
    ImagePlane out = activity;
    for (double& v : out.data)
        v = (v + eps) * inv_mean;
    return out;
}

} // namespace oracle_detail

inline ImagePlane naive_window_oracle(const ImagePlane& X, const ImagePlane& G,
                                      const EpgifParams& params,
                                      FilterVariant variant) {
    require_same_shape(X, G, "naive_window_oracle");
    validate_params(params);
    using namespace oracle_detail;
    const int w = X.width;
    const int h = X.height;
    const int r = params.radius_zeta;
    const double L = G.dynamic_range;
    const double eps =
        params.epsilon ? *params.epsilon : (0.001 * L) * (0.001 * L);
    const double lambda = params.lambda;

    ImagePlane a(w, h);
    ImagePlane b(w, h);
    ImagePlane tau(w, h);
    ImagePlane eta(w, h, 1.0);

    // Per-pixel regularizer weighting of the variant, if any.
    ImagePlane weighting(w, h, 1.0);
    ImagePlane gamma(w, h, 0.0);
    bool use_weighting = false;
    bool use_gamma = false;

    if (variant == FilterVariant::WGIF) {
        ImagePlane v1(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                v1.at(x, y) = win_var(G, x, y, 1);
        weighting = naive_normalized_weighting(v1, eps);
        use_weighting = true;
    } else if (variant == FilterVariant::GGIF) {
        ImagePlane chi(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                chi.at(x, y) =
                    std::sqrt(win_var(G, x, y, 1)) * std::sqrt(win_var(G, x, y, r));
        weighting = naive_normalized_weighting(chi, eps);
        use_weighting = true;
        const double mu = plane_mean(chi);
        const double mn = plane_min(chi);
        if (mu == mn) {
            std::fill(gamma.data.begin(), gamma.data.end(), 0.5);
        } else {
            for (std::size_t i = 0; i < chi.data.size(); ++i)
                gamma.data[i] =
                    1.0 -
                    1.0 / (1.0 + std::exp(4.0 * (chi.data[i] - mu) / (mu - mn)));
        }
        use_gamma = true;
    } else if (variant == FilterVariant::EPGIF) {
        ImagePlane v1(w, h);
        ImagePlane vr(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                v1.at(x, y) = win_var(G, x, y, 1);
                vr.at(x, y) = win_var(G, x, y, r);
            }
        double sbar_1 = 0.0;
        double sbar_r = 0.0;
        for (std::size_t i = 0; i < v1.data.size(); ++i) {
            sbar_1 += std::sqrt(v1.data[i]);
            sbar_r += std::sqrt(vr.data[i]);
        }
        sbar_1 /= static_cast<double>(v1.data.size());
        sbar_r /= static_cast<double>(v1.data.size());
        ImagePlane phi(w, h, 0.0);
        if (sbar_1 * sbar_r > 0.0)
            for (std::size_t i = 0; i < phi.data.size(); ++i)
                phi.data[i] = v1.data[i] * vr.data[i] / (sbar_1 * sbar_r);
        weighting = naive_normalized_weighting(phi, eps);
        use_weighting = true;

        ImagePlane alpha = phi;
        if (params.rho_mode == RhoMode::LuminanceContrast)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    alpha.at(x, y) *=
                        std::abs(G.at(x, y) - win_mean(G, x, y, r)) / L;
        const double mu = plane_mean(alpha);
        const double mn = plane_min(alpha);
        if (mu != mn) {
            for (std::size_t i = 0; i < alpha.data.size(); ++i) {
                const double raw =
                    0.5 * std::tanh(2.0 * (alpha.data[i] - mu) / (mu - mn)) +
                    params.c;
                double t;
                if (raw <= 0.0)
                    t = 0.0;
                else if (raw >= params.c)
                    t = params.c + (1.0 - params.c) * (raw - params.c) / 0.5;
                else
                    t = raw;
                tau.data[i] = std::clamp(t, 0.0, 1.0);
                eta.data[i] = 1.0 - tau.data[i];
            }
        }
    }

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double mean_G = win_mean(G, x, y, r);
            const double mean_X = win_mean(X, x, y, r);
            const double var_G = win_var(G, x, y, r);
            const double cov = win_cov(G, X, x, y, r);
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            double av;
            if (variant == FilterVariant::EPGIF) {
                const double q = lambda / weighting.data[i];
                av = (eta.data[i] * cov + q * tau.data[i]) /
                     (eta.data[i] * var_G + q);
            } else {
                const double s =
                    use_weighting ? lambda / weighting.data[i] : lambda;
                av = (cov + (use_gamma ? s * gamma.data[i] : 0.0)) / (var_G + s);
            }
            a.data[i] = av;
            b.data[i] = mean_X - av * mean_G;
        }
    }

    ImagePlane out(w, h, 0.0, G.dynamic_range);
    if (variant == FilterVariant::EPGIF) {
        ImagePlane weight(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                double sum = 0.0;
                int n = 0;
                for_window(x, y, w, h, r, [&](int px, int py) {
                    const double res =
                        eta.data[i] *
                        (a.data[i] * G.at(px, py) + b.data[i] - X.at(px, py));
                    sum += res * res;
                    ++n;
                });
                double m = std::clamp(sum / n / params.beta, 0.0, 700.0);
                weight.data[i] =
                    std::exp(params.positive_weight_exponent ? m : -m);
            }
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double wa = 0.0;
                double wb = 0.0;
                double ws = 0.0;
                for_window(x, y, w, h, r, [&](int px, int py) {
                    const std::size_t j =
                        static_cast<std::size_t>(py) * w + px;
                    wa += weight.data[j] * a.data[j];
                    wb += weight.data[j] * b.data[j];
                    ws += weight.data[j];
                });
                out.at(x, y) = (wa / ws) * G.at(x, y) + wb / ws;
            }
        }
    } else {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double a_bar = win_mean(a, x, y, r);
                const double b_bar = win_mean(b, x, y, r);
                out.at(x, y) = a_bar * G.at(x, y) + b_bar;
            }
        }
    }
    return out;
}

} // namespace epgif
