#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "epgif/errors.hpp"
#include "epgif/image.hpp"
#include "epgif/window_stats.hpp"

namespace epgif {

// Guided filtering family that fits a local linear model R = a*G + b in each
// window, differing only in how the regularizer is weighted per pixel:
//
//   gif_filter   constant regularizer lambda
//   wgif_filter  lambda / Phi, Phi from radius-1 variance of the guidance
//   ggif_filter  lambda / Phi with Phi from a variance product, plus a
//                sigmoid-mapped target gamma that pulls a toward edges
//
// All variants share the O(N) windowed statistics and mean aggregation.

/// Parameters shared by the three baseline variants. `epsilon` defaults to
/// (0.001 * L)^2 when unset, resolved against the guidance dynamic range.
struct BaselineParams {
    int radius_zeta = 16;
    double lambda = 0.01;
    std::optional<double> epsilon;
};

inline double resolve_epsilon(const std::optional<double>& epsilon, double L) {
    if (epsilon) {
        if (!(*epsilon > 0.0))
            throw ParamError("epsilon must be positive");
        return *epsilon;
    }
    const double e = 0.001 * L;
    return e * e;
}

inline void validate_params(const BaselineParams& p) {
    if (p.radius_zeta < 1)
        throw ParamError("radius_zeta must be >= 1");
    if (!(p.lambda > 0.0))
        throw ParamError("lambda must be positive");
    if (p.epsilon && !(*p.epsilon > 0.0))
        throw ParamError("epsilon must be positive");
}

/// Per-pixel linear model coefficients before window aggregation.
struct CoefficientField {
    ImagePlane a;
    ImagePlane b;
    int radius = 0;
};

namespace detail {

/// Edge-aware weighting shared by WGIF and GGIF: each value is the ratio of
/// local activity to the image-wide harmonic mean of activity, so the
/// reciprocals average to exactly 1. Values sit above 1 on edges and below 1
/// in flat areas; a constant plane maps to all ones. `activity` is a
/// per-pixel edge response (a variance or variance product).
inline ImagePlane normalized_weighting(const ImagePlane& activity, double epsilon) {
    double inv_sum = 0.0;
    for (double v : activity.data)
        inv_sum += 1.0 / (v + epsilon);
    const double inv_mean = inv_sum / static_cast<double>(activity.data.size());
    ImagePlane out = activity;
    for (double& v : out.data)
        v = (v + epsilon) * inv_mean;
    return out;
}

/// a = (cov + s*gamma) / (var + s) with s = lambda / weighting (or lambda
/// itself when no weighting is given); b = mean_X - a * mean_G.
inline CoefficientField linear_coeffs(const WindowStats& st, double lambda,
                                      const ImagePlane* weighting,
                                      const ImagePlane* gamma) {
    const int w = st.mean_X.width;
    const int h = st.mean_X.height;
    CoefficientField f;
    f.radius = st.radius;
    f.a = ImagePlane(w, h, 0.0, st.mean_X.dynamic_range);
    f.b = ImagePlane(w, h, 0.0, st.mean_X.dynamic_range);
    for (std::size_t i = 0; i < f.a.data.size(); ++i) {
        const double s = weighting ? lambda / weighting->data[i] : lambda;
        const double num =
            st.cov_GX.data[i] + (gamma ? s * gamma->data[i] : 0.0);
        const double a = num / (st.var_G.data[i] + s);
        f.a.data[i] = a;
        f.b.data[i] = st.mean_X.data[i] - a * st.mean_G.data[i];
    }
    return f;
}

/// R = a_bar * G + b_bar after mean aggregation of the coefficients.
inline ImagePlane render_linear_model(const ImagePlane& G,
                                      const CoefficientField& f) {
    const ImagePlane a_bar = box_mean(f.a, f.radius);
    const ImagePlane b_bar = box_mean(f.b, f.radius);
    ImagePlane out(G.width, G.height, 0.0, G.dynamic_range);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = a_bar.data[i] * G.data[i] + b_bar.data[i];
    return out;
}

} // namespace detail

/// WGIF per-pixel weighting: (sigma2_{G,1} + eps) * mean(1/(sigma2_{G,1} + eps)).
inline ImagePlane wgif_weighting(const ImagePlane& G, double epsilon) {
    if (!(epsilon > 0.0))
        throw ParamError("wgif_weighting: epsilon must be positive");
    return detail::normalized_weighting(local_variance(G, 1), epsilon);
}

/// GGIF per-pixel weighting built on chi = sigma_{G,1} * sigma_{G,zeta}.
inline ImagePlane ggif_weighting(const ImagePlane& G, int radius_zeta,
                                 double epsilon) {
    if (radius_zeta < 1)
        throw ParamError("ggif_weighting: radius_zeta must be >= 1");
    if (!(epsilon > 0.0))
        throw ParamError("ggif_weighting: epsilon must be positive");
    const ImagePlane chi = hadamard(local_stddev(G, 1), local_stddev(G, radius_zeta));
    return detail::normalized_weighting(chi, epsilon);
}

/// GGIF slope target: a sigmoid of the edge-activity plane chi, centered on
/// chi's image mean with slope 4 / (mean - min). Exactly 0.5 where chi equals
/// its mean, near 1 on strong edges, near 0 at the minimum. A constant chi
/// degenerates to 0.5 everywhere.
inline ImagePlane ggif_gamma(const ImagePlane& chi) {
    const double mu = plane_mean(chi);
    const double mn = plane_min(chi);
    ImagePlane out = chi;
    // A constant plane is detected by min == max rather than mean == min:
    // the serial mean can land an ulp away from the common value, which
    // would otherwise blow up the 4 / (mean - min) scale.
    if (mn == plane_max(chi) || mu == mn) {
        std::fill(out.data.begin(), out.data.end(), 0.5);
        return out;
    }
    const double scale = 4.0 / (mu - mn);
    for (double& v : out.data)
        v = 1.0 - 1.0 / (1.0 + std::exp(scale * (v - mu)));
    return out;
}

inline CoefficientField gif_coeffs(const ImagePlane& X, const ImagePlane& G,
                                   const BaselineParams& params) {
    validate_params(params);
    require_same_shape(X, G, "gif_filter");
    return detail::linear_coeffs(window_stats(X, G, params.radius_zeta),
                                 params.lambda, nullptr, nullptr);
}

inline CoefficientField wgif_coeffs(const ImagePlane& X, const ImagePlane& G,
                                    const BaselineParams& params) {
    validate_params(params);
    require_same_shape(X, G, "wgif_filter");
    const double eps = resolve_epsilon(params.epsilon, G.dynamic_range);
    const ImagePlane phi = wgif_weighting(G, eps);
    return detail::linear_coeffs(window_stats(X, G, params.radius_zeta),
                                 params.lambda, &phi, nullptr);
}

inline CoefficientField ggif_coeffs(const ImagePlane& X, const ImagePlane& G,
                                    const BaselineParams& params) {
    validate_params(params);
    require_same_shape(X, G, "ggif_filter");
    const double eps = resolve_epsilon(params.epsilon, G.dynamic_range);
    const ImagePlane chi =
        hadamard(local_stddev(G, 1), local_stddev(G, params.radius_zeta));
    const ImagePlane phi = detail::normalized_weighting(chi, eps);
    const ImagePlane gamma = ggif_gamma(chi);
    return detail::linear_coeffs(window_stats(X, G, params.radius_zeta),
                                 params.lambda, &phi, &gamma);
}

inline ImagePlane gif_filter(const ImagePlane& X, const ImagePlane& G,
                             const BaselineParams& params) {
    return detail::render_linear_model(G, gif_coeffs(X, G, params));
}

inline ImagePlane wgif_filter(const ImagePlane& X, const ImagePlane& G,
                              const BaselineParams& params) {
    return detail::render_linear_model(G, wgif_coeffs(X, G, params));
}

inline ImagePlane ggif_filter(const ImagePlane& X, const ImagePlane& G,
                              const BaselineParams& params) {
    return detail::render_linear_model(G, ggif_coeffs(X, G, params));
}

} // namespace epgif
