#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include "epgif/baseline_filters.hpp"
#include "epgif/errors.hpp"
#include "epgif/image.hpp"
#include "epgif/window_stats.hpp"

namespace epgif {

// Edge-perceptual guided filter. On top of the shared local linear model it
// adds, per pixel:
//
//   psi   edge-aware regularizer weighting built from the product of
//         fine-scale and window-scale guidance variances
//   tau   edge-protect constraint in [0, 1]: a piecewise-mapped tanh of the
//         edge response that pins the slope a to 1 on salient edges
//   eta   residual constraint 1 - tau, weighting the data term
//   w     aggregation weight exp(-M), M the scaled mean squared residual of
//         the window's linear fit, so badly fitting windows lose influence
//
// The slope and offset are then combined over each window by a w-weighted
// mean instead of the plain box mean.

/// How the edge response alpha is derived from the weighting phi.
enum class RhoMode {
    /// alpha = phi.
    Unit,
    /// alpha = phi * |G - window mean of G| / L, emphasizing brightness
    /// differences of the guidance.
    LuminanceContrast,
};

struct EpgifParams {
    int radius_zeta = 16;
    double lambda = 0.01;
    /// Edge-protect floor of the tanh mapping; must stay in (0, 0.5). Values
    /// in [0.1, 0.45] behave well.
    double c = 0.35;
    /// Residual-weight temperature.
    double beta = 1.0 / 500.0;
    /// Weighting regularizer; defaults to (0.001 * L)^2 when unset.
    std::optional<double> epsilon;
    RhoMode rho_mode = RhoMode::Unit;
    /// Flips the aggregation-weight exponent from exp(-M) to exp(+M), making
    /// badly fitting windows dominate. Off by default; kept for comparison.
    bool positive_weight_exponent = false;
};

inline void validate_params(const EpgifParams& p) {
    if (p.radius_zeta < 1)
        throw ParamError("radius_zeta must be >= 1");
    if (!(p.lambda > 0.0))
        throw ParamError("lambda must be positive");
    if (!(p.c > 0.0 && p.c < 0.5))
        throw ParamError("c must lie strictly between 0 and 0.5");
    if (!(p.beta > 0.0))
        throw ParamError("beta must be positive");
    if (p.epsilon && !(*p.epsilon > 0.0))
        throw ParamError("epsilon must be positive");
}

/// Edge-aware weighting state: local variances at radius 1 and zeta, their
/// image-wide mean standard deviations, the raw edge response phi and the
/// normalized weighting psi (strictly positive).
struct EdgeWeightField {
    ImagePlane sigma2_1;
    ImagePlane sigma2_zeta;
    double sbar_1 = 0.0;
    double sbar_zeta = 0.0;
    ImagePlane phi;
    ImagePlane psi;
    int radius = 0;
};

/// Edge-protect state: the response alpha, the constraint tau in [0, 1] and
/// its complement eta = 1 - tau.
struct ConstraintField {
    ImagePlane alpha;
    ImagePlane tau;
    ImagePlane eta;
};

/// Linear-model state: per-pixel coefficients a, b, the aggregation weight w
/// and the weighted window means a_bar, b_bar.
struct AggregationField {
    ImagePlane a;
    ImagePlane b;
    ImagePlane w;
    ImagePlane a_bar;
    ImagePlane b_bar;
    int radius = 0;
};

/// Fills sigma2_*, sbar_* and phi = sigma2_1 * sigma2_zeta / (sbar_1 *
/// sbar_zeta). A constant guidance (either sbar zero) yields phi = 0.
/// psi is left empty.
inline EdgeWeightField compute_phi(const ImagePlane& G, int radius) {
    if (radius < 1)
        throw ParamError("compute_phi: radius must be >= 1");
    EdgeWeightField f;
    f.radius = radius;
    f.sigma2_1 = local_variance(G, 1);
    f.sigma2_zeta = local_variance(G, radius);
    double sum_1 = 0.0;
    double sum_z = 0.0;
    for (std::size_t i = 0; i < f.sigma2_1.data.size(); ++i) {
        sum_1 += std::sqrt(f.sigma2_1.data[i]);
        sum_z += std::sqrt(f.sigma2_zeta.data[i]);
    }
    const double n = static_cast<double>(f.sigma2_1.data.size());
    f.sbar_1 = sum_1 / n;
    f.sbar_zeta = sum_z / n;
    f.phi = ImagePlane(G.width, G.height, 0.0, G.dynamic_range);
    const double denom = f.sbar_1 * f.sbar_zeta;
    if (denom > 0.0)
        for (std::size_t i = 0; i < f.phi.data.size(); ++i)
            f.phi.data[i] = f.sigma2_1.data[i] * f.sigma2_zeta.data[i] / denom;
    return f;
}

/// Completes the field with psi(p) = (phi(p)+eps) * mean(1/(phi+eps)):
/// one pass for the global sum of reciprocals, one for the product.
inline EdgeWeightField compute_psi(const ImagePlane& G, int radius,
                                   double epsilon) {
    if (!(epsilon > 0.0))
        throw ParamError("compute_psi: epsilon must be positive");
    EdgeWeightField f = compute_phi(G, radius);
    f.psi = detail::normalized_weighting(f.phi, epsilon);
    return f;
}

/// Maps the edge response onto the protect constraint tau via a tanh curve
/// centered on the response mean and scaled by (mean - min), then the
/// piecewise remap that sends the tanh range onto [0, 1] with value c at the
/// mean. A constant response has no edges to protect: tau = 0, eta = 1.
inline ConstraintField compute_tau(const ImagePlane& G,
                                   const EdgeWeightField& field, double c,
                                   RhoMode rho_mode) {
    if (!(c > 0.0 && c < 0.5))
        throw ParamError("compute_tau: c must lie strictly between 0 and 0.5");
    ConstraintField cf;
    cf.alpha = field.phi;
    if (rho_mode == RhoMode::LuminanceContrast) {
        require_same_shape(G, field.phi, "compute_tau");
        const ImagePlane mu_G = box_mean(G, field.radius);
        const double L = G.dynamic_range;
        for (std::size_t i = 0; i < cf.alpha.data.size(); ++i)
            cf.alpha.data[i] *= std::abs(G.data[i] - mu_G.data[i]) / L;
    }
    const double mu = plane_mean(cf.alpha);
    const double mn = plane_min(cf.alpha);
    cf.tau = ImagePlane(cf.alpha.width, cf.alpha.height, 0.0,
                        cf.alpha.dynamic_range);
    cf.eta = cf.tau;
    if (mu == mn) {
        std::fill(cf.eta.data.begin(), cf.eta.data.end(), 1.0);
        return cf;
    }
    const double scale = 2.0 / (mu - mn);
    for (std::size_t i = 0; i < cf.alpha.data.size(); ++i) {
        // raw value = 0.5*t + c; the piecewise branches raw <= 0 and
        // raw >= c reduce to t <= -2c and t >= 0. Writing the upper branch
        // as c + (1-c)*t keeps the endpoints exact: t = 0 gives c and
        // t = 1 gives 1 in floating point (1-c is exact for c < 0.5).
        const double t = std::tanh(scale * (cf.alpha.data[i] - mu));
        double tau;
        if (t <= -2.0 * c)
            tau = 0.0;
        else if (t >= 0.0)
            tau = c + (1.0 - c) * t;
        else
            tau = 0.5 * t + c;
        tau = std::clamp(tau, 0.0, 1.0);
        cf.tau.data[i] = tau;
        cf.eta.data[i] = 1.0 - tau;
    }
    return cf;
}

/// a = (eta*cov + (lambda/psi)*tau) / (eta*var_G + lambda/psi),
/// b = mean_X - a*mean_G. Where tau = 1 the slope is exactly 1 for any
/// lambda; the strictly positive lambda/psi keeps the quotient finite even
/// where eta = 0.
inline AggregationField epgif_coeffs(const WindowStats& stats,
                                     const ConstraintField& cons,
                                     const ImagePlane& psi, double lambda) {
    if (!(lambda > 0.0))
        throw ParamError("epgif_coeffs: lambda must be positive");
    const int w = stats.mean_X.width;
    const int h = stats.mean_X.height;
    AggregationField f;
    f.radius = stats.radius;
    f.a = ImagePlane(w, h, 0.0, stats.mean_X.dynamic_range);
    f.b = f.a;
    for (std::size_t i = 0; i < f.a.data.size(); ++i) {
        const double q = lambda / psi.data[i];
        const double eta = cons.eta.data[i];
        const double a = (eta * stats.cov_GX.data[i] + q * cons.tau.data[i]) /
                         (eta * stats.var_G.data[i] + q);
        f.a.data[i] = a;
        f.b.data[i] = stats.mean_X.data[i] - a * stats.mean_G.data[i];
    }
    return f;
}

/// Adds the aggregation weight w = exp(-M) with
/// M = [eta^2*(var_X - a^2*var_G) - 2a(a-tau)*(lambda/psi)*eta] / beta,
/// which equals the window's mean squared residual eta^2 * mean((aG+b-X)^2)
/// scaled by 1/beta, hence M >= 0 up to rounding. M is clamped to [0, 700]
/// before exponentiation so w stays finite and positive either way.
inline AggregationField residual_weight(AggregationField field,
                                        const ConstraintField& cons,
                                        const WindowStats& stats,
                                        const ImagePlane& psi, double lambda,
                                        double beta,
                                        bool positive_exponent = false) {
    if (!(beta > 0.0))
        throw ParamError("residual_weight: beta must be positive");
    field.w = ImagePlane(field.a.width, field.a.height, 0.0,
                         field.a.dynamic_range);
    for (std::size_t i = 0; i < field.w.data.size(); ++i) {
        const double a = field.a.data[i];
        const double eta = cons.eta.data[i];
        const double q = lambda / psi.data[i];
        double m = (eta * eta *
                        (stats.var_X.data[i] - a * a * stats.var_G.data[i]) -
                    2.0 * a * (a - cons.tau.data[i]) * q * eta) /
                   beta;
        m = std::clamp(m, 0.0, 700.0);
        field.w.data[i] = std::exp(positive_exponent ? m : -m);
    }
    return field;
}

/// Adds a_bar, b_bar: w-weighted means of a and b over the truncated window,
/// three box sums and one division. Computed on deviations from an anchor so
/// constant coefficient planes aggregate to themselves exactly.
inline AggregationField weighted_aggregate(AggregationField field, int radius) {
    if (radius < 0)
        throw ParamError("weighted_aggregate: radius must be >= 0");
    const int w = field.a.width;
    const int h = field.a.height;
    const double anchor_a = field.a.data.empty() ? 0.0 : field.a.data[0];
    const double anchor_b = field.b.data.empty() ? 0.0 : field.b.data[0];
    ImagePlane wa(w, h, 0.0, field.a.dynamic_range);
    ImagePlane wb = wa;
    for (std::size_t i = 0; i < wa.data.size(); ++i) {
        wa.data[i] = field.w.data[i] * (field.a.data[i] - anchor_a);
        wb.data[i] = field.w.data[i] * (field.b.data[i] - anchor_b);
    }
    // The weights span the full exp([-700, 0]) range, so plain
    // prefix-difference sums would bury windows of tiny weights under
    // cancellation noise from order-one neighbors; the compensated sums keep
    // the numerator/denominator ratio accurate there.
    const ImagePlane num_a = box_sum_compensated(wa, radius);
    const ImagePlane num_b = box_sum_compensated(wb, radius);
    const ImagePlane den = box_sum_compensated(field.w, radius);
    field.a_bar = ImagePlane(w, h, 0.0, field.a.dynamic_range);
    field.b_bar = field.a_bar;
    for (std::size_t i = 0; i < den.data.size(); ++i) {
        field.a_bar.data[i] = anchor_a + num_a.data[i] / den.data[i];
        field.b_bar.data[i] = anchor_b + num_b.data[i] / den.data[i];
    }
    return field;
}

namespace detail {

inline AggregationField epgif_fields(const ImagePlane& X, const ImagePlane& G,
                                     const EpgifParams& params,
                                     EdgeWeightField* out_field = nullptr,
                                     ConstraintField* out_cons = nullptr) {
    validate_params(params);
    require_same_shape(X, G, "epgif_filter");
    const double eps = resolve_epsilon(params.epsilon, G.dynamic_range);
    const WindowStats stats = window_stats(X, G, params.radius_zeta);
    EdgeWeightField field = compute_psi(G, params.radius_zeta, eps);
    ConstraintField cons = compute_tau(G, field, params.c, params.rho_mode);
    AggregationField agg = epgif_coeffs(stats, cons, field.psi, params.lambda);
    agg = residual_weight(std::move(agg), cons, stats, field.psi, params.lambda,
                          params.beta, params.positive_weight_exponent);
    agg = weighted_aggregate(std::move(agg), params.radius_zeta);
    if (out_field)
        *out_field = std::move(field);
    if (out_cons)
        *out_cons = std::move(cons);
    return agg;
}

} // namespace detail

/// Full filter: windowed stats, edge weighting, protect constraint,
/// coefficients, residual weights, weighted aggregation, then
/// R = a_bar * G + b_bar. O(N) total, independent of the radius.
inline ImagePlane epgif_filter(const ImagePlane& X, const ImagePlane& G,
                               const EpgifParams& params) {
    const AggregationField agg = detail::epgif_fields(X, G, params);
    ImagePlane out(G.width, G.height, 0.0, G.dynamic_range);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = agg.a_bar.data[i] * G.data[i] + agg.b_bar.data[i];
    return out;
}

/// Intermediate fields of one filter run, raw plus min-max normalized copies
/// for visualization.
struct EpgifDiagnostics {
    ImagePlane psi;
    ImagePlane tau;
    ImagePlane eta;
    ImagePlane w;
    ImagePlane a_bar;
    ImagePlane psi_vis;
    ImagePlane tau_vis;
    ImagePlane eta_vis;
    ImagePlane w_vis;
    ImagePlane a_bar_vis;
};

inline EpgifDiagnostics dump_diagnostics(const ImagePlane& G,
                                         const ImagePlane& X,
                                         const EpgifParams& params) {
    EdgeWeightField field;
    ConstraintField cons;
    AggregationField agg = detail::epgif_fields(X, G, params, &field, &cons);
    EpgifDiagnostics d;
    d.psi = std::move(field.psi);
    d.tau = std::move(cons.tau);
    d.eta = std::move(cons.eta);
    d.w = std::move(agg.w);
    d.a_bar = std::move(agg.a_bar);
    d.psi_vis = minmax_normalize(d.psi);
    d.tau_vis = minmax_normalize(d.tau);
    d.eta_vis = minmax_normalize(d.eta);
    d.w_vis = minmax_normalize(d.w);
    d.a_bar_vis = minmax_normalize(d.a_bar);
    return d;
}

} // namespace epgif
