// Tests for the baseline guided-filter family: the shared constant-lambda
// filter, the variance-weighted variant, and the gradient-weighted variant
// with its sigmoid slope target. Fast paths are checked against the naive
// per-window oracle and against closed-form limits.

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "epgif/baseline_filters.hpp"
#include "epgif/oracle.hpp"
#include "test_support.hpp"

namespace {

using epgif::BaselineParams;
using epgif::EpgifParams;
using epgif::FilterVariant;
using epgif::ImagePlane;
using namespace test_support;

// Literal per-pixel evaluation of the weighting definition with the local
// factor kept inside the image-wide sum: w(p) = (1/N) sum_q (a(p)+eps) /
// (a(q)+eps). O(N^2), algebraically identical to factoring the p term out.
ImagePlane direct_normalized_weighting(const ImagePlane& activity, double eps) {
    ImagePlane out = activity;
    const double n = static_cast<double>(activity.data.size());
    for (std::size_t p = 0; p < activity.data.size(); ++p) {
        double sum = 0.0;
        for (double q : activity.data)
            sum += (activity.data[p] + eps) / (q + eps);
        out.data[p] = sum / n;
    }
    return out;
}

EpgifParams oracle_params(int zeta, double lambda) {
    EpgifParams p;
    p.radius_zeta = zeta;
    p.lambda = lambda;
    return p;
}

// chi = radius-1 stddev times radius-zeta stddev, via the public building
// blocks.
ImagePlane activity_product(const ImagePlane& G, int zeta) {
    return epgif::hadamard(epgif::local_stddev(G, 1),
                           epgif::local_stddev(G, zeta));
}

TEST(ResolveEpsilon, DefaultScalesWithDynamicRange) {
    EXPECT_DOUBLE_EQ(epgif::resolve_epsilon(std::nullopt, 1.0), 1e-6);
    EXPECT_DOUBLE_EQ(epgif::resolve_epsilon(std::nullopt, 255.0), 0.065025);
    EXPECT_EQ(epgif::resolve_epsilon(0.5, 1.0), 0.5);
}

TEST(ResolveEpsilon, RejectsNonPositiveOverride) {
    EXPECT_THROW(epgif::resolve_epsilon(0.0, 1.0), epgif::ParamError);
    EXPECT_THROW(epgif::resolve_epsilon(-1.0, 1.0), epgif::ParamError);
}

TEST(GifFilter, ConstantInputYieldsConstantOutput) {
    BaselineParams params;
    params.radius_zeta = 4;
    for (double c : {0.37, 1.0 / 3.0, 0.0}) {
        const ImagePlane X(9, 7, c);
        const ImagePlane R = epgif::gif_filter(X, X, params);
        for (double v : R.data)
            EXPECT_EQ(v, c) << "constant " << c;
    }
}

TEST(GifFilter, HugeLambdaApproachesDoubleBoxMean) {
    const ImagePlane X = random_plane(16, 16, 11);
    BaselineParams params;
    params.radius_zeta = 2;
    params.lambda = 1e9;
    const ImagePlane R = epgif::gif_filter(X, X, params);
    const ImagePlane expected =
        epgif::box_mean(epgif::box_mean(X, 2), 2);
    EXPECT_LE(max_abs_diff(R, expected), 1e-8);
}

TEST(GifFilter, TinyLambdaApproachesIdentityOnNoisyInput) {
    // Noise guarantees every window has positive variance, so the data term
    // dominates the vanishing regularizer and the filter passes X through.
    const ImagePlane X = random_plane(16, 16, 12, 0.1, 0.9);
    BaselineParams params;
    params.radius_zeta = 2;
    params.lambda = 1e-12;
    const ImagePlane R = epgif::gif_filter(X, X, params);
    EXPECT_LE(max_abs_diff(R, X), 1e-6);
}

TEST(GifFilter, MatchesNaiveOracle) {
    const ImagePlane X = random_plane(12, 12, 21);
    BaselineParams params;
    params.radius_zeta = 2;
    params.lambda = 0.01;
    const ImagePlane fast = epgif::gif_filter(X, X, params);
    const ImagePlane slow =
        epgif::naive_window_oracle(X, X, oracle_params(2, 0.01),
                                   FilterVariant::GIF);
    EXPECT_LE(max_abs_diff(fast, slow), 1e-10);
}

TEST(GifFilter, RejectsBadParams) {
    const ImagePlane X(8, 8, 0.5);
    BaselineParams params;
    params.radius_zeta = 0;
    EXPECT_THROW(epgif::gif_filter(X, X, params), epgif::ParamError);
    params.radius_zeta = 2;
    params.lambda = 0.0;
    EXPECT_THROW(epgif::gif_filter(X, X, params), epgif::ParamError);
    params.lambda = -0.5;
    EXPECT_THROW(epgif::gif_filter(X, X, params), epgif::ParamError);
    params.lambda = 0.01;
    const ImagePlane Y(8, 9, 0.5);
    EXPECT_THROW(epgif::gif_filter(X, Y, params), epgif::ShapeError);
}

TEST(WgifWeighting, ConstantGuidanceGivesAllOnes) {
    const ImagePlane G(10, 10, 0.42);
    const ImagePlane phi = epgif::wgif_weighting(G, 1e-6);
    for (double v : phi.data)
        EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(WgifWeighting, StrictlyPositiveWithUnitMeanReciprocal) {
    const ImagePlane G = random_plane(16, 16, 31);
    const ImagePlane phi = epgif::wgif_weighting(G, 1e-6);
    double recip_sum = 0.0;
    for (double v : phi.data) {
        EXPECT_GT(v, 0.0);
        recip_sum += 1.0 / v;
    }
    EXPECT_NEAR(recip_sum / static_cast<double>(phi.data.size()), 1.0, 1e-12);
}

TEST(WgifWeighting, RatioIdentityMatchesActivityRatio) {
    // The image-wide normalizer is a common factor, so weighting ratios must
    // equal ratios of the shifted activities.
    const double eps = 1e-6;
    const ImagePlane G = random_plane(12, 12, 32);
    const ImagePlane var1 = epgif::local_variance(G, 1);
    const ImagePlane phi = epgif::wgif_weighting(G, eps);
    const std::size_t p = 5, q = 100;
    const double lhs = phi.data[p] / phi.data[q];
    const double rhs = (var1.data[p] + eps) / (var1.data[q] + eps);
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(rhs));
}

TEST(WgifWeighting, StepEdgeMatchesDirectSum) {
    // The activity plane is taken from the public variance op (itself proven
    // against a two-pass double-loop oracle elsewhere); this pins the
    // normalization structure: the direct side keeps the local factor inside
    // the image-wide sum, the fast path factors it out. eps is chosen large
    // enough that reciprocals stay O(1): with a tiny eps the flat-pixel
    // reciprocals reach 1/eps and an absolute 1e-12 comparison would sit
    // below one ulp of the weighting values themselves.
    const double eps = 0.01;
    const ImagePlane G = step_plane(8, 8, 4, 0.2, 0.8);
    const ImagePlane var1 = epgif::local_variance(G, 1);
    const ImagePlane expected = direct_normalized_weighting(var1, eps);
    const ImagePlane phi = epgif::wgif_weighting(G, eps);
    EXPECT_LE(max_abs_diff(phi, expected), 1e-12);
}

TEST(WgifWeighting, RejectsNonPositiveEpsilon) {
    const ImagePlane G(8, 8, 0.5);
    EXPECT_THROW(epgif::wgif_weighting(G, 0.0), epgif::ParamError);
    EXPECT_THROW(epgif::wgif_weighting(G, -1e-6), epgif::ParamError);
}

TEST(WgifFilter, ConstantInputYieldsConstantOutput) {
    BaselineParams params;
    params.radius_zeta = 3;
    const ImagePlane X(8, 8, 0.61);
    const ImagePlane R = epgif::wgif_filter(X, X, params);
    for (double v : R.data)
        EXPECT_EQ(v, 0.61);
}

TEST(WgifFilter, MatchesNaiveOracle) {
    const ImagePlane X = random_plane(12, 12, 41);
    BaselineParams params;
    params.radius_zeta = 2;
    params.lambda = 0.01;
    const ImagePlane fast = epgif::wgif_filter(X, X, params);
    const ImagePlane slow =
        epgif::naive_window_oracle(X, X, oracle_params(2, 0.01),
                                   FilterVariant::WGIF);
    EXPECT_LE(max_abs_diff(fast, slow), 1e-10);
}

TEST(WgifFilter, SlopePeaksAboveUniformRegularizerAtStrongestEdge) {
    // Where the weighting is maximal (> 1) the effective regularizer
    // lambda / weighting is below lambda, so the self-guided slope must be at
    // least the uniform-regularizer slope.
    const ImagePlane G = step_plane(12, 12, 6, 0.1, 0.9);
    BaselineParams params;
    params.radius_zeta = 2;
    params.lambda = 0.01;
    const ImagePlane phi =
        epgif::wgif_weighting(G, epgif::resolve_epsilon(std::nullopt, 1.0));
    const std::size_t peak =
        static_cast<std::size_t>(std::max_element(phi.data.begin(),
                                                  phi.data.end()) -
                                 phi.data.begin());
    ASSERT_GT(phi.data[peak], 1.0);
    const auto wgif = epgif::wgif_coeffs(G, G, params);
    const auto gif = epgif::gif_coeffs(G, G, params);
    EXPECT_GE(wgif.a.data[peak], gif.a.data[peak]);
}

TEST(GgifWeighting, ConstantGuidanceGivesAllOnes) {
    const ImagePlane G(10, 10, 0.3);
    const ImagePlane phi = epgif::ggif_weighting(G, 2, 1e-6);
    for (double v : phi.data)
        EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(GgifWeighting, RatioIdentityMatchesActivityRatio) {
    const double eps = 1e-6;
    const ImagePlane G = random_plane(12, 12, 51);
    const ImagePlane chi = activity_product(G, 2);
    const ImagePlane phi = epgif::ggif_weighting(G, 2, eps);
    const std::size_t p = 17, q = 90;
    const double lhs = phi.data[p] / phi.data[q];
    const double rhs = (chi.data[p] + eps) / (chi.data[q] + eps);
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(rhs));
}

TEST(GgifWeighting, StepEdgeMatchesDirectSum) {
    // Same structural pin as the variance-weighted case: shared activity
    // plane, literal inside-the-sum normalization on the direct side, eps
    // large enough to keep the normalizer O(1).
    const double eps = 0.01;
    const ImagePlane G = step_plane(8, 8, 4, 0.2, 0.8);
    const ImagePlane chi = activity_product(G, 2);
    const ImagePlane expected = direct_normalized_weighting(chi, eps);
    const ImagePlane phi = epgif::ggif_weighting(G, 2, eps);
    EXPECT_LE(max_abs_diff(phi, expected), 1e-12);
}

TEST(GgifWeighting, RejectsBadParams) {
    const ImagePlane G(8, 8, 0.5);
    EXPECT_THROW(epgif::ggif_weighting(G, 0, 1e-6), epgif::ParamError);
    EXPECT_THROW(epgif::ggif_weighting(G, 2, 0.0), epgif::ParamError);
}

TEST(GgifGamma, ExactlyHalfAtActivityMean) {
    // 4 pixels at 0.25, 8 at 0.5, 4 at 0.75: the mean is exactly 0.5 (all
    // partial sums are exact multiples of 0.25), so the 0.5-valued pixels sit
    // exactly at the sigmoid center.
    ImagePlane chi(4, 4, 0.5);
    chi.data[0] = chi.data[1] = chi.data[2] = chi.data[3] = 0.25;
    chi.data[12] = chi.data[13] = chi.data[14] = chi.data[15] = 0.75;
    const ImagePlane gamma = epgif::ggif_gamma(chi);
    for (std::size_t i = 4; i < 12; ++i)
        EXPECT_EQ(gamma.data[i], 0.5) << "pixel " << i;
}

TEST(GgifGamma, MinimumActivityAnchorsNearZeroButPositive) {
    ImagePlane chi(4, 4, 0.5);
    chi.data[0] = chi.data[1] = chi.data[2] = chi.data[3] = 0.25;
    chi.data[12] = chi.data[13] = chi.data[14] = chi.data[15] = 0.75;
    const ImagePlane gamma = epgif::ggif_gamma(chi);
    // mean - min = 0.25 and the scale 4/0.25 = 16 are powers of two, so the
    // minimum pixels evaluate the sigmoid at exponent exactly -4.
    const double expected = 1.0 - 1.0 / (1.0 + std::exp(-4.0));
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(gamma.data[i], expected);
        EXPECT_NEAR(gamma.data[i], 0.0180, 1e-3);
        EXPECT_GT(gamma.data[i], 0.0);
    }
}

TEST(GgifGamma, SaturatesTowardOneOnExtremeOutlier) {
    // 15 zeros and one 16: the outlier sits ~60 activity scales above the
    // mean, deep in sigmoid saturation.
    ImagePlane chi(4, 4, 0.0);
    chi.data[5] = 16.0;
    const ImagePlane gamma = epgif::ggif_gamma(chi);
    EXPECT_GT(gamma.data[5], 0.999999);
}

TEST(GgifGamma, StrictlyIncreasingWithOpenUnitRange) {
    const ImagePlane chi = random_plane(10, 10, 61);
    const ImagePlane gamma = epgif::ggif_gamma(chi);
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < chi.data.size(); ++i) {
        EXPECT_GT(gamma.data[i], 0.0);
        EXPECT_LT(gamma.data[i], 1.0);
        pairs.emplace_back(chi.data[i], gamma.data[i]);
    }
    std::sort(pairs.begin(), pairs.end());
    for (std::size_t i = 1; i < pairs.size(); ++i)
        if (pairs[i].first > pairs[i - 1].first)
            EXPECT_GT(pairs[i].second, pairs[i - 1].second);
}

TEST(GgifGamma, ConstantActivityFallsBackToHalf) {
    const ImagePlane chi(6, 6, 0.123);
    const ImagePlane gamma = epgif::ggif_gamma(chi);
    for (double v : gamma.data)
        EXPECT_EQ(v, 0.5);
}

TEST(GgifFilter, ConstantInputYieldsConstantOutput) {
    // With zero variance the slope collapses to the degenerate 0.5 target and
    // the rendered output reassembles the constant exactly.
    BaselineParams params;
    params.radius_zeta = 3;
    const ImagePlane X(8, 8, 0.61);
    const ImagePlane R = epgif::ggif_filter(X, X, params);
    for (double v : R.data)
        EXPECT_EQ(v, 0.61);
}

TEST(GgifFilter, MatchesNaiveOracle) {
    const ImagePlane X = random_plane(12, 12, 71);
    BaselineParams params;
    params.radius_zeta = 2;
    params.lambda = 0.04;
    const ImagePlane fast = epgif::ggif_filter(X, X, params);
    const ImagePlane slow =
        epgif::naive_window_oracle(X, X, oracle_params(2, 0.04),
                                   FilterVariant::GGIF);
    EXPECT_LE(max_abs_diff(fast, slow), 1e-10);
}

TEST(GgifFilter, HugeLambdaDrivesSlopeTowardSigmoidTarget) {
    // When the regularizer dominates, a -> gamma pointwise, so strong-edge
    // pixels keep slope near 1 instead of flattening like the other variants.
    const ImagePlane G = random_plane(16, 16, 72);
    BaselineParams params;
    params.radius_zeta = 2;
    params.lambda = 1e9;
    const auto coeffs = epgif::ggif_coeffs(G, G, params);
    const ImagePlane gamma = epgif::ggif_gamma(activity_product(G, 2));
    EXPECT_LE(max_abs_diff(coeffs.a, gamma), 1e-6);
}

TEST(BaselineFamily, AllVariantsMatchOracleAcrossSeeds) {
    const FilterVariant variants[] = {FilterVariant::GIF, FilterVariant::WGIF,
                                      FilterVariant::GGIF};
    BaselineParams params;
    params.radius_zeta = 2;
    params.lambda = 0.01;
    for (unsigned seed : {101u, 102u, 103u, 104u, 105u}) {
        const ImagePlane G = random_plane(16, 16, seed);
        ImagePlane X = add_gaussian_noise(G, 0.05, seed + 1000);
        for (FilterVariant variant : variants) {
            ImagePlane fast;
            switch (variant) {
            case FilterVariant::GIF:
                fast = epgif::gif_filter(X, G, params);
                break;
            case FilterVariant::WGIF:
                fast = epgif::wgif_filter(X, G, params);
                break;
            default:
                fast = epgif::ggif_filter(X, G, params);
                break;
            }
            const ImagePlane slow = epgif::naive_window_oracle(
                X, G, oracle_params(2, 0.01), variant);
            EXPECT_LE(max_abs_diff(fast, slow), 1e-10)
                << "seed " << seed << " variant " << static_cast<int>(variant);
        }
    }
}

} // namespace
