#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "epgif/epgif_filter.hpp"
#include "epgif/errors.hpp"
#include "epgif/image.hpp"
#include "epgif/window_stats.hpp"

namespace epgif {

// Applications built on the filter: base/detail decomposition for single-image
// detail enhancement, and multi-exposure fusion where the filter smooths the
// per-frame weight maps before a Laplacian-pyramid blend.

/// detail = X - epgif_filter(X, X, params), per plane. Signed and unclamped.
inline MultiPlaneImage detail_layer(const MultiPlaneImage& X,
                                    const EpgifParams& params) {
    MultiPlaneImage out;
    for (const ImagePlane& plane : X.planes) {
        const ImagePlane base = epgif_filter(plane, plane, params);
        ImagePlane d = plane;
        for (std::size_t i = 0; i < d.data.size(); ++i)
            d.data[i] -= base.data[i];
        out.planes.push_back(std::move(d));
    }
    return out;
}

/// X + amplification * detail, clamped to [0, L] at the very end.
inline MultiPlaneImage detail_enhance(const MultiPlaneImage& X,
                                      const EpgifParams& params,
                                      double amplification = 5.0) {
    if (!(amplification >= 0.0))
        throw ParamError("detail_enhance: amplification must be >= 0");
    const MultiPlaneImage detail = detail_layer(X, params);
    MultiPlaneImage out;
    for (std::size_t c = 0; c < X.planes.size(); ++c) {
        ImagePlane p = X.planes[c];
        const double L = p.dynamic_range;
        for (std::size_t i = 0; i < p.data.size(); ++i)
            p.data[i] = std::clamp(
                p.data[i] + amplification * detail.planes[c].data[i], 0.0, L);
        out.planes.push_back(std::move(p));
    }
    return out;
}

/// Multi-exposure stack: frames of identical shape, values in [0, L].
struct ExposureSequence {
    std::vector<MultiPlaneImage> frames;
};

/// One map per frame; after normalization the maps are nonnegative and sum
/// to 1 at every pixel.
struct WeightMaps {
    std::vector<ImagePlane> maps;
};

namespace detail {

inline void validate_sequence(const ExposureSequence& seq, const char* context) {
    if (seq.frames.empty())
        throw ParamError(std::string(context) + ": empty sequence");
    for (const MultiPlaneImage& f : seq.frames) {
        if (f.planes.empty())
            throw ParamError(std::string(context) + ": frame has no planes");
        for (const ImagePlane& p : f.planes)
            require_same_shape(seq.frames[0].planes[0], p, context);
    }
}

/// |4-neighbor Laplacian| with replicate borders; zero on constants.
inline ImagePlane abs_laplacian(const ImagePlane& p) {
    ImagePlane out(p.width, p.height, 0.0, p.dynamic_range);
    for (int y = 0; y < p.height; ++y) {
        const int yu = std::max(y - 1, 0);
        const int yd = std::min(y + 1, p.height - 1);
        for (int x = 0; x < p.width; ++x) {
            const int xl = std::max(x - 1, 0);
            const int xr = std::min(x + 1, p.width - 1);
            out.at(x, y) = std::abs(p.at(xl, y) + p.at(xr, y) + p.at(x, yu) +
                                    p.at(x, yd) - 4.0 * p.at(x, y));
        }
    }
    return out;
}

inline void normalize_maps(WeightMaps& w) {
    const std::size_t n = w.maps[0].data.size();
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const ImagePlane& m : w.maps)
            sum += m.data[i];
        for (ImagePlane& m : w.maps)
            m.data[i] /= sum;
    }
}

} // namespace detail

/// Per-frame fusion quality: contrast (|Laplacian| of luminance) times
/// color saturation (std-dev across RGB; 0 for gray) times well-exposedness
/// (per-channel Gaussian around mid-gray, sigma 0.2). Each factor gets a
/// 1e-12 floor before the product so frames scoring zero on some factor
/// (for example any constant frame) still rank by the remaining factors,
/// then the maps are normalized to sum 1 across frames.
inline WeightMaps mertens_weights(const ExposureSequence& seq) {
    detail::validate_sequence(seq, "mertens_weights");
    constexpr double kFloor = 1e-12;
    WeightMaps w;
    for (const MultiPlaneImage& frame : seq.frames) {
        const double L = frame.dynamic_range();
        const ImagePlane contrast = detail::abs_laplacian(to_luminance(frame));
        ImagePlane map(frame.width(), frame.height(), 0.0, 1.0);
        const bool color = frame.planes.size() == 3;
        for (std::size_t i = 0; i < map.data.size(); ++i) {
            double saturation = 0.0;
            double exposedness = 1.0;
            if (color) {
                const double r = frame.planes[0].data[i] / L;
                const double g = frame.planes[1].data[i] / L;
                const double b = frame.planes[2].data[i] / L;
                const double mean = (r + g + b) / 3.0;
                saturation = std::sqrt(((r - mean) * (r - mean) +
                                        (g - mean) * (g - mean) +
                                        (b - mean) * (b - mean)) /
                                       3.0);
            }
            for (const ImagePlane& plane : frame.planes) {
                const double v = plane.data[i] / L;
                exposedness *= std::exp(-(v - 0.5) * (v - 0.5) / (2.0 * 0.2 * 0.2));
            }
            map.data[i] = (contrast.data[i] + kFloor) * (saturation + kFloor) *
                          (exposedness + kFloor);
        }
        w.maps.push_back(std::move(map));
    }
    detail::normalize_maps(w);
    return w;
}

/// Filters each map with the frame's luminance as guidance, clamps negatives
/// to zero, and renormalizes (with a 1e-12 floor so all-zero pixels divide
/// cleanly).
inline WeightMaps smooth_weight_maps(const WeightMaps& w,
                                     const ExposureSequence& seq,
                                     const EpgifParams& params) {
    detail::validate_sequence(seq, "smooth_weight_maps");
    if (w.maps.size() != seq.frames.size())
        throw ShapeError("smooth_weight_maps: map/frame count mismatch");
    WeightMaps out;
    for (std::size_t k = 0; k < w.maps.size(); ++k) {
        require_same_shape(w.maps[k], seq.frames[k].planes[0],
                           "smooth_weight_maps");
        ImagePlane m =
            epgif_filter(w.maps[k], to_luminance(seq.frames[k]), params);
        for (double& v : m.data)
            v = std::max(v, 0.0) + 1e-12;
        out.maps.push_back(std::move(m));
    }
    detail::normalize_maps(out);
    return out;
}

// ---------------------------------------------------------------------------
// Burt-Adelson pyramids, 5-tap kernel [1,4,6,4,1]/16
// ---------------------------------------------------------------------------

namespace detail {

/// Separable 5-tap blur with replicate borders. Integer tap weights over a
/// single /16 keep constants exact.
inline ImagePlane pyramid_blur(const ImagePlane& p) {
    const int w = p.width;
    const int h = p.height;
    ImagePlane tmp(w, h, 0.0, p.dynamic_range);
    auto cl = [](int i, int n) { return std::clamp(i, 0, n - 1); };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            tmp.at(x, y) = (p.at(cl(x - 2, w), y) + 4.0 * p.at(cl(x - 1, w), y) +
                            6.0 * p.at(x, y) + 4.0 * p.at(cl(x + 1, w), y) +
                            p.at(cl(x + 2, w), y)) /
                           16.0;
    ImagePlane out(w, h, 0.0, p.dynamic_range);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(x, y) = (tmp.at(x, cl(y - 2, h)) + 4.0 * tmp.at(x, cl(y - 1, h)) +
                            6.0 * tmp.at(x, y) + 4.0 * tmp.at(x, cl(y + 1, h)) +
                            tmp.at(x, cl(y + 2, h))) /
                           16.0;
    return out;
}

inline ImagePlane pyramid_down(const ImagePlane& p) {
    const ImagePlane blurred = pyramid_blur(p);
    const int w = (p.width + 1) / 2;
    const int h = (p.height + 1) / 2;
    ImagePlane out(w, h, 0.0, p.dynamic_range);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(x, y) = blurred.at(2 * x, 2 * y);
    return out;
}

/// Upsample to an explicit target size: zero-stuffing followed by the
/// doubled 5-tap kernel, folded into direct interpolation from clamped
/// source indices. Even outputs blend three sources with weights 2/12/2,
/// odd outputs two sources with 8/8; both sum to 16/16 so constants are
/// preserved exactly, borders included.
inline ImagePlane pyramid_up(const ImagePlane& p, int target_w, int target_h) {
    auto cl = [](int i, int n) { return std::clamp(i, 0, n - 1); };
    ImagePlane horiz(target_w, p.height, 0.0, p.dynamic_range);
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < target_w; ++x) {
            if (x % 2 == 0) {
                const int s = x / 2;
                horiz.at(x, y) = (2.0 * p.at(cl(s - 1, p.width), y) +
                                  12.0 * p.at(cl(s, p.width), y) +
                                  2.0 * p.at(cl(s + 1, p.width), y)) /
                                 16.0;
            } else {
                const int s = (x - 1) / 2;
                horiz.at(x, y) = (8.0 * p.at(cl(s, p.width), y) +
                                  8.0 * p.at(cl(s + 1, p.width), y)) /
                                 16.0;
            }
        }
    ImagePlane out(target_w, target_h, 0.0, p.dynamic_range);
    for (int y = 0; y < target_h; ++y)
        for (int x = 0; x < target_w; ++x) {
            if (y % 2 == 0) {
                const int s = y / 2;
                out.at(x, y) = (2.0 * horiz.at(x, cl(s - 1, p.height)) +
                                12.0 * horiz.at(x, cl(s, p.height)) +
                                2.0 * horiz.at(x, cl(s + 1, p.height))) /
                               16.0;
            } else {
                const int s = (y - 1) / 2;
                out.at(x, y) = (8.0 * horiz.at(x, cl(s, p.height)) +
                                8.0 * horiz.at(x, cl(s + 1, p.height))) /
                               16.0;
            }
        }
    return out;
}

} // namespace detail

/// Largest legal pyramid depth for a given image size.
inline int max_pyramid_levels(int width, int height) {
    const int m = std::min(width, height);
    int levels = 0;
    for (int size = 1; size <= m; size *= 2)
        ++levels;
    return levels - 1;
}

struct PyramidPair {
    std::vector<ImagePlane> gaussian;
    std::vector<ImagePlane> laplacian;
};

/// Gaussian levels by repeated blur+downsample; Laplacian levels store the
/// residual against the actual upsampled next level, so collapsing
/// reconstructs the input up to float rounding.
inline PyramidPair pyramid_roundtrip(const ImagePlane& img, int levels) {
    if (levels < 1)
        throw ParamError("pyramid_roundtrip: levels must be >= 1");
    if (levels > max_pyramid_levels(img.width, img.height))
        throw ParamError("pyramid_roundtrip: too many levels for " +
                         std::to_string(img.width) + "x" +
                         std::to_string(img.height));
    PyramidPair p;
    p.gaussian.push_back(img);
    for (int l = 1; l < levels; ++l)
        p.gaussian.push_back(detail::pyramid_down(p.gaussian.back()));
    for (int l = 0; l + 1 < levels; ++l) {
        const ImagePlane up = detail::pyramid_up(p.gaussian[l + 1],
                                                 p.gaussian[l].width,
                                                 p.gaussian[l].height);
        ImagePlane lap = p.gaussian[l];
        for (std::size_t i = 0; i < lap.data.size(); ++i)
            lap.data[i] -= up.data[i];
        p.laplacian.push_back(std::move(lap));
    }
    p.laplacian.push_back(p.gaussian.back());
    return p;
}

inline ImagePlane collapse_laplacian(const std::vector<ImagePlane>& laplacian) {
    if (laplacian.empty())
        throw ParamError("collapse_laplacian: empty pyramid");
    ImagePlane acc = laplacian.back();
    for (int l = static_cast<int>(laplacian.size()) - 2; l >= 0; --l) {
        const ImagePlane up =
            detail::pyramid_up(acc, laplacian[l].width, laplacian[l].height);
        acc = laplacian[l];
        for (std::size_t i = 0; i < acc.data.size(); ++i)
            acc.data[i] += up.data[i];
    }
    return acc;
}

/// Mertens-style fusion: filter-smoothed weight maps, Gaussian pyramids of
/// the maps against Laplacian pyramids of the frames, collapsed and clamped.
inline MultiPlaneImage exposure_fuse(const ExposureSequence& seq,
                                     const EpgifParams& params, int levels) {
    detail::validate_sequence(seq, "exposure_fuse");
    const int w = seq.frames[0].width();
    const int h = seq.frames[0].height();
    if (levels < 1 || levels > max_pyramid_levels(w, h))
        throw ParamError("exposure_fuse: invalid level count");

    const WeightMaps maps =
        smooth_weight_maps(mertens_weights(seq), seq, params);
    std::vector<std::vector<ImagePlane>> weight_pyrs;
    for (const ImagePlane& m : maps.maps)
        weight_pyrs.push_back(pyramid_roundtrip(m, levels).gaussian);

    const std::size_t channels = seq.frames[0].planes.size();
    const double L = seq.frames[0].dynamic_range();
    MultiPlaneImage out;
    for (std::size_t c = 0; c < channels; ++c) {
        std::vector<ImagePlane> fused;
        for (std::size_t k = 0; k < seq.frames.size(); ++k) {
            const PyramidPair pyr =
                pyramid_roundtrip(seq.frames[k].planes[c], levels);
            for (int l = 0; l < levels; ++l) {
                if (k == 0) {
                    fused.emplace_back(pyr.laplacian[l].width,
                                       pyr.laplacian[l].height, 0.0, L);
                }
                for (std::size_t i = 0; i < fused[l].data.size(); ++i)
                    fused[l].data[i] += weight_pyrs[k][l].data[i] *
                                        pyr.laplacian[l].data[i];
            }
        }
        out.planes.push_back(clamp_plane(collapse_laplacian(fused), 0.0, L));
        out.planes.back().dynamic_range = L;
    }
    return out;
}

/// CSV with columns x, input and one column per named output, one row per
/// column index of the chosen image row.
inline std::string row_profile(
    const ImagePlane& X,
    const std::vector<std::pair<std::string, ImagePlane>>& outputs, int row) {
    if (row < 0 || row >= X.height)
        throw ParamError("row_profile: row " + std::to_string(row) +
                         " out of range for height " + std::to_string(X.height));
    for (const auto& [name, plane] : outputs)
        require_same_shape(X, plane, "row_profile");
    std::string csv = "x,input";
    for (const auto& [name, plane] : outputs)
        csv += "," + name;
    csv += "\n";
    char buf[64];
    for (int x = 0; x < X.width; ++x) {
        csv += std::to_string(x);
        std::snprintf(buf, sizeof buf, ",%.6f", X.at(x, row));
        csv += buf;
        for (const auto& [name, plane] : outputs) {
            std::snprintf(buf, sizeof buf, ",%.6f", plane.at(x, row));
            csv += buf;
        }
        csv += "\n";
    }
    return csv;
}

} // namespace epgif
