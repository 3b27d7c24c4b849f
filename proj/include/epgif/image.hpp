#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "epgif/errors.hpp"

namespace epgif {

/// Single channel of floating-point pixels, row-major, values in [0, L].
///
/// `dynamic_range` is the nominal full-scale value L (1.0 for images decoded
/// from files, 255.0 when a caller chooses to work on raw 8-bit codes).
/// Operations treat it as metadata; they never clamp unless documented.
struct ImagePlane {
    int width = 0;
    int height = 0;
    double dynamic_range = 1.0;
    std::vector<double> data;

    static std::size_t checked_size(int w, int h) {
        if (w <= 0 || h <= 0)
            throw ParamError("ImagePlane: dimensions must be positive");
        return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    }

    ImagePlane() = default;

    ImagePlane(int w, int h, double fill = 0.0, double range = 1.0)
        : width(w), height(h), dynamic_range(range),
          data(checked_size(w, h), fill) {}

    std::size_t pixel_count() const { return data.size(); }

    double& at(int x, int y) {
        return data[static_cast<std::size_t>(y) * width + x];
    }
    double at(int x, int y) const {
        return data[static_cast<std::size_t>(y) * width + x];
    }

    bool same_shape(const ImagePlane& other) const {
        return width == other.width && height == other.height;
    }
};

/// 1 plane (grayscale) or 3 planes (RGB order) of identical shape.
struct MultiPlaneImage {
    std::vector<ImagePlane> planes;

    int width() const { return planes.empty() ? 0 : planes[0].width; }
    int height() const { return planes.empty() ? 0 : planes[0].height; }
    double dynamic_range() const {
        return planes.empty() ? 1.0 : planes[0].dynamic_range;
    }
};

inline void require_same_shape(const ImagePlane& a, const ImagePlane& b,
                               const char* context) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(context) + ": planes are " +
                         std::to_string(a.width) + "x" + std::to_string(a.height) +
                         " vs " + std::to_string(b.width) + "x" +
                         std::to_string(b.height));
}

inline void require_finite(const ImagePlane& p, const char* context) {
    for (double v : p.data)
        if (!std::isfinite(v))
            throw RangeError(std::string(context) + ": non-finite pixel value");
}

/// Rec. 601 luma of an RGB image; a grayscale image passes through as a copy.
inline ImagePlane to_luminance(const MultiPlaneImage& img) {
    if (img.planes.empty())
        throw ParamError("to_luminance: image has no planes");
    if (img.planes.size() == 1)
        return img.planes[0];
    if (img.planes.size() != 3)
        throw ParamError("to_luminance: expected 1 or 3 planes, got " +
                         std::to_string(img.planes.size()));
    const ImagePlane& r = img.planes[0];
    const ImagePlane& g = img.planes[1];
    const ImagePlane& b = img.planes[2];
    require_same_shape(r, g, "to_luminance");
    require_same_shape(r, b, "to_luminance");
    ImagePlane out(r.width, r.height, 0.0, r.dynamic_range);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = 0.299 * r.data[i] + 0.587 * g.data[i] + 0.114 * b.data[i];
    return out;
}

/// Pixel-wise product, used for second moments.
inline ImagePlane hadamard(const ImagePlane& a, const ImagePlane& b) {
    require_same_shape(a, b, "hadamard");
    ImagePlane out(a.width, a.height, 0.0, a.dynamic_range);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = a.data[i] * b.data[i];
    return out;
}

/// Serial left-to-right mean over all pixels; deterministic by construction.
inline double plane_mean(const ImagePlane& p) {
    double sum = 0.0;
    for (double v : p.data)
        sum += v;
    return sum / static_cast<double>(p.data.size());
}

inline double plane_min(const ImagePlane& p) {
    double m = p.data[0];
    for (double v : p.data)
        m = std::min(m, v);
    return m;
}

inline double plane_max(const ImagePlane& p) {
    double m = p.data[0];
    for (double v : p.data)
        m = std::max(m, v);
    return m;
}

inline ImagePlane clamp_plane(const ImagePlane& p, double lo, double hi) {
    ImagePlane out = p;
    for (double& v : out.data)
        v = std::clamp(v, lo, hi);
    return out;
}

/// Affine rescale of a plane onto [0, range] for visualization. A constant
/// plane maps to all zeros.
inline ImagePlane minmax_normalize(const ImagePlane& p, double range = 1.0) {
    const double lo = plane_min(p);
    const double hi = plane_max(p);
    ImagePlane out = p;
    if (hi == lo) {
        std::fill(out.data.begin(), out.data.end(), 0.0);
    } else {
        const double scale = range / (hi - lo);
        for (double& v : out.data)
            v = (v - lo) * scale;
    }
    out.dynamic_range = range;
    return out;
}

} // namespace epgif
