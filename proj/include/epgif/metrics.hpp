#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "epgif/errors.hpp"
#include "epgif/image.hpp"
#include "epgif/image_io.hpp"

namespace epgif {

/// 10*log10(L^2 / MSE); identical planes return +infinity.
inline double psnr(const ImagePlane& a, const ImagePlane& b, double L) {
    require_same_shape(a, b, "psnr");
    if (!(L > 0.0))
        throw ParamError("psnr: dynamic range must be positive");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(L * L / mse);
}

namespace detail {

/// Valid-region separable convolution with an 11-tap kernel: output shrinks
/// by 10 in each dimension, no padding is invented.
inline ImagePlane gauss11_valid(const ImagePlane& p,
                                const std::array<double, 11>& k) {
    const int w = p.width - 10;
    const int h = p.height;
    ImagePlane horiz(w, h, 0.0, p.dynamic_range);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double sum = 0.0;
            for (int i = 0; i < 11; ++i)
                sum += k[i] * p.at(x + i, y);
            horiz.at(x, y) = sum;
        }
    ImagePlane out(w, p.height - 10, 0.0, p.dynamic_range);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < w; ++x) {
            double sum = 0.0;
            for (int i = 0; i < 11; ++i)
                sum += k[i] * horiz.at(x, y + i);
            out.at(x, y) = sum;
        }
    return out;
}

} // namespace detail

/// Mean structural similarity over an 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, evaluated on the valid region only.
inline double ssim(const ImagePlane& a, const ImagePlane& b, double L) {
    require_same_shape(a, b, "ssim");
    if (!(L > 0.0))
        throw ParamError("ssim: dynamic range must be positive");
    if (a.width < 11 || a.height < 11)
        throw ParamError("ssim: image must be at least 11x11");

    std::array<double, 11> k;
    double ksum = 0.0;
    for (int i = 0; i < 11; ++i) {
        k[i] = std::exp(-(i - 5) * (i - 5) / (2.0 * 1.5 * 1.5));
        ksum += k[i];
    }
    for (double& v : k)
        v /= ksum;

    const ImagePlane mu_a = detail::gauss11_valid(a, k);
    const ImagePlane mu_b = detail::gauss11_valid(b, k);
    const ImagePlane s_aa = detail::gauss11_valid(hadamard(a, a), k);
    const ImagePlane s_bb = detail::gauss11_valid(hadamard(b, b), k);
    const ImagePlane s_ab = detail::gauss11_valid(hadamard(a, b), k);

    const double c1 = (0.01 * L) * (0.01 * L);
    const double c2 = (0.03 * L) * (0.03 * L);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.data.size(); ++i) {
        const double ma = mu_a.data[i];
        const double mb = mu_b.data[i];
        const double va = s_aa.data[i] - ma * ma;
        const double vb = s_bb.data[i] - mb * mb;
        const double cab = s_ab.data[i] - ma * mb;
        sum += (2.0 * ma * mb + c1) * (2.0 * cab + c2) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return sum / static_cast<double>(mu_a.data.size());
}

struct MetricRow {
    std::string method;
    int zeta = 0;
    double lambda = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct MetricReport {
    std::vector<MetricRow> rows;
};

/// CSV text with header method,zeta,lambda,psnr_db,ssim; rows sorted by
/// method, then zeta, then lambda; metrics with 4 decimals, infinite PSNR
/// as the literal token `inf`.
inline std::string format_report(const MetricReport& report) {
    std::vector<MetricRow> rows = report.rows;
    std::sort(rows.begin(), rows.end(),
              [](const MetricRow& a, const MetricRow& b) {
                  if (a.method != b.method)
                      return a.method < b.method;
                  if (a.zeta != b.zeta)
                      return a.zeta < b.zeta;
                  return a.lambda < b.lambda;
              });
    std::string csv = "method,zeta,lambda,psnr_db,ssim\n";
    char buf[128];
    for (const MetricRow& r : rows) {
        if (std::isinf(r.psnr_db))
            std::snprintf(buf, sizeof buf, "%s,%d,%g,inf,%.4f",
                          r.method.c_str(), r.zeta, r.lambda, r.ssim);
        else
            std::snprintf(buf, sizeof buf, "%s,%d,%g,%.4f,%.4f",
                          r.method.c_str(), r.zeta, r.lambda, r.psnr_db,
                          r.ssim);
        csv += buf;
        csv += "\n";
    }
    return csv;
}

inline void emit_report(const MetricReport& report, const std::string& path) {
    write_file_atomic(path, format_report(report));
}

} // namespace epgif
