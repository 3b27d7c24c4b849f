// Tests for the full-reference quality metrics and the CSV report writer.

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "epgif/metrics.hpp"
#include "test_support.hpp"

namespace {

using epgif::ImagePlane;
using epgif::MetricReport;
using epgif::MetricRow;
using namespace test_support;

ImagePlane add_uniform_noise(const ImagePlane& p, double amp, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-amp, amp);
    ImagePlane out = p;
    for (double& v : out.data)
        v += dist(rng);
    return out;
}

TEST(Psnr, IdenticalImagesGiveInfiniteSentinel) {
    const ImagePlane a = random_plane(16, 16, 1);
    const double v = epgif::psnr(a, a, 1.0);
    EXPECT_TRUE(std::isinf(v));
    EXPECT_GT(v, 0.0);
}

TEST(Psnr, FullRangeErrorGivesZeroDecibels) {
    for (double L : {1.0, 255.0}) {
        const ImagePlane a(8, 8, 0.0);
        const ImagePlane b(8, 8, L);
        EXPECT_EQ(epgif::psnr(a, b, L), 0.0) << "L = " << L;
    }
}

TEST(Psnr, HalfRangeErrorGivesSixDecibels) {
    const ImagePlane a(8, 8, 0.0);
    const ImagePlane b(8, 8, 0.5);
    const double v = epgif::psnr(a, b, 1.0);
    EXPECT_DOUBLE_EQ(v, 10.0 * std::log10(4.0));
    EXPECT_NEAR(v, 6.0206, 1e-4);
}

TEST(Psnr, StrictlyDecreasesWithNoiseAmplitude) {
    const ImagePlane clean = random_plane(16, 16, 2, 0.3, 0.7);
    double prev = std::numeric_limits<double>::infinity();
    for (double amp : {0.01, 0.02, 0.05, 0.1, 0.2}) {
        const double v =
            epgif::psnr(clean, add_uniform_noise(clean, amp, 3), 1.0);
        EXPECT_LT(v, prev) << "amplitude " << amp;
        prev = v;
    }
}

TEST(Psnr, RejectsShapeMismatchAndBadRange) {
    const ImagePlane a(8, 8, 0.0);
    const ImagePlane b(8, 9, 0.0);
    EXPECT_THROW(epgif::psnr(a, b, 1.0), epgif::ShapeError);
    EXPECT_THROW(epgif::psnr(a, a, 0.0), epgif::ParamError);
}

TEST(Ssim, SelfSimilarityIsExactlyOne) {
    const ImagePlane a = random_plane(24, 24, 4);
    EXPECT_EQ(epgif::ssim(a, a, 1.0), 1.0);
}

TEST(Ssim, ConstantPlanesMatchZeroVarianceClosedForm) {
    const double c1v = 0.3, c2v = 0.6;
    const ImagePlane a(16, 16, c1v);
    const ImagePlane b(16, 16, c2v);
    const double C1 = (0.01 * 1.0) * (0.01 * 1.0);
    const double expected =
        (2.0 * c1v * c2v + C1) / (c1v * c1v + c2v * c2v + C1);
    EXPECT_NEAR(epgif::ssim(a, b, 1.0), expected, 1e-12);
}

TEST(Ssim, SymmetricInArguments) {
    const ImagePlane a = random_plane(20, 20, 5);
    const ImagePlane b = random_plane(20, 20, 6);
    EXPECT_NEAR(epgif::ssim(a, b, 1.0), epgif::ssim(b, a, 1.0), 1e-12);
}

TEST(Ssim, MatchesDirectSlidingWindowOracle) {
    // Independent evaluation: explicit 11x11 2-D Gaussian weights, one
    // window per valid center, deviation-form variances.
    const ImagePlane a = random_plane(32, 32, 7);
    const ImagePlane b = add_uniform_noise(a, 0.1, 8);

    double w2d[11][11];
    double wsum = 0.0;
    for (int j = 0; j < 11; ++j)
        for (int i = 0; i < 11; ++i) {
            const double d2 = (i - 5) * (i - 5) + (j - 5) * (j - 5);
            w2d[j][i] = std::exp(-d2 / (2.0 * 1.5 * 1.5));
            wsum += w2d[j][i];
        }
    for (auto& row : w2d)
        for (double& v : row)
            v /= wsum;

    const double C1 = 1e-4;
    const double C2 = 9e-4;
    double total = 0.0;
    int count = 0;
    for (int cy = 5; cy <= 26; ++cy)
        for (int cx = 5; cx <= 26; ++cx) {
            double ma = 0.0, mb = 0.0;
            for (int j = -5; j <= 5; ++j)
                for (int i = -5; i <= 5; ++i) {
                    ma += w2d[j + 5][i + 5] * a.at(cx + i, cy + j);
                    mb += w2d[j + 5][i + 5] * b.at(cx + i, cy + j);
                }
            double va = 0.0, vb = 0.0, cab = 0.0;
            for (int j = -5; j <= 5; ++j)
                for (int i = -5; i <= 5; ++i) {
                    const double da = a.at(cx + i, cy + j) - ma;
                    const double db = b.at(cx + i, cy + j) - mb;
                    va += w2d[j + 5][i + 5] * da * da;
                    vb += w2d[j + 5][i + 5] * db * db;
                    cab += w2d[j + 5][i + 5] * da * db;
                }
            total += (2.0 * ma * mb + C1) * (2.0 * cab + C2) /
                     ((ma * ma + mb * mb + C1) * (va + vb + C2));
            ++count;
        }
    EXPECT_NEAR(epgif::ssim(a, b, 1.0), total / count, 1e-9);
}

TEST(Ssim, DegradesWithNoise) {
    const ImagePlane clean = random_plane(24, 24, 9, 0.3, 0.7);
    const double mild =
        epgif::ssim(clean, add_uniform_noise(clean, 0.05, 10), 1.0);
    const double heavy =
        epgif::ssim(clean, add_uniform_noise(clean, 0.25, 10), 1.0);
    EXPECT_GT(mild, heavy);
}

TEST(Ssim, RejectsImagesSmallerThanWindow) {
    const ImagePlane small(10, 10, 0.5);
    EXPECT_THROW(epgif::ssim(small, small, 1.0), epgif::ParamError);
    const ImagePlane wide(32, 10, 0.5);
    EXPECT_THROW(epgif::ssim(wide, wide, 1.0), epgif::ParamError);
    const ImagePlane minimal(11, 11, 0.5);
    EXPECT_EQ(epgif::ssim(minimal, minimal, 1.0), 1.0);
}

TEST(Report, EmptyReportIsHeaderOnly) {
    EXPECT_EQ(epgif::format_report(MetricReport{}),
              "method,zeta,lambda,psnr_db,ssim\n");
}

TEST(Report, SingleRowRoundsToFourDecimals) {
    MetricReport rep;
    rep.rows.push_back({"gif", 4, 0.04, 32.123456, 0.987654});
    EXPECT_EQ(epgif::format_report(rep),
              "method,zeta,lambda,psnr_db,ssim\n"
              "gif,4,0.04,32.1235,0.9877\n");
}

TEST(Report, InfinitePsnrWritesInfToken) {
    MetricReport rep;
    rep.rows.push_back(
        {"epgif", 2, 0.0001, std::numeric_limits<double>::infinity(), 1.0});
    EXPECT_EQ(epgif::format_report(rep),
              "method,zeta,lambda,psnr_db,ssim\n"
              "epgif,2,0.0001,inf,1.0000\n");
}

TEST(Report, RowsSortedByMethodZetaLambda) {
    MetricReport rep;
    rep.rows.push_back({"wgif", 2, 0.04, 1.0, 0.5});
    rep.rows.push_back({"epgif", 4, 0.04, 2.0, 0.5});
    rep.rows.push_back({"epgif", 2, 0.16, 3.0, 0.5});
    rep.rows.push_back({"epgif", 2, 0.04, 4.0, 0.5});
    rep.rows.push_back({"gif", 2, 0.04, 5.0, 0.5});
    const std::string csv = epgif::format_report(rep);
    std::istringstream in(csv);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line))
        lines.push_back(line);
    ASSERT_EQ(lines.size(), 6u);
    EXPECT_EQ(lines[1], "epgif,2,0.04,4.0000,0.5000");
    EXPECT_EQ(lines[2], "epgif,2,0.16,3.0000,0.5000");
    EXPECT_EQ(lines[3], "epgif,4,0.04,2.0000,0.5000");
    EXPECT_EQ(lines[4], "gif,2,0.04,5.0000,0.5000");
    EXPECT_EQ(lines[5], "wgif,2,0.04,1.0000,0.5000");
}

TEST(Report, EmitWritesFileWithoutTempLeftovers) {
    TempDir dir("report");
    MetricRow row{"gif", 2, 0.01, 30.0, 0.9};
    MetricReport rep;
    rep.rows.push_back(row);
    const std::string path = dir.file("out.csv");
    epgif::emit_report(rep, path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(ss.str(), epgif::format_report(rep));
    int entries = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir.dir())) {
        (void)e;
        ++entries;
    }
    EXPECT_EQ(entries, 1);
}

} // namespace
