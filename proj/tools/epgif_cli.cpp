#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "epgif/baseline_filters.hpp"
#include "epgif/epgif_filter.hpp"
#include "epgif/image.hpp"
#include "epgif/image_io.hpp"
#include "epgif/metrics.hpp"
#include "epgif/oracle.hpp"
#include "epgif/pipelines.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct FilterOptions {
    int zeta = 16;
    double lambda = 0.01;
    double c = 0.35;
    double beta = 1.0 / 500.0;
    double epsilon = 0.0;
    std::string rho_mode = "unit";
    bool positive_weight_exponent = false;

    epgif::EpgifParams epgif_params() const {
        epgif::EpgifParams p;
        p.radius_zeta = zeta;
        p.lambda = lambda;
        p.c = c;
        p.beta = beta;
        if (epsilon > 0.0)
            p.epsilon = epsilon;
        p.rho_mode = rho_mode == "luminance-contrast"
                         ? epgif::RhoMode::LuminanceContrast
                         : epgif::RhoMode::Unit;
        p.positive_weight_exponent = positive_weight_exponent;
        return p;
    }

    epgif::BaselineParams baseline_params() const {
        epgif::BaselineParams p;
        p.radius_zeta = zeta;
        p.lambda = lambda;
        if (epsilon > 0.0)
            p.epsilon = epsilon;
        return p;
    }
};

void add_filter_flags(CLI::App* cmd, FilterOptions& opt) {
    cmd->add_option("--zeta", opt.zeta, "Window radius")
        ->capture_default_str();
    cmd->add_option("--lambda", opt.lambda, "Regularization strength")
        ->capture_default_str();
    cmd->add_option("--c", opt.c, "Edge-protect floor, in (0, 0.5)")
        ->capture_default_str();
    cmd->add_option("--beta", opt.beta, "Residual-weight temperature")
        ->capture_default_str();
    cmd->add_option("--epsilon", opt.epsilon,
                    "Weighting regularizer; 0 selects (0.001*L)^2")
        ->capture_default_str();
    cmd->add_option("--rho-mode", opt.rho_mode, "Edge response mode")
        ->check(CLI::IsMember({"unit", "luminance-contrast"}))
        ->capture_default_str();
    cmd->add_flag("--positive-weight-exponent", opt.positive_weight_exponent,
                  "Use exp(+M) aggregation weights instead of exp(-M)");
}

int worker_count(std::size_t cells) {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("EPGIF_THREADS")) {
        char* end = nullptr;
        const long parsed = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && parsed >= 1)
            n = static_cast<unsigned>(parsed);
    }
    return static_cast<int>(std::min<std::size_t>(n, std::max<std::size_t>(cells, 1)));
}

epgif::ImagePlane run_filter(const std::string& name, const epgif::ImagePlane& X,
                             const epgif::ImagePlane& G,
                             const FilterOptions& opt) {
    if (name == "gif")
        return epgif::gif_filter(X, G, opt.baseline_params());
    if (name == "wgif")
        return epgif::wgif_filter(X, G, opt.baseline_params());
    if (name == "ggif")
        return epgif::ggif_filter(X, G, opt.baseline_params());
    if (name == "epgif")
        return epgif::epgif_filter(X, G, opt.epgif_params());
    throw epgif::ParamError("unknown filter '" + name + "'");
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
    const std::filesystem::path p(path);
    std::filesystem::path out = p.parent_path() / p.stem();
    return out.string() + suffix + p.extension().string();
}

std::string encode_f64_dump(const epgif::ImagePlane& plane) {
    std::string out = "EPGF";
    auto put_u32 = [&out](std::uint32_t v) {
        for (int i = 0; i < 4; ++i)
            out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    put_u32(static_cast<std::uint32_t>(plane.width));
    put_u32(static_cast<std::uint32_t>(plane.height));
    for (double v : plane.data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i)
            out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
    return out;
}

void save_gray(const epgif::ImagePlane& plane, const std::string& path) {
    epgif::MultiPlaneImage img;
    img.planes.push_back(plane);
    epgif::save_image(img, path, 8, true);
}

// ---------------------------------------------------------------------------
// Subcommand handlers
// ---------------------------------------------------------------------------

struct SmoothArgs {
    std::string input;
    std::string guide;
    std::string output;
    std::string filter = "epgif";
    FilterOptions opt;
};

int cmd_smooth(const SmoothArgs& args) {
    const epgif::MultiPlaneImage in = epgif::load_image(args.input);
    epgif::MultiPlaneImage guide;
    if (!args.guide.empty())
        guide = epgif::load_image(args.guide);

    epgif::MultiPlaneImage out;
    const auto start = Clock::now();
    for (std::size_t c = 0; c < in.planes.size(); ++c) {
        const epgif::ImagePlane* g = &in.planes[c];
        if (!guide.planes.empty()) {
            if (guide.planes.size() == in.planes.size())
                g = &guide.planes[c];
            else if (guide.planes.size() == 1)
                g = &guide.planes[0];
            else
                throw epgif::ShapeError(
                    "guide must have 1 plane or match the input plane count");
            epgif::require_same_shape(in.planes[c], *g, "smooth");
        }
        out.planes.push_back(run_filter(args.filter, in.planes[c], *g, args.opt));
    }
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
    epgif::save_image(out, args.output, 8, true);
    std::printf("filter=%s zeta=%d lambda=%g time_ms=%lld\n",
                args.filter.c_str(), args.opt.zeta, args.opt.lambda,
                static_cast<long long>(elapsed.count()));
    return 0;
}

struct EnhanceArgs {
    std::string input;
    std::string output;
    double amplification = 5.0;
    bool dump_detail = false;
    FilterOptions opt;
};

int cmd_enhance(const EnhanceArgs& args) {
    const epgif::MultiPlaneImage in = epgif::load_image(args.input);
    const epgif::EpgifParams params = args.opt.epgif_params();
    const epgif::MultiPlaneImage out =
        epgif::detail_enhance(in, params, args.amplification);
    epgif::save_image(out, args.output, 8, true);
    if (args.dump_detail) {
        epgif::MultiPlaneImage detail = epgif::detail_layer(in, params);
        for (epgif::ImagePlane& p : detail.planes)
            for (double& v : p.data)
                v += 0.5 * p.dynamic_range;
        epgif::save_image(detail, with_suffix(args.output, "_detail"), 8, true);
    }
    return 0;
}

struct FuseArgs {
    std::vector<std::string> inputs;
    std::string output;
    int levels = 0;
    FilterOptions opt;
};

int cmd_fuse(const FuseArgs& args) {
    epgif::ExposureSequence seq;
    for (const std::string& path : args.inputs)
        seq.frames.push_back(epgif::load_image(path));
    for (const epgif::MultiPlaneImage& f : seq.frames) {
        if (f.planes.size() != seq.frames[0].planes.size())
            throw epgif::ShapeError("fuse: frames mix gray and color");
        epgif::require_same_shape(seq.frames[0].planes[0], f.planes[0], "fuse");
    }
    int levels = args.levels;
    if (levels == 0)
        levels = std::max(
            1, epgif::max_pyramid_levels(seq.frames[0].width(),
                                         seq.frames[0].height()));
    const epgif::MultiPlaneImage fused =
        epgif::exposure_fuse(seq, args.opt.epgif_params(), levels);
    epgif::save_image(fused, args.output, 8, true);
    return 0;
}

struct CompareArgs {
    std::string input;
    std::string reference;
    std::string output;
    std::vector<int> zetas = {16};
    std::vector<double> lambdas = {0.01};
    FilterOptions opt;
};

int cmd_compare(const CompareArgs& args) {
    if (args.zetas.empty() || args.lambdas.empty())
        throw epgif::ParamError("compare: sweep lists must not be empty");
    const epgif::MultiPlaneImage in = epgif::load_image(args.input);
    const epgif::MultiPlaneImage ref = epgif::load_image(args.reference);
    if (in.planes.size() != ref.planes.size())
        throw epgif::ShapeError("compare: input/reference plane count differs");
    for (std::size_t c = 0; c < in.planes.size(); ++c)
        epgif::require_same_shape(in.planes[c], ref.planes[c], "compare");

    struct Cell {
        std::string method;
        int zeta;
        double lambda;
    };
    std::vector<Cell> cells;
    for (const char* method : {"gif", "wgif", "ggif", "epgif"})
        for (int zeta : args.zetas)
            for (double lambda : args.lambdas)
                cells.push_back({method, zeta, lambda});

    epgif::MetricReport report;
    report.rows.resize(cells.size());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (std::size_t i = next.fetch_add(1); i < cells.size();
             i = next.fetch_add(1)) {
            FilterOptions opt = args.opt;
            opt.zeta = cells[i].zeta;
            opt.lambda = cells[i].lambda;
            double psnr_sum = 0.0;
            double ssim_sum = 0.0;
            for (std::size_t c = 0; c < in.planes.size(); ++c) {
                const epgif::ImagePlane filtered =
                    run_filter(cells[i].method, in.planes[c], in.planes[c], opt);
                const double L = ref.planes[c].dynamic_range;
                psnr_sum += epgif::psnr(filtered, ref.planes[c], L);
                ssim_sum += epgif::ssim(filtered, ref.planes[c], L);
            }
            const double n = static_cast<double>(in.planes.size());
            report.rows[i] = {cells[i].method, cells[i].zeta, cells[i].lambda,
                              psnr_sum / n, ssim_sum / n};
        }
    };
    const int threads = worker_count(cells.size());
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(work);
        for (std::thread& t : pool)
            t.join();
    }
    epgif::emit_report(report, args.output);
    return 0;
}

struct WeightsArgs {
    std::string input;
    std::string output;
    std::string filter = "epgif";
    FilterOptions opt;
};

int cmd_weights(const WeightsArgs& args) {
    if (args.filter != "epgif")
        throw epgif::ParamError("weights: diagnostics exist only for epgif");
    const epgif::MultiPlaneImage in = epgif::load_image(args.input);
    const epgif::ImagePlane lum = epgif::to_luminance(in);
    const epgif::EpgifDiagnostics diag =
        epgif::dump_diagnostics(lum, lum, args.opt.epgif_params());

    save_gray(diag.psi_vis, with_suffix(args.output, "_psi"));
    save_gray(diag.tau_vis, with_suffix(args.output, "_tau"));
    save_gray(diag.eta_vis, with_suffix(args.output, "_eta"));
    save_gray(diag.w_vis, with_suffix(args.output, "_w"));

    const std::filesystem::path base(args.output);
    const std::string stem =
        (base.parent_path() / base.stem()).string();
    epgif::write_file_atomic(stem + "_psi.f64", encode_f64_dump(diag.psi));
    epgif::write_file_atomic(stem + "_tau.f64", encode_f64_dump(diag.tau));
    epgif::write_file_atomic(stem + "_eta.f64", encode_f64_dump(diag.eta));
    epgif::write_file_atomic(stem + "_w.f64", encode_f64_dump(diag.w));
    epgif::write_file_atomic(stem + "_abar.f64", encode_f64_dump(diag.a_bar));
    return 0;
}

struct ProfileArgs {
    std::string input;
    std::string output;
    int row = 0;
    int channel = 0;
    std::vector<std::string> filters = {"gif", "epgif"};
    FilterOptions opt;
};

int cmd_profile(const ProfileArgs& args) {
    const epgif::MultiPlaneImage in = epgif::load_image(args.input);
    if (args.channel < 0 ||
        args.channel >= static_cast<int>(in.planes.size()))
        throw epgif::ParamError("profile: channel out of range");
    const epgif::ImagePlane& plane = in.planes[args.channel];
    std::vector<std::pair<std::string, epgif::ImagePlane>> outputs;
    for (const std::string& name : args.filters)
        outputs.emplace_back(name, run_filter(name, plane, plane, args.opt));
    epgif::write_file_atomic(args.output,
                             epgif::row_profile(plane, outputs, args.row));
    return 0;
}

template <typename F>
int run_guarded(F&& f) {
    try {
        return f();
    } catch (const epgif::ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const epgif::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const epgif::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const epgif::ParamError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const epgif::RangeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Edge-perceptual guided image filtering toolkit"};
    app.require_subcommand(1);
    int seed = 0;
    app.add_option("--seed", seed,
                   "Reserved for synthetic-scene tooling; no effect on outputs")
        ->capture_default_str();

    SmoothArgs smooth;
    CLI::App* sc_smooth =
        app.add_subcommand("smooth", "Edge-preserving smoothing");
    sc_smooth->add_option("-i,--input", smooth.input, "Input image")
        ->required();
    sc_smooth->add_option("-o,--output", smooth.output, "Output image")
        ->required();
    sc_smooth
        ->add_option("--guide", smooth.guide,
                     "Guidance image (defaults to the input)")
        ->capture_default_str();
    sc_smooth->add_option("--filter", smooth.filter, "Filter variant")
        ->check(CLI::IsMember({"gif", "wgif", "ggif", "epgif"}))
        ->capture_default_str();
    add_filter_flags(sc_smooth, smooth.opt);

    EnhanceArgs enhance;
    CLI::App* sc_enhance =
        app.add_subcommand("enhance", "Detail enhancement via base/detail split");
    sc_enhance->add_option("-i,--input", enhance.input, "Input image")
        ->required();
    sc_enhance->add_option("-o,--output", enhance.output, "Output image")
        ->required();
    sc_enhance
        ->add_option("--amplification", enhance.amplification,
                     "Detail-layer gain")
        ->capture_default_str();
    sc_enhance->add_flag("--dump-detail", enhance.dump_detail,
                         "Also write the detail layer offset by 0.5");
    add_filter_flags(sc_enhance, enhance.opt);

    FuseArgs fuse;
    CLI::App* sc_fuse =
        app.add_subcommand("fuse", "Multi-exposure fusion");
    sc_fuse->add_option("-i,--input", fuse.inputs, "Input frames")
        ->required()
        ->expected(1, -1);
    sc_fuse->add_option("-o,--output", fuse.output, "Output image")->required();
    sc_fuse
        ->add_option("--levels", fuse.levels,
                     "Pyramid depth; 0 selects the maximum for the image size")
        ->capture_default_str();
    fuse.opt.beta = 1.0 / 50.0;
    add_filter_flags(sc_fuse, fuse.opt);

    CompareArgs compare;
    CLI::App* sc_compare = app.add_subcommand(
        "compare", "Filter sweep scored against a clean reference");
    sc_compare->add_option("-i,--input", compare.input, "Input image")
        ->required();
    sc_compare
        ->add_option("--reference", compare.reference, "Clean reference image")
        ->required();
    sc_compare->add_option("-o,--output", compare.output, "Output CSV")
        ->required();
    sc_compare->add_option("--zetas", compare.zetas, "Window radii to sweep")
        ->delimiter(',')
        ->capture_default_str();
    sc_compare
        ->add_option("--lambdas", compare.lambdas,
                     "Regularization strengths to sweep")
        ->delimiter(',')
        ->capture_default_str();
    add_filter_flags(sc_compare, compare.opt);

    WeightsArgs weights;
    CLI::App* sc_weights = app.add_subcommand(
        "weights", "Dump filter diagnostics (psi, tau, eta, w)");
    sc_weights->add_option("-i,--input", weights.input, "Input image")
        ->required();
    sc_weights
        ->add_option("-o,--output", weights.output,
                     "Output path; field suffixes are inserted before the "
                     "extension")
        ->required();
    sc_weights->add_option("--filter", weights.filter, "Filter variant")
        ->check(CLI::IsMember({"gif", "wgif", "ggif", "epgif"}))
        ->capture_default_str();
    add_filter_flags(sc_weights, weights.opt);

    ProfileArgs profile;
    CLI::App* sc_profile = app.add_subcommand(
        "profile", "CSV profile of one image row across filters");
    sc_profile->add_option("-i,--input", profile.input, "Input image")
        ->required();
    sc_profile->add_option("-o,--output", profile.output, "Output CSV")
        ->required();
    sc_profile->add_option("--row", profile.row, "Row index")->required();
    sc_profile->add_option("--channel", profile.channel, "Plane index")
        ->capture_default_str();
    sc_profile->add_option("--filters", profile.filters, "Filter variants")
        ->delimiter(',')
        ->capture_default_str();
    add_filter_flags(sc_profile, profile.opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (sc_smooth->parsed())
        return run_guarded([&] { return cmd_smooth(smooth); });
    if (sc_enhance->parsed())
        return run_guarded([&] { return cmd_enhance(enhance); });
    if (sc_fuse->parsed())
        return run_guarded([&] { return cmd_fuse(fuse); });
    if (sc_compare->parsed())
        return run_guarded([&] { return cmd_compare(compare); });
    if (sc_weights->parsed())
        return run_guarded([&] { return cmd_weights(weights); });
    if (sc_profile->parsed())
        return run_guarded([&] { return cmd_profile(profile); });
    return 1;
}
