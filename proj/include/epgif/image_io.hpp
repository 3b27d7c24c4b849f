#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "epgif/errors.hpp"
#include "epgif/image.hpp"

namespace epgif {

// Image file I/O. Reading sniffs the format from the file's leading bytes
// (PNG signature or PNM "P5"/"P6" magic); writing picks the format from the
// file extension. Decoded samples are scaled to [0, 1] doubles with
// dynamic_range = 1.0. All writes go to a temporary file in the destination
// directory followed by an atomic rename.

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::string lower_extension(const std::string& path) {
    std::string ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext;
}

// ---------------------------------------------------------------------------
// PNM (binary PGM "P5" / PPM "P6")
// ---------------------------------------------------------------------------

inline std::vector<unsigned char> read_all_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path);
    std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>()};
    if (in.bad())
        throw IoError("read error on " + path);
    return bytes;
}

/// Parses the next unsigned integer token, skipping whitespace and
/// '#'-to-end-of-line comments.
inline long pnm_next_int(const std::vector<unsigned char>& b, std::size_t& pos,
                         const std::string& path) {
    while (pos < b.size()) {
        if (std::isspace(b[pos])) {
            ++pos;
        } else if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n')
                ++pos;
        } else {
            break;
        }
    }
    if (pos >= b.size() || !std::isdigit(b[pos]))
        throw FormatError(path + ": malformed PNM header");
    long value = 0;
    while (pos < b.size() && std::isdigit(b[pos])) {
        value = value * 10 + (b[pos] - '0');
        if (value > 1000000000)
            throw FormatError(path + ": absurd PNM header value");
        ++pos;
    }
    return value;
}

inline MultiPlaneImage load_pnm(const std::vector<unsigned char>& bytes,
                                const std::string& path) {
    if (bytes.size() < 2 || bytes[0] != 'P' ||
        (bytes[1] != '5' && bytes[1] != '6'))
        throw FormatError(path + ": not a binary PGM/PPM file");
    const int channels = bytes[1] == '5' ? 1 : 3;
    std::size_t pos = 2;
    const long w = pnm_next_int(bytes, pos, path);
    const long h = pnm_next_int(bytes, pos, path);
    const long maxval = pnm_next_int(bytes, pos, path);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw FormatError(path + ": bad PNM dimensions or maxval");
    if (pos >= bytes.size() || !std::isspace(bytes[pos]))
        throw FormatError(path + ": missing whitespace after PNM header");
    ++pos;

    const int bytes_per_sample = maxval > 255 ? 2 : 1;
    const std::size_t n_samples =
        static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;
    if (bytes.size() - pos < n_samples * bytes_per_sample)
        throw FormatError(path + ": truncated PNM pixel data");

    MultiPlaneImage img;
    for (int c = 0; c < channels; ++c)
        img.planes.emplace_back(static_cast<int>(w), static_cast<int>(h), 0.0, 1.0);
    // Divide rather than multiply by a reciprocal so each decoded value is
    // the correctly rounded double for code/maxval.
    const double maxval_d = static_cast<double>(maxval);
    const unsigned char* src = bytes.data() + pos;
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
        for (int c = 0; c < channels; ++c) {
            unsigned value;
            if (bytes_per_sample == 2) {
                value = static_cast<unsigned>(src[0]) << 8 | src[1];
                src += 2;
            } else {
                value = *src++;
            }
            img.planes[c].data[i] = static_cast<double>(value) / maxval_d;
        }
    }
    return img;
}

inline void append_sample(std::vector<unsigned char>& out, long code,
                          int bytes_per_sample) {
    if (bytes_per_sample == 2) {
        out.push_back(static_cast<unsigned char>((code >> 8) & 0xff));
        out.push_back(static_cast<unsigned char>(code & 0xff));
    } else {
        out.push_back(static_cast<unsigned char>(code & 0xff));
    }
}

// ---------------------------------------------------------------------------
// PNG via libpng
// ---------------------------------------------------------------------------

inline MultiPlaneImage load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp)
        throw IoError("cannot open " + path);

    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        throw IoError(path + ": png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError(path + ": png_create_info_struct failed");
    }

    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(path + ": corrupt or unsupported PNG");
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);
    if (w == 0 || h == 0 || (depth != 8 && depth != 16) || channels < 1 ||
        channels > 4)
        longjmp(png_jmpbuf(png), 1);

    const std::size_t stride = png_get_rowbytes(png, info);
    pixels.resize(stride * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = pixels.data() + static_cast<std::size_t>(y) * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    // Gray+alpha collapses to gray, RGBA to RGB; alpha is discarded.
    const int out_channels = channels >= 3 ? 3 : 1;
    MultiPlaneImage img;
    for (int c = 0; c < out_channels; ++c)
        img.planes.emplace_back(static_cast<int>(w), static_cast<int>(h), 0.0, 1.0);
    const int bps = depth / 8;
    // Divide rather than multiply by a reciprocal so each decoded value is
    // the correctly rounded double for code/maxval.
    const double maxval_d = depth == 16 ? 65535.0 : 255.0;
    for (png_uint_32 y = 0; y < h; ++y) {
        const unsigned char* src = pixels.data() + static_cast<std::size_t>(y) * stride;
        const std::size_t base = static_cast<std::size_t>(y) * w;
        for (png_uint_32 x = 0; x < w; ++x) {
            for (int c = 0; c < out_channels; ++c) {
                const unsigned char* s = src + (x * channels + c) * bps;
                const unsigned value =
                    bps == 2 ? (static_cast<unsigned>(s[0]) << 8 | s[1]) : s[0];
                img.planes[c].data[base + x] = static_cast<double>(value) / maxval_d;
            }
        }
    }
    return img;
}

inline void save_png(const std::vector<unsigned char>& samples, int width,
                     int height, int channels, int bit_depth,
                     const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp)
        throw IoError("cannot open " + path + " for writing");

    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        throw IoError(path + ": png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError(path + ": png_create_info_struct failed");
    }

    std::vector<png_bytep> rows(height);
    const std::size_t stride =
        static_cast<std::size_t>(width) * channels * (bit_depth / 8);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(samples.data() +
                                        static_cast<std::size_t>(y) * stride);

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError(path + ": PNG write failed");
    }
    png_init_io(png, fp.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, width, height, bit_depth,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(fp.get()) != 0)
        throw IoError(path + ": flush failed");
}

} // namespace detail

/// Loads a PNG or binary PGM/PPM image; samples are scaled to [0, 1].
inline MultiPlaneImage load_image(const std::string& path) {
    const std::vector<unsigned char> bytes = detail::read_all_bytes(path);
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0)
        return detail::load_png(path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6'))
        return detail::load_pnm(bytes, path);
    throw FormatError(path + ": unrecognized image format");
}

/// Writes `content` to a sibling temp file, then renames over `path`.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot open " + tmp + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError("write error on " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename " + tmp + " to " + path);
    }
}

/// Saves to PNG (.png) or binary PNM (.pgm/.ppm/.pnm) chosen by extension,
/// quantizing v/L onto 8- or 16-bit codes with round-half-away-from-zero.
/// Values outside [0, L] raise RangeError unless `clamp` is set. The write is
/// atomic: a temp file in the same directory is renamed onto `path`.
inline void save_image(const MultiPlaneImage& img, const std::string& path,
                       int bit_depth = 8, bool clamp = false) {
    if (img.planes.empty())
        throw ParamError("save_image: image has no planes");
    const int channels = static_cast<int>(img.planes.size());
    if (channels != 1 && channels != 3)
        throw ParamError("save_image: expected 1 or 3 planes, got " +
                         std::to_string(channels));
    if (bit_depth != 8 && bit_depth != 16)
        throw ParamError("save_image: bit depth must be 8 or 16");
    for (int c = 1; c < channels; ++c)
        require_same_shape(img.planes[0], img.planes[c], "save_image");
    const double L = img.dynamic_range();
    if (!(L > 0.0))
        throw ParamError("save_image: dynamic range must be positive");

    const std::string ext = detail::lower_extension(path);
    bool png;
    if (ext == ".png") {
        png = true;
    } else if (ext == ".pgm") {
        if (channels != 1)
            throw ParamError("save_image: .pgm requires a single plane");
        png = false;
    } else if (ext == ".ppm") {
        if (channels != 3)
            throw ParamError("save_image: .ppm requires three planes");
        png = false;
    } else if (ext == ".pnm") {
        png = false;
    } else {
        throw ParamError("save_image: unsupported extension '" + ext + "'");
    }

    const long maxval = bit_depth == 8 ? 255 : 65535;
    const int bytes_per_sample = bit_depth == 8 ? 1 : 2;
    const int w = img.width();
    const int h = img.height();

    std::vector<unsigned char> samples;
    samples.reserve(static_cast<std::size_t>(w) * h * channels * bytes_per_sample);
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
        for (int c = 0; c < channels; ++c) {
            double v = img.planes[c].data[i];
            if (!std::isfinite(v))
                throw RangeError("save_image: non-finite pixel value");
            if (clamp) {
                v = std::clamp(v, 0.0, L);
            } else if (v < 0.0 || v > L) {
                throw RangeError("save_image: pixel value " + std::to_string(v) +
                                 " outside [0, " + std::to_string(L) + "]");
            }
            detail::append_sample(samples, std::llround(v / L * maxval),
                                  bytes_per_sample);
        }
    }

    const std::string tmp = path + ".tmp";
    try {
        if (png) {
            detail::save_png(samples, w, h, channels, bit_depth, tmp);
        } else {
            std::string header = (channels == 1 ? "P5\n" : "P6\n") +
                                 std::to_string(w) + " " + std::to_string(h) +
                                 "\n" + std::to_string(maxval) + "\n";
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out)
                throw IoError("cannot open " + tmp + " for writing");
            out.write(header.data(), static_cast<std::streamsize>(header.size()));
            out.write(reinterpret_cast<const char*>(samples.data()),
                      static_cast<std::streamsize>(samples.size()));
            out.flush();
            if (!out)
                throw IoError("write error on " + tmp);
        }
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw;
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename " + tmp + " to " + path);
    }
}

} // namespace epgif
