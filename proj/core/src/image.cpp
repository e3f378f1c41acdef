#include "unipcb/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace unipcb {

// ---- PGM ----

static int next_pgm_token(std::istream& is) {
    // Skips whitespace and '#' comments, returns the next unsigned integer.
    for (;;) {
        int c = is.get();
        if (c == EOF) throw IoError("pgm: unexpected end of header");
        if (std::isspace(c)) continue;
        if (c == '#') {
            while (c != EOF && c != '\n') c = is.get();
            continue;
        }
        if (!std::isdigit(c)) throw IoError("pgm: malformed header");
        int value = 0;
        while (c != EOF && std::isdigit(c)) {
            value = value * 10 + (c - '0');
            c = is.get();
        }
        if (c != EOF) is.unget();
        return value;
    }
}

GrayImage load_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open image: " + path);
    char magic[2] = {0, 0};
    is.read(magic, 2);
    if (magic[0] != 'P' || magic[1] != '5') throw IoError("pgm: not a P5 file: " + path);
    const int w = next_pgm_token(is);
    const int h = next_pgm_token(is);
    const int maxval = next_pgm_token(is);
    if (w <= 0 || h <= 0) throw IoError("pgm: non-positive dimensions: " + path);
    if (maxval != 255) throw IoError("pgm: only maxval 255 supported: " + path);
    is.get();  // single whitespace after maxval
    GrayImage img(static_cast<std::size_t>(w), static_cast<std::size_t>(h));
    is.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.size()));
    if (is.gcount() != static_cast<std::streamsize>(img.size())) {
        throw IoError("pgm: truncated pixel data: " + path);
    }
    return img;
}

void save_pgm(const std::string& path, const GrayImage& img) {
    img.validate();
    if (img.empty()) throw ValidationError("save_pgm: empty image");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.data.data()),
             static_cast<std::streamsize>(img.size()));
    if (!os) throw IoError("pgm: write failed: " + path);
}

// ---- PNG ----

namespace {
struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
} // namespace

GrayImage load_png(const std::string& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open image: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: read struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png: info struct allocation failed");
    }
    std::vector<std::uint8_t> rgba;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png: decode failed: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);

    // Normalize every color type to 8-bit RGBA, then collapse to luma.
    png_set_expand(png);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
        png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    png_set_filler(png, 0xFF, PNG_FILLER_AFTER);
    png_read_update_info(png, info);

    rgba.assign(static_cast<std::size_t>(w) * h * 4, 0);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = rgba.data() + static_cast<std::size_t>(y) * w * 4;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    GrayImage img(w, h);
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double r = rgba[i * 4 + 0], g = rgba[i * 4 + 1], b = rgba[i * 4 + 2];
        const double luma = 0.299 * r + 0.587 * g + 0.114 * b;
        img.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(luma, 0.0, 255.0)));
    }
    return img;
}

void save_png(const std::string& path, const GrayImage& img) {
    img.validate();
    if (img.empty()) throw ValidationError("save_png: empty image");
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: write struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: info struct allocation failed");
    }
    std::vector<png_bytep> rows(img.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png: encode failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < img.height; ++y) {
        rows[y] = const_cast<png_bytep>(img.data.data() + y * img.width);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

static bool has_suffix_ci(const std::string& s, const std::string& suffix) {
    if (s.size() < suffix.size()) return false;
    for (std::size_t i = 0; i < suffix.size(); ++i) {
        const char a = static_cast<char>(std::tolower(static_cast<unsigned char>(
            s[s.size() - suffix.size() + i])));
        if (a != suffix[i]) return false;
    }
    return true;
}

GrayImage load_image(const std::string& path) {
    if (has_suffix_ci(path, ".pgm")) return load_pgm(path);
    if (has_suffix_ci(path, ".png")) return load_png(path);
    throw IoError("unsupported image extension (expected .pgm or .png): " + path);
}

void save_image(const std::string& path, const GrayImage& img) {
    if (has_suffix_ci(path, ".pgm")) return save_pgm(path, img);
    if (has_suffix_ci(path, ".png")) return save_png(path, img);
    throw IoError("unsupported image extension (expected .pgm or .png): " + path);
}

// ---- filtering ----

static std::vector<double> gaussian_kernel(double sigma, std::size_t radius) {
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        const double d = static_cast<double>(i) - static_cast<double>(radius);
        k[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

std::vector<double> gaussian_blur_f(const GrayImage& img, double sigma, std::size_t radius) {
    img.validate();
    if (img.empty()) throw ValidationError("gaussian_blur: empty image");
    if (!(sigma > 0.0)) throw ValidationError("gaussian_blur: sigma must be positive");
    if (radius == 0) radius = static_cast<std::size_t>(std::ceil(3.0 * sigma));
    const std::vector<double> k = gaussian_kernel(sigma, radius);
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(radius);
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(img.width);
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(img.height);

    // Horizontal pass, replicate border.
    std::vector<double> tmp(img.size());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (std::ptrdiff_t d = -r; d <= r; ++d) {
                const std::ptrdiff_t sx = std::clamp<std::ptrdiff_t>(x + d, 0, w - 1);
                acc += k[static_cast<std::size_t>(d + r)] *
                       static_cast<double>(img.data[static_cast<std::size_t>(y * w + sx)]);
            }
            tmp[static_cast<std::size_t>(y * w + x)] = acc;
        }
    }
    // Vertical pass.
    std::vector<double> out(img.size());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (std::ptrdiff_t d = -r; d <= r; ++d) {
                const std::ptrdiff_t sy = std::clamp<std::ptrdiff_t>(y + d, 0, h - 1);
                acc += k[static_cast<std::size_t>(d + r)] * tmp[static_cast<std::size_t>(sy * w + x)];
            }
            out[static_cast<std::size_t>(y * w + x)] = acc;
        }
    }
    return out;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma, std::size_t radius) {
    const std::vector<double> f = gaussian_blur_f(img, sigma, radius);
    GrayImage out(img.width, img.height);
    for (std::size_t i = 0; i < f.size(); ++i) {
        out.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(f[i], 0.0, 255.0)));
    }
    return out;
}

// ---- conversions ----

Tensor image_to_tensor(const GrayImage& img) {
    img.validate();
    if (img.empty()) throw ValidationError("image_to_tensor: empty image");
    std::vector<double> data(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) data[i] = static_cast<double>(img.data[i]);
    return Tensor::from_data({1, 1, img.height, img.width}, std::move(data));
}

GrayImage tensor_to_image(const Tensor& t) {
    std::size_t h = 0, w = 0, offset = 0;
    if (t.rank() == 4) {
        h = t.dim(2);
        w = t.dim(3);
        offset = 0;  // sample 0, channel 0 lives at the front of the buffer
    } else if (t.rank() == 2) {
        h = t.dim(0);
        w = t.dim(1);
    } else {
        throw DimensionError("tensor_to_image: expected rank 2 or 4, got " +
                             shape_to_string(t.shape()));
    }
    double lo = t[offset], hi = t[offset];
    for (std::size_t i = 0; i < h * w; ++i) {
        lo = std::min(lo, t[offset + i]);
        hi = std::max(hi, t[offset + i]);
    }
    GrayImage img(w, h);
    if (hi - lo <= 0.0) {
        std::fill(img.data.begin(), img.data.end(), static_cast<std::uint8_t>(128));
        return img;
    }
    for (std::size_t i = 0; i < h * w; ++i) {
        const double v = (t[offset + i] - lo) / (hi - lo) * 255.0;
        img.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
    return img;
}

} // namespace unipcb
