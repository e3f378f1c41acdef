#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unipcb/errors.hpp"
#include "unipcb/tensor.hpp"

namespace unipcb {

/// 8-bit grayscale raster, row-major. Values live in [0,255] by type.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> data;

    GrayImage() = default;
    GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0)
        : width(w), height(h), data(w * h, fill) {}

    std::uint8_t at(std::size_t x, std::size_t y) const { return data[y * width + x]; }
    std::uint8_t& at(std::size_t x, std::size_t y) { return data[y * width + x]; }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    void validate() const {
        if (width * height != data.size()) {
            throw ValidationError("GrayImage: buffer length does not match width*height");
        }
    }
};

// ---- file I/O ----

// Binary PGM (P5), maxval 255. '#' comments in the header are honored.
GrayImage load_pgm(const std::string& path);
void save_pgm(const std::string& path, const GrayImage& img);

// 8-bit PNG. Color inputs are collapsed to luma (Rec. 601, rounded).
GrayImage load_png(const std::string& path);
void save_png(const std::string& path, const GrayImage& img);

// Dispatch by extension (.pgm / .png, case-insensitive).
GrayImage load_image(const std::string& path);
void save_image(const std::string& path, const GrayImage& img);

// ---- filtering ----

/// Separable Gaussian blur with replicate borders, float64 output in the
/// same [0,255] scale. radius 0 selects ceil(3*sigma).
std::vector<double> gaussian_blur_f(const GrayImage& img, double sigma, std::size_t radius = 0);

/// Gaussian blur rounded back to u8.
GrayImage gaussian_blur(const GrayImage& img, double sigma, std::size_t radius = 0);

// ---- conversions ----

/// (1,1,H,W) tensor with raw intensities in [0,255].
Tensor image_to_tensor(const GrayImage& img);

/// Min-max scale an (N,C,H,W) or (H,W) tensor slice into [0,255] u8; a
/// constant tensor maps to mid-gray 128. Uses channel 0 of sample 0.
GrayImage tensor_to_image(const Tensor& t);

} // namespace unipcb
