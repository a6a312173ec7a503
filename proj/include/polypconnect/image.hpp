#pragma once

#include <cstdint>
#include <vector>

#include "polypconnect/errors.hpp"

namespace polyp {

// H x W x 3 image, row-major RGB, values in [0,1]. The unit of all
// pipeline I/O. Stored as double so metric arithmetic is exact to
// full precision; the training core converts to float internally.
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<double> data; // height*width*3

    RasterImage() = default;
    RasterImage(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<size_t>(w) * h * 3, fill) {}

    double& at(int y, int x, int ch) {
        return data[(static_cast<size_t>(y) * width + x) * 3 + ch];
    }
    double at(int y, int x, int ch) const {
        return data[(static_cast<size_t>(y) * width + x) * 3 + ch];
    }

    size_t pixel_count() const { return static_cast<size_t>(width) * height; }

    // throws on non-finite / out-of-range values or empty dimensions
    void validate() const;
};

// H x W binary field marking the polyp / inpaint region.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // {0,1}

    BinaryMask() = default;
    BinaryMask(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    std::uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }

    long count_on() const;
    // fraction of pixels set; always recomputed from data
    double fill_ratio() const;

    void validate() const;
};

// H x W binary edge field; the conditioning signal for inpainting.
struct EdgeMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // {0,1}

    EdgeMap() = default;
    EdgeMap(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    std::uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }

    void validate() const;
};

// Image plus mask plus the image with the masked region zeroed out.
struct MaskedSample {
    RasterImage image;
    BinaryMask mask;
    RasterImage holed_image;
};

// Rec. 601 luma weights; the one grayscale conversion used everywhere.
inline double luminance(double r, double g, double b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

double luminance_at(const RasterImage& img, int y, int x);

// Nearest-neighbor resize; output contains only values present in the input.
BinaryMask resize_nearest(const BinaryMask& mask, int width, int height);
EdgeMap resize_nearest(const EdgeMap& edges, int width, int height);

// Zeroes every channel where mask = 1. Dimensions must agree.
MaskedSample make_masked_sample(const RasterImage& image, const BinaryMask& mask);

// Picks one mask uniformly by seed, resizes it (nearest-neighbor) to the
// image dimensions and returns the holed sample.
MaskedSample pair_random_mask(const RasterImage& image,
                              const std::vector<BinaryMask>& mask_pool,
                              std::uint64_t seed);

} // namespace polyp
