#include "polypconnect/image.hpp"

#include <cmath>

#include "polypconnect/rng.hpp"

namespace polyp {

const char* to_string(ErrorCategory cat) {
    switch (cat) {
        case ErrorCategory::config: return "config";
        case ErrorCategory::ingestion: return "ingestion";
        case ErrorCategory::missing_annotation: return "missing-annotation";
        case ErrorCategory::invalid_split: return "invalid-split";
        case ErrorCategory::invalid_argument: return "invalid-argument";
        case ErrorCategory::shape: return "shape";
        case ErrorCategory::insufficient_data: return "insufficient-data";
        case ErrorCategory::training_diverged: return "training-diverged";
        case ErrorCategory::dependency: return "dependency";
        case ErrorCategory::io: return "io";
        case ErrorCategory::numeric: return "numeric";
    }
    return "unknown";
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

void RasterImage::validate() const {
    if (width <= 0 || height <= 0)
        fail(ErrorCategory::shape, "image dimensions must be positive");
    if (data.size() != pixel_count() * 3)
        fail(ErrorCategory::shape, "image buffer size does not match dimensions");
    for (double v : data)
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            fail(ErrorCategory::numeric, "image value outside [0,1]");
}

long BinaryMask::count_on() const {
    long n = 0;
    for (std::uint8_t v : data) n += v;
    return n;
}

double BinaryMask::fill_ratio() const {
    if (data.empty()) return 0.0;
    return static_cast<double>(count_on()) / static_cast<double>(data.size());
}

void BinaryMask::validate() const {
    if (width <= 0 || height <= 0)
        fail(ErrorCategory::shape, "mask dimensions must be positive");
    if (data.size() != static_cast<size_t>(width) * height)
        fail(ErrorCategory::shape, "mask buffer size does not match dimensions");
    for (std::uint8_t v : data)
        if (v > 1) fail(ErrorCategory::numeric, "mask value outside {0,1}");
}

void EdgeMap::validate() const {
    if (width <= 0 || height <= 0)
        fail(ErrorCategory::shape, "edge map dimensions must be positive");
    if (data.size() != static_cast<size_t>(width) * height)
        fail(ErrorCategory::shape, "edge map buffer size does not match dimensions");
    for (std::uint8_t v : data)
        if (v > 1) fail(ErrorCategory::numeric, "edge map value outside {0,1}");
}

double luminance_at(const RasterImage& img, int y, int x) {
    return luminance(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
}

namespace {

// pixel-center mapping, shared by both binary resizers
template <typename T>
void nearest_resize(const T* src, int sw, int sh, T* dst, int dw, int dh) {
    for (int y = 0; y < dh; ++y) {
        int sy = static_cast<int>((y + 0.5) * sh / dh);
        if (sy >= sh) sy = sh - 1;
        for (int x = 0; x < dw; ++x) {
            int sx = static_cast<int>((x + 0.5) * sw / dw);
            if (sx >= sw) sx = sw - 1;
            dst[static_cast<size_t>(y) * dw + x] = src[static_cast<size_t>(sy) * sw + sx];
        }
    }
}

} // namespace

BinaryMask resize_nearest(const BinaryMask& mask, int width, int height) {
    if (width <= 0 || height <= 0)
        fail(ErrorCategory::invalid_argument, "resize target must be positive");
    if (mask.width == width && mask.height == height) return mask;
    BinaryMask out(width, height);
    nearest_resize(mask.data.data(), mask.width, mask.height, out.data.data(), width, height);
    return out;
}

EdgeMap resize_nearest(const EdgeMap& edges, int width, int height) {
    if (width <= 0 || height <= 0)
        fail(ErrorCategory::invalid_argument, "resize target must be positive");
    if (edges.width == width && edges.height == height) return edges;
    EdgeMap out(width, height);
    nearest_resize(edges.data.data(), edges.width, edges.height, out.data.data(), width, height);
    return out;
}

MaskedSample make_masked_sample(const RasterImage& image, const BinaryMask& mask) {
    if (image.width != mask.width || image.height != mask.height)
        fail(ErrorCategory::shape, "image and mask dimensions do not match");
    MaskedSample sample;
    sample.image = image;
    sample.mask = mask;
    sample.holed_image = image;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            if (mask.at(y, x)) {
                sample.holed_image.at(y, x, 0) = 0.0;
                sample.holed_image.at(y, x, 1) = 0.0;
                sample.holed_image.at(y, x, 2) = 0.0;
            }
    return sample;
}

MaskedSample pair_random_mask(const RasterImage& image,
                              const std::vector<BinaryMask>& mask_pool,
                              std::uint64_t seed) {
    if (mask_pool.empty())
        fail(ErrorCategory::invalid_argument, "mask pool is empty");
    Rng rng(seed);
    const BinaryMask& chosen = mask_pool[static_cast<size_t>(rng.uniform_int(static_cast<int>(mask_pool.size())))];
    BinaryMask resized = resize_nearest(chosen, image.width, image.height);
    return make_masked_sample(image, resized);
}

} // namespace polyp
