#pragma once

#include <filesystem>

#include "polypconnect/image.hpp"

namespace polyp {

// PNG/JPEG codecs and image resampling are delegated to OpenCV; everything
// downstream of decode works on the domain types.

// Loads an RGB image normalized to [0,1]. resolution > 0 resizes to a
// resolution x resolution square (area resampling); 0 keeps native size.
RasterImage load_image(const std::filesystem::path& path, int resolution = 0);

// Loads a stored mask: luminance is thresholded at 0.5 at native size,
// then the binary field is resized with nearest-neighbor interpolation.
BinaryMask load_mask(const std::filesystem::path& path, int resolution = 0);

EdgeMap load_edges(const std::filesystem::path& path, int resolution = 0);

// Round-to-8-bit PNG.
void save_image(const std::filesystem::path& path, const RasterImage& image);
void save_mask(const std::filesystem::path& path, const BinaryMask& mask);
// 1-bit PNG.
void save_edges(const std::filesystem::path& path, const EdgeMap& edges);

// Native dimensions without a full decode-to-domain-type round trip.
std::pair<int, int> image_dimensions(const std::filesystem::path& path);

RasterImage resize_image(const RasterImage& image, int width, int height);

} // namespace polyp
