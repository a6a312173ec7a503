#pragma once

#include "polypconnect/image.hpp"

namespace polyp {

struct CannyParams {
    double sigma = 2.0;      // gaussian pre-smoothing
    double high_frac = 0.2;  // high threshold as a fraction of the max gradient magnitude
    double low_ratio = 0.5;  // low threshold as a fraction of the high threshold
};

// Full Canny chain on the luminance channel: smooth, Sobel gradients,
// non-maximum suppression, double threshold with hysteresis linking.
EdgeMap extract_edges(const RasterImage& image, const CannyParams& params = {});

// Edges of the polyp image restricted to the polyp region:
// extract_edges(image) AND mask.
EdgeMap extract_polyp_edges(const RasterImage& polyp_image, const BinaryMask& mask,
                            const CannyParams& params = {});

// Splice polyp edges into a clean image's edge map: polyp edges inside the
// mask, the clean edges outside it.
EdgeMap merge_edges(const EdgeMap& clean_edges, const EdgeMap& polyp_edges,
                    const BinaryMask& mask);

} // namespace polyp
