#include "polypconnect/edge.hpp"

#include <cmath>
#include <deque>
#include <vector>

namespace polyp {

namespace {

int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

std::vector<double> gaussian_kernel(double sigma) {
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    if (radius < 1) radius = 1;
    std::vector<double> k(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
        k[static_cast<size_t>(i + radius)] = v;
        sum += v;
    }
    for (auto& v : k) v /= sum;
    return k;
}

std::vector<double> smooth(const std::vector<double>& gray, int w, int h, double sigma) {
    auto kernel = gaussian_kernel(sigma);
    int radius = static_cast<int>(kernel.size() / 2);
    std::vector<double> tmp(gray.size()), out(gray.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<size_t>(i + radius)] *
                       gray[static_cast<size_t>(y) * w + reflect(x + i, w)];
            tmp[static_cast<size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<size_t>(i + radius)] *
                       tmp[static_cast<size_t>(reflect(y + i, h)) * w + x];
            out[static_cast<size_t>(y) * w + x] = acc;
        }
    return out;
}

} // namespace

EdgeMap extract_edges(const RasterImage& image, const CannyParams& params) {
    image.validate();
    if (params.sigma <= 0.0 || params.high_frac <= 0.0 || params.high_frac > 1.0 ||
        params.low_ratio <= 0.0 || params.low_ratio > 1.0)
        fail(ErrorCategory::invalid_argument, "canny parameters out of range");

    const int w = image.width;
    const int h = image.height;
    std::vector<double> gray(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) gray[static_cast<size_t>(y) * w + x] = luminance_at(image, y, x);

    std::vector<double> smoothed = smooth(gray, w, h, params.sigma);

    auto px = [&](int y, int x) { return smoothed[static_cast<size_t>(reflect(y, h)) * w + reflect(x, w)]; };

    std::vector<double> mag(gray.size(), 0.0);
    std::vector<double> dir(gray.size(), 0.0);
    double max_mag = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double gx = -px(y - 1, x - 1) + px(y - 1, x + 1) - 2.0 * px(y, x - 1) +
                        2.0 * px(y, x + 1) - px(y + 1, x - 1) + px(y + 1, x + 1);
            double gy = -px(y - 1, x - 1) - 2.0 * px(y - 1, x) - px(y - 1, x + 1) +
                        px(y + 1, x - 1) + 2.0 * px(y + 1, x) + px(y + 1, x + 1);
            double m = std::hypot(gx, gy);
            mag[static_cast<size_t>(y) * w + x] = m;
            dir[static_cast<size_t>(y) * w + x] = std::atan2(gy, gx);
            if (m > max_mag) max_mag = m;
        }

    EdgeMap edges;
    edges.width = w;
    edges.height = h;
    edges.data.assign(gray.size(), 0);
    // Flat images leave only summation-rounding residue (~1e-16) in the
    // gradients; anything below this floor is not a real edge response.
    if (max_mag < 1e-9) return edges;

    // non-maximum suppression along one of four quantized directions
    std::vector<double> thin(gray.size(), 0.0);
    auto mag_at = [&](int y, int x) -> double {
        if (y < 0 || y >= h || x < 0 || x >= w) return 0.0;
        return mag[static_cast<size_t>(y) * w + x];
    };
    const double pi = std::acos(-1.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double m = mag[static_cast<size_t>(y) * w + x];
            if (m <= 0.0) continue;
            double angle = dir[static_cast<size_t>(y) * w + x];
            if (angle < 0.0) angle += pi;  // fold to [0, pi)
            double n1, n2;
            if (angle < pi / 8.0 || angle >= 7.0 * pi / 8.0) {
                n1 = mag_at(y, x - 1);
                n2 = mag_at(y, x + 1);
            } else if (angle < 3.0 * pi / 8.0) {
                n1 = mag_at(y - 1, x + 1);
                n2 = mag_at(y + 1, x - 1);
            } else if (angle < 5.0 * pi / 8.0) {
                n1 = mag_at(y - 1, x);
                n2 = mag_at(y + 1, x);
            } else {
                n1 = mag_at(y - 1, x - 1);
                n2 = mag_at(y + 1, x + 1);
            }
            if (m >= n1 && m >= n2) thin[static_cast<size_t>(y) * w + x] = m;
        }

    const double high = params.high_frac * max_mag;
    const double low = params.low_ratio * high;

    // hysteresis: strong pixels seed a BFS that pulls in 8-connected weak pixels
    std::deque<std::pair<int, int>> queue;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (thin[static_cast<size_t>(y) * w + x] >= high) {
                edges.data[static_cast<size_t>(y) * w + x] = 1;
                queue.emplace_back(y, x);
            }
    while (!queue.empty()) {
        auto [y, x] = queue.front();
        queue.pop_front();
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                int ny = y + dy, nx = x + dx;
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                size_t ni = static_cast<size_t>(ny) * w + nx;
                if (!edges.data[ni] && thin[ni] >= low) {
                    edges.data[ni] = 1;
                    queue.emplace_back(ny, nx);
                }
            }
    }
    return edges;
}

EdgeMap extract_polyp_edges(const RasterImage& polyp_image, const BinaryMask& mask,
                            const CannyParams& params) {
    mask.validate();
    if (polyp_image.width != mask.width || polyp_image.height != mask.height)
        fail(ErrorCategory::shape, "polyp image and mask dimensions differ");
    EdgeMap edges = extract_edges(polyp_image, params);
    for (size_t i = 0; i < edges.data.size(); ++i) edges.data[i] &= mask.data[i];
    return edges;
}

EdgeMap merge_edges(const EdgeMap& clean_edges, const EdgeMap& polyp_edges,
                    const BinaryMask& mask) {
    polyp_edges.validate();
    clean_edges.validate();
    mask.validate();
    if (polyp_edges.width != clean_edges.width || polyp_edges.height != clean_edges.height ||
        polyp_edges.width != mask.width || polyp_edges.height != mask.height)
        fail(ErrorCategory::shape, "edge maps and mask dimensions differ");
    EdgeMap out = clean_edges;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = mask.data[i] ? polyp_edges.data[i] : clean_edges.data[i];
    return out;
}

} // namespace polyp
