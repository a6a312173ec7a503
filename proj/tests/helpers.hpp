#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "polypconnect/dataset.hpp"
#include "polypconnect/errors.hpp"
#include "polypconnect/image.hpp"
#include "polypconnect/image_io.hpp"
#include "polypconnect/rng.hpp"

namespace testutil {

namespace fs = std::filesystem;

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("polyptest_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

// True when fn throws a PipelineError of exactly this category.
inline bool throws_category(polyp::ErrorCategory cat, const std::function<void()>& fn) {
    try {
        fn();
    } catch (const polyp::PipelineError& e) {
        return e.category() == cat;
    } catch (...) {
        return false;
    }
    return false;
}

// Smooth synthetic image: two-axis gradient with a seed-dependent tint.
inline polyp::RasterImage gradient_image(int size, std::uint64_t seed) {
    polyp::Rng rng(polyp::derive_seed(seed, "gradient"));
    const double r0 = 0.2 + 0.6 * rng.uniform();
    const double g0 = 0.2 + 0.6 * rng.uniform();
    const double b0 = 0.2 + 0.6 * rng.uniform();
    polyp::RasterImage img(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double fx = size > 1 ? static_cast<double>(x) / (size - 1) : 0.0;
            const double fy = size > 1 ? static_cast<double>(y) / (size - 1) : 0.0;
            img.at(y, x, 0) = std::clamp(r0 * (0.4 + 0.6 * fx), 0.0, 1.0);
            img.at(y, x, 1) = std::clamp(g0 * (0.4 + 0.6 * fy), 0.0, 1.0);
            img.at(y, x, 2) = std::clamp(b0 * (0.3 + 0.35 * fx + 0.35 * fy), 0.0, 1.0);
        }
    return img;
}

// Disk mask; radius_frac is relative to the image side.
inline polyp::BinaryMask disk_mask(int size, double cx_frac, double cy_frac,
                                   double radius_frac) {
    polyp::BinaryMask mask(size, size);
    const double cx = cx_frac * size, cy = cy_frac * size, r = radius_frac * size;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            mask.at(y, x) = dx * dx + dy * dy <= r * r ? 1 : 0;
        }
    return mask;
}

// Axis-aligned rectangle mask covering [x0,x1) x [y0,y1).
inline polyp::BinaryMask rect_mask(int size, int x0, int y0, int x1, int y1) {
    polyp::BinaryMask mask(size, size);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) mask.at(y, x) = 1;
    return mask;
}

// Gradient image with a bright, clearly segmentable blob under the mask.
inline polyp::RasterImage blob_image(int size, std::uint64_t seed,
                                     const polyp::BinaryMask& mask) {
    polyp::RasterImage img = gradient_image(size, seed);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if (mask.at(y, x)) {
                img.at(y, x, 0) = 0.95;
                img.at(y, x, 1) = 0.25;
                img.at(y, x, 2) = 0.30;
            }
    return img;
}

// images/ + masks/ tree of n blob-image pairs, ready for load_dataset.
inline fs::path write_labeled_dataset(const fs::path& root, int n, int size,
                                      std::uint64_t seed) {
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");
    for (int i = 0; i < n; ++i) {
        polyp::Rng rng(polyp::derive_seed(seed, "blob-" + std::to_string(i)));
        const double cx = 0.3 + 0.4 * rng.uniform();
        const double cy = 0.3 + 0.4 * rng.uniform();
        const double radius = 0.15 + 0.1 * rng.uniform();
        const polyp::BinaryMask mask = disk_mask(size, cx, cy, radius);
        const polyp::RasterImage image = blob_image(size, seed + 1000 * i, mask);
        char name[32];
        std::snprintf(name, sizeof(name), "case_%04d.png", i);
        polyp::save_image(root / "images" / name, image);
        polyp::save_mask(root / "masks" / name, mask);
    }
    return root;
}

// Flat directory of n clean gradient images.
inline fs::path write_unlabeled_dataset(const fs::path& root, int n, int size,
                                        std::uint64_t seed) {
    fs::create_directories(root);
    for (int i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "clean_%04d.png", i);
        polyp::save_image(root / name, gradient_image(size, seed + 7777 * (i + 1)));
    }
    return root;
}

inline bool same_pixels(const polyp::RasterImage& a, const polyp::RasterImage& b) {
    return a.width == b.width && a.height == b.height && a.data == b.data;
}

inline bool same_mask(const polyp::BinaryMask& a, const polyp::BinaryMask& b) {
    return a.width == b.width && a.height == b.height && a.data == b.data;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Double-precision reference implementations of the network layer arithmetic.
// Float central differences cannot resolve tight gradient tolerances (roundoff
// swamps small steps, larger steps cross leaky-relu kinks), so gradient checks
// difference these instead, seeded with the network's exact float weights.

struct DVol {
    int c, h, w;
    std::vector<double> v;
    DVol(int c_, int h_, int w_)
        : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, 0.0) {}
    double& at(int ic, int y, int x) {
        return v[(static_cast<size_t>(ic) * h + y) * static_cast<size_t>(w) + x];
    }
    double at(int ic, int y, int x) const {
        return v[(static_cast<size_t>(ic) * h + y) * static_cast<size_t>(w) + x];
    }
};

// 3x3 convolution with zero padding 1; weights laid out [oc][ic][ky][kx].
inline DVol conv3x3_ref(const DVol& x, const std::vector<double>& w,
                        const std::vector<double>& b, int out_ch, int stride) {
    const int oh = (x.h + 2 - 3) / stride + 1;
    const int ow = (x.w + 2 - 3) / stride + 1;
    DVol out(out_ch, oh, ow);
    for (int oc = 0; oc < out_ch; ++oc)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = b[static_cast<size_t>(oc)];
                for (int ic = 0; ic < x.c; ++ic)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int iy = oy * stride - 1 + ky;
                            const int ix = ox * stride - 1 + kx;
                            if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                            acc += w[((static_cast<size_t>(oc) * x.c + ic) * 3 + ky) * 3 + kx] *
                                   x.at(ic, iy, ix);
                        }
                out.at(oc, oy, ox) = acc;
            }
    return out;
}

// Per-channel normalisation over the spatial plane, matching the layer's
// population variance and 1e-5 epsilon.
inline void inorm_ref(DVol& x, const std::vector<double>& gamma,
                      const std::vector<double>& beta) {
    const int m = x.h * x.w;
    for (int ic = 0; ic < x.c; ++ic) {
        double mu = 0.0;
        for (int y = 0; y < x.h; ++y)
            for (int xx = 0; xx < x.w; ++xx) mu += x.at(ic, y, xx);
        mu /= m;
        double var = 0.0;
        for (int y = 0; y < x.h; ++y)
            for (int xx = 0; xx < x.w; ++xx) {
                const double d = x.at(ic, y, xx) - mu;
                var += d * d;
            }
        var /= m;
        const double istd = 1.0 / std::sqrt(var + 1e-5);
        for (int y = 0; y < x.h; ++y)
            for (int xx = 0; xx < x.w; ++xx)
                x.at(ic, y, xx) =
                    (x.at(ic, y, xx) - mu) * istd * gamma[static_cast<size_t>(ic)] +
                    beta[static_cast<size_t>(ic)];
    }
}

// Applies the leaky relu in place; returns the smallest |pre-activation|,
// the margin that keeps a finite-difference step away from the kink.
inline double lrelu_ref(DVol& x) {
    const double slope = static_cast<double>(0.2f);
    double margin = 1e18;
    for (auto& u : x.v) {
        margin = std::min(margin, std::abs(u));
        if (u < 0.0) u *= slope;
    }
    return margin;
}

inline DVol up2_ref(const DVol& x) {
    DVol out(x.c, x.h * 2, x.w * 2);
    for (int ic = 0; ic < x.c; ++ic)
        for (int y = 0; y < out.h; ++y)
            for (int xx = 0; xx < out.w; ++xx) out.at(ic, y, xx) = x.at(ic, y / 2, xx / 2);
    return out;
}

inline void sigmoid_ref(DVol& x) {
    for (auto& u : x.v) u = 1.0 / (1.0 + std::exp(-u));
}

} // namespace testutil
