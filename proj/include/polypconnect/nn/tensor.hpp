#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "polypconnect/errors.hpp"

namespace polyp::nn {

// Dense float tensor, NCHW layout.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> data;

    static size_t checked_size(int n_, int c_, int h_, int w_) {
        if (n_ <= 0 || c_ <= 0 || h_ <= 0 || w_ <= 0)
            fail(ErrorCategory::shape, "tensor dimensions must be positive");
        return static_cast<size_t>(n_) * c_ * h_ * w_;
    }

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), data(checked_size(n_, c_, h_, w_), 0.0f) {}

    size_t numel() const { return data.size(); }

    float& at(int in, int ic, int iy, int ix) {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    float at(int in, int ic, int iy, int ix) const {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    void fill(float v) { std::fill(data.begin(), data.end(), v); }

    Tensor like_zeros() const { return Tensor(n, c, h, w); }
};

// Channel concatenation: [a | b] along C. Batch and spatial dims must match.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Inverse of concat_channels: splits grad into the two channel groups.
void split_channels(const Tensor& grad, int c_first, Tensor& ga, Tensor& gb);

// Reductions accumulate in double so gradient checks stay tight.
double sum(const Tensor& t);
double mean(const Tensor& t);

bool all_finite(const Tensor& t);

} // namespace polyp::nn
