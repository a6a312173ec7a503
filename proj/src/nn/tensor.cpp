#include "polypconnect/nn/tensor.hpp"

#include <cmath>

namespace polyp::nn {

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        fail(ErrorCategory::shape, "concat_channels: batch or spatial dims differ");
    Tensor out(a.n, a.c + b.c, a.h, a.w);
    const size_t plane = static_cast<size_t>(a.h) * a.w;
    for (int in = 0; in < a.n; ++in) {
        float* dst = out.data.data() + static_cast<size_t>(in) * out.c * plane;
        const float* pa = a.data.data() + static_cast<size_t>(in) * a.c * plane;
        const float* pb = b.data.data() + static_cast<size_t>(in) * b.c * plane;
        std::copy(pa, pa + static_cast<size_t>(a.c) * plane, dst);
        std::copy(pb, pb + static_cast<size_t>(b.c) * plane, dst + static_cast<size_t>(a.c) * plane);
    }
    return out;
}

void split_channels(const Tensor& grad, int c_first, Tensor& ga, Tensor& gb) {
    if (c_first <= 0 || c_first >= grad.c)
        fail(ErrorCategory::shape, "split_channels: bad split point");
    ga = Tensor(grad.n, c_first, grad.h, grad.w);
    gb = Tensor(grad.n, grad.c - c_first, grad.h, grad.w);
    const size_t plane = static_cast<size_t>(grad.h) * grad.w;
    for (int in = 0; in < grad.n; ++in) {
        const float* src = grad.data.data() + static_cast<size_t>(in) * grad.c * plane;
        float* pa = ga.data.data() + static_cast<size_t>(in) * ga.c * plane;
        float* pb = gb.data.data() + static_cast<size_t>(in) * gb.c * plane;
        std::copy(src, src + static_cast<size_t>(c_first) * plane, pa);
        std::copy(src + static_cast<size_t>(c_first) * plane,
                  src + static_cast<size_t>(grad.c) * plane, pb);
    }
}

double sum(const Tensor& t) {
    double acc = 0.0;
    for (float v : t.data) acc += v;
    return acc;
}

double mean(const Tensor& t) {
    if (t.data.empty()) fail(ErrorCategory::shape, "mean of empty tensor");
    return sum(t) / static_cast<double>(t.numel());
}

bool all_finite(const Tensor& t) {
    for (float v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace polyp::nn
