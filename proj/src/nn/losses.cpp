#include "polypconnect/nn/losses.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace polyp::nn {

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double l1_with_grad(const Tensor& a, const Tensor& b, Tensor& grad_a) {
    if (!a.same_shape(b)) fail(ErrorCategory::shape, "l1 operand shapes differ");
    grad_a = a.like_zeros();
    const double inv_n = 1.0 / static_cast<double>(a.numel());
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        acc += std::abs(d);
        grad_a.data[i] = static_cast<float>((d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv_n);
    }
    return acc * inv_n;
}

double l1(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) fail(ErrorCategory::shape, "l1 operand shapes differ");
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        acc += std::abs(static_cast<double>(a.data[i]) - b.data[i]);
    return acc / static_cast<double>(a.numel());
}

double masked_l1_with_grad(const Tensor& a, const Tensor& b, const Tensor& mask,
                           Tensor& grad_a) {
    if (!a.same_shape(b)) fail(ErrorCategory::shape, "masked l1 operand shapes differ");
    if (mask.n != a.n || mask.c != 1 || mask.h != a.h || mask.w != a.w)
        fail(ErrorCategory::shape, "masked l1 mask must be (n,1,h,w)");
    grad_a = a.like_zeros();
    double on = 0.0;
    for (float v : mask.data) on += v;
    if (on <= 0.0) return 0.0;
    const double inv = 1.0 / (on * a.c);
    double acc = 0.0;
    for (int in = 0; in < a.n; ++in)
        for (int ic = 0; ic < a.c; ++ic)
            for (int y = 0; y < a.h; ++y)
                for (int x = 0; x < a.w; ++x) {
                    const float m = mask.at(in, 0, y, x);
                    if (m <= 0.0f) continue;
                    const double d =
                        static_cast<double>(a.at(in, ic, y, x)) - b.at(in, ic, y, x);
                    acc += std::abs(d);
                    grad_a.at(in, ic, y, x) =
                        static_cast<float>((d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv);
                }
    return acc * inv;
}

double adv_loss(const Tensor& logits, bool target_real) {
    double acc = 0.0;
    for (float v : logits.data) acc += softplus(target_real ? -v : v);
    return acc / static_cast<double>(logits.numel());
}

Tensor adv_grad(const Tensor& logits, bool target_real) {
    Tensor g = logits.like_zeros();
    const double inv_n = 1.0 / static_cast<double>(logits.numel());
    for (size_t i = 0; i < logits.data.size(); ++i) {
        const double y = logits.data[i];
        g.data[i] = static_cast<float>((target_real ? -sigmoid_d(-y) : sigmoid_d(y)) * inv_n);
    }
    return g;
}

double bce_logits_with_grad(const Tensor& logits, const Tensor& target, Tensor& grad) {
    if (!logits.same_shape(target)) fail(ErrorCategory::shape, "bce operand shapes differ");
    grad = logits.like_zeros();
    const double inv_n = 1.0 / static_cast<double>(logits.numel());
    double acc = 0.0;
    for (size_t i = 0; i < logits.data.size(); ++i) {
        const double x = logits.data[i];
        const double t = target.data[i];
        acc += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
        grad.data[i] = static_cast<float>((sigmoid_d(x) - t) * inv_n);
    }
    return acc * inv_n;
}

double dice_loss_with_grad(const Tensor& probs, const Tensor& target, Tensor& grad) {
    if (!probs.same_shape(target)) fail(ErrorCategory::shape, "dice operand shapes differ");
    grad = probs.like_zeros();
    constexpr double eps = 1.0;
    const size_t per = probs.numel() / static_cast<size_t>(probs.n);
    double acc = 0.0;
    for (int in = 0; in < probs.n; ++in) {
        const size_t base = static_cast<size_t>(in) * per;
        double inter = 0.0, psum = 0.0, tsum = 0.0;
        for (size_t i = 0; i < per; ++i) {
            const double p = probs.data[base + i];
            const double t = target.data[base + i];
            inter += p * t;
            psum += p;
            tsum += t;
        }
        const double num = 2.0 * inter + eps;
        const double den = psum + tsum + eps;
        acc += 1.0 - num / den;
        const double inv_batch = 1.0 / probs.n;
        for (size_t i = 0; i < per; ++i) {
            const double t = target.data[base + i];
            grad.data[base + i] =
                static_cast<float>(-(2.0 * t * den - num) / (den * den) * inv_batch);
        }
    }
    return acc / probs.n;
}

Tensor gram(const Tensor& act) {
    using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Tensor out(act.n, 1, act.c, act.c);
    const size_t plane = static_cast<size_t>(act.h) * act.w;
    const float norm = 1.0f / static_cast<float>(static_cast<size_t>(act.c) * plane);
    for (int in = 0; in < act.n; ++in) {
        Eigen::Map<const MatRM> f(act.data.data() + static_cast<size_t>(in) * act.c * plane,
                                  act.c, static_cast<Eigen::Index>(plane));
        Eigen::Map<MatRM> g(out.data.data() + static_cast<size_t>(in) * act.c * act.c, act.c,
                            act.c);
        g.noalias() = f * f.transpose() * norm;
    }
    return out;
}

double gram_l1_with_grad(const Tensor& a, const Tensor& b, Tensor& grad_a) {
    if (!a.same_shape(b)) fail(ErrorCategory::shape, "gram l1 operand shapes differ");
    using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Tensor ga = gram(a);
    const Tensor gb = gram(b);
    Tensor dgram;
    const double loss = l1_with_grad(ga, gb, dgram);
    grad_a = a.like_zeros();
    const size_t plane = static_cast<size_t>(a.h) * a.w;
    const float norm = 1.0f / static_cast<float>(static_cast<size_t>(a.c) * plane);
    for (int in = 0; in < a.n; ++in) {
        Eigen::Map<const MatRM> f(a.data.data() + static_cast<size_t>(in) * a.c * plane, a.c,
                                  static_cast<Eigen::Index>(plane));
        Eigen::Map<const MatRM> dg(dgram.data.data() + static_cast<size_t>(in) * a.c * a.c,
                                   a.c, a.c);
        Eigen::Map<MatRM> df(grad_a.data.data() + static_cast<size_t>(in) * a.c * plane, a.c,
                             static_cast<Eigen::Index>(plane));
        df.noalias() = (dg + dg.transpose()) * f * norm;
    }
    return loss;
}

} // namespace polyp::nn
