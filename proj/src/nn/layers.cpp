#include "polypconnect/nn/layers.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace polyp::nn {

namespace {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

Tensor he_init(int rows, int cols, int kh, int kw, int fan_in, Rng& rng) {
    Tensor t(rows, cols, kh, kw);
    const float scale = std::sqrt(2.0f / static_cast<float>(fan_in));
    for (auto& v : t.data) v = static_cast<float>(rng.normal()) * scale;
    return t;
}

// Gathers k*k patches of one sample into a (c*k*k) x (oh*ow) column matrix.
void im2col(const Tensor& x, int sample, int kernel, int stride, int pad, int oh, int ow,
            MatRM& col) {
    const int c = x.c, h = x.h, w = x.w;
    col.resize(static_cast<Eigen::Index>(c) * kernel * kernel,
               static_cast<Eigen::Index>(oh) * ow);
    for (int ic = 0; ic < c; ++ic)
        for (int ky = 0; ky < kernel; ++ky)
            for (int kx = 0; kx < kernel; ++kx) {
                const Eigen::Index row =
                    (static_cast<Eigen::Index>(ic) * kernel + ky) * kernel + kx;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        float v = 0.0f;
                        if (iy >= 0 && iy < h && ix >= 0 && ix < w) v = x.at(sample, ic, iy, ix);
                        col(row, static_cast<Eigen::Index>(oy) * ow + ox) = v;
                    }
                }
            }
}

void col2im_add(const MatRM& col, int sample, int kernel, int stride, int pad, int oh, int ow,
                Tensor& dx) {
    const int c = dx.c, h = dx.h, w = dx.w;
    for (int ic = 0; ic < c; ++ic)
        for (int ky = 0; ky < kernel; ++ky)
            for (int kx = 0; kx < kernel; ++kx) {
                const Eigen::Index row =
                    (static_cast<Eigen::Index>(ic) * kernel + ky) * kernel + kx;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= w) continue;
                        dx.at(sample, ic, iy, ix) +=
                            col(row, static_cast<Eigen::Index>(oy) * ow + ox);
                    }
                }
            }
}

} // namespace

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng, bool bias)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
      has_bias_(bias),
      weight_(he_init(out_ch, in_ch, kernel, kernel, in_ch * kernel * kernel, rng)),
      bias_(Tensor(1, out_ch, 1, 1)) {
    if (kernel <= 0 || stride <= 0 || pad < 0)
        fail(ErrorCategory::invalid_argument, "conv geometry out of range");
}

Tensor Conv2d::forward(const Tensor& x) {
    if (x.c != in_ch_) fail(ErrorCategory::shape, "conv input channel mismatch");
    const int oh = (x.h + 2 * pad_ - kernel_) / stride_ + 1;
    const int ow = (x.w + 2 * pad_ - kernel_) / stride_ + 1;
    if (oh <= 0 || ow <= 0) fail(ErrorCategory::shape, "conv output collapsed to zero");
    input_ = x;
    Tensor out(x.n, out_ch_, oh, ow);
    CMapRM wmat(weight_.w.data.data(), out_ch_,
                static_cast<Eigen::Index>(in_ch_) * kernel_ * kernel_);
    MatRM col;
    for (int in = 0; in < x.n; ++in) {
        im2col(x, in, kernel_, stride_, pad_, oh, ow, col);
        MapRM omat(out.data.data() + static_cast<size_t>(in) * out_ch_ * oh * ow, out_ch_,
                   static_cast<Eigen::Index>(oh) * ow);
        omat.noalias() = wmat * col;
        if (has_bias_)
            for (int oc = 0; oc < out_ch_; ++oc)
                omat.row(oc).array() += bias_.w.data[static_cast<size_t>(oc)];
    }
    return out;
}

Tensor Conv2d::backward(const Tensor& grad_out, bool accum_param) {
    const Tensor& x = input_;
    const int oh = grad_out.h, ow = grad_out.w;
    Tensor dx = x.like_zeros();
    CMapRM wmat(weight_.w.data.data(), out_ch_,
                static_cast<Eigen::Index>(in_ch_) * kernel_ * kernel_);
    MapRM gw(weight_.g.data.data(), out_ch_,
             static_cast<Eigen::Index>(in_ch_) * kernel_ * kernel_);
    MatRM col, dcol;
    for (int in = 0; in < x.n; ++in) {
        CMapRM gmat(grad_out.data.data() + static_cast<size_t>(in) * out_ch_ * oh * ow, out_ch_,
                    static_cast<Eigen::Index>(oh) * ow);
        im2col(x, in, kernel_, stride_, pad_, oh, ow, col);
        if (accum_param) {
            gw.noalias() += gmat * col.transpose();
            if (has_bias_)
                for (int oc = 0; oc < out_ch_; ++oc)
                    bias_.g.data[static_cast<size_t>(oc)] += gmat.row(oc).sum();
        }
        dcol.noalias() = wmat.transpose() * gmat;
        col2im_add(dcol, in, kernel_, stride_, pad_, oh, ow, dx);
    }
    return dx;
}

std::vector<Param*> Conv2d::params() {
    if (has_bias_) return {&weight_, &bias_};
    return {&weight_};
}

Linear::Linear(int in_features, int out_features, Rng& rng)
    : in_features_(in_features), out_features_(out_features),
      weight_(he_init(out_features, in_features, 1, 1, in_features, rng)),
      bias_(Tensor(1, out_features, 1, 1)) {}

Tensor Linear::forward(const Tensor& x) {
    if (x.c * x.h * x.w != in_features_)
        fail(ErrorCategory::shape, "linear input feature mismatch");
    input_ = x;
    Tensor out(x.n, out_features_, 1, 1);
    CMapRM wmat(weight_.w.data.data(), out_features_, in_features_);
    CMapRM xmat(x.data.data(), x.n, in_features_);
    MapRM omat(out.data.data(), x.n, out_features_);
    omat.noalias() = xmat * wmat.transpose();
    for (int oc = 0; oc < out_features_; ++oc)
        omat.col(oc).array() += bias_.w.data[static_cast<size_t>(oc)];
    return out;
}

Tensor Linear::backward(const Tensor& grad_out, bool accum_param) {
    const Tensor& x = input_;
    CMapRM gmat(grad_out.data.data(), x.n, out_features_);
    CMapRM xmat(x.data.data(), x.n, in_features_);
    CMapRM wmat(weight_.w.data.data(), out_features_, in_features_);
    if (accum_param) {
        MapRM gw(weight_.g.data.data(), out_features_, in_features_);
        gw.noalias() += gmat.transpose() * xmat;
        for (int oc = 0; oc < out_features_; ++oc)
            bias_.g.data[static_cast<size_t>(oc)] += gmat.col(oc).sum();
    }
    Tensor dx = x.like_zeros();
    MapRM dxmat(dx.data.data(), x.n, in_features_);
    dxmat.noalias() = gmat * wmat;
    return dx;
}

std::vector<Param*> Linear::params() { return {&weight_, &bias_}; }

Tensor LeakyReLU::forward(const Tensor& x) {
    input_ = x;
    Tensor out = x;
    for (auto& v : out.data)
        if (v < 0.0f) v *= slope_;
    return out;
}

Tensor LeakyReLU::backward(const Tensor& grad_out, bool) {
    Tensor dx = grad_out;
    for (size_t i = 0; i < dx.data.size(); ++i)
        if (input_.data[i] < 0.0f) dx.data[i] *= slope_;
    return dx;
}

Tensor Sigmoid::forward(const Tensor& x) {
    Tensor out = x;
    for (auto& v : out.data) v = 1.0f / (1.0f + std::exp(-v));
    output_ = out;
    return out;
}

Tensor Sigmoid::backward(const Tensor& grad_out, bool) {
    Tensor dx = grad_out;
    for (size_t i = 0; i < dx.data.size(); ++i) {
        const float y = output_.data[i];
        dx.data[i] *= y * (1.0f - y);
    }
    return dx;
}

Tensor UpsampleNearest2::forward(const Tensor& x) {
    in_h_ = x.h;
    in_w_ = x.w;
    Tensor out(x.n, x.c, x.h * 2, x.w * 2);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int y = 0; y < out.h; ++y)
                for (int xx = 0; xx < out.w; ++xx)
                    out.at(in, ic, y, xx) = x.at(in, ic, y / 2, xx / 2);
    return out;
}

Tensor UpsampleNearest2::backward(const Tensor& grad_out, bool) {
    Tensor dx(grad_out.n, grad_out.c, in_h_, in_w_);
    for (int in = 0; in < grad_out.n; ++in)
        for (int ic = 0; ic < grad_out.c; ++ic)
            for (int y = 0; y < grad_out.h; ++y)
                for (int xx = 0; xx < grad_out.w; ++xx)
                    dx.at(in, ic, y / 2, xx / 2) += grad_out.at(in, ic, y, xx);
    return dx;
}

Tensor AvgPool2::forward(const Tensor& x) {
    if (x.h % 2 != 0 || x.w % 2 != 0)
        fail(ErrorCategory::shape, "avg pool needs even spatial dims");
    in_h_ = x.h;
    in_w_ = x.w;
    Tensor out(x.n, x.c, x.h / 2, x.w / 2);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int y = 0; y < out.h; ++y)
                for (int xx = 0; xx < out.w; ++xx)
                    out.at(in, ic, y, xx) =
                        0.25f * (x.at(in, ic, 2 * y, 2 * xx) + x.at(in, ic, 2 * y, 2 * xx + 1) +
                                 x.at(in, ic, 2 * y + 1, 2 * xx) +
                                 x.at(in, ic, 2 * y + 1, 2 * xx + 1));
    return out;
}

Tensor AvgPool2::backward(const Tensor& grad_out, bool) {
    Tensor dx(grad_out.n, grad_out.c, in_h_, in_w_);
    for (int in = 0; in < grad_out.n; ++in)
        for (int ic = 0; ic < grad_out.c; ++ic)
            for (int y = 0; y < grad_out.h; ++y)
                for (int xx = 0; xx < grad_out.w; ++xx) {
                    const float g = 0.25f * grad_out.at(in, ic, y, xx);
                    dx.at(in, ic, 2 * y, 2 * xx) = g;
                    dx.at(in, ic, 2 * y, 2 * xx + 1) = g;
                    dx.at(in, ic, 2 * y + 1, 2 * xx) = g;
                    dx.at(in, ic, 2 * y + 1, 2 * xx + 1) = g;
                }
    return dx;
}

InstanceNorm::InstanceNorm(int channels)
    : channels_(channels), gamma_(Tensor(1, channels, 1, 1)), beta_(Tensor(1, channels, 1, 1)) {
    gamma_.w.fill(1.0f);
}

Tensor InstanceNorm::forward(const Tensor& x) {
    if (x.c != channels_) fail(ErrorCategory::shape, "instance norm channel mismatch");
    input_ = x;
    const int m = x.h * x.w;
    mean_.assign(static_cast<size_t>(x.n) * x.c, 0.0);
    inv_std_.assign(static_cast<size_t>(x.n) * x.c, 0.0);
    Tensor out = x.like_zeros();
    constexpr double eps = 1e-5;
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            double mu = 0.0;
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx) mu += x.at(in, ic, y, xx);
            mu /= m;
            double var = 0.0;
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx) {
                    const double d = x.at(in, ic, y, xx) - mu;
                    var += d * d;
                }
            var /= m;
            const double istd = 1.0 / std::sqrt(var + eps);
            mean_[static_cast<size_t>(in) * x.c + ic] = mu;
            inv_std_[static_cast<size_t>(in) * x.c + ic] = istd;
            const double g = gamma_.w.data[static_cast<size_t>(ic)];
            const double b = beta_.w.data[static_cast<size_t>(ic)];
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx)
                    out.at(in, ic, y, xx) =
                        static_cast<float>((x.at(in, ic, y, xx) - mu) * istd * g + b);
        }
    return out;
}

Tensor InstanceNorm::backward(const Tensor& grad_out, bool accum_param) {
    const Tensor& x = input_;
    const int m = x.h * x.w;
    Tensor dx = x.like_zeros();
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const double mu = mean_[static_cast<size_t>(in) * x.c + ic];
            const double istd = inv_std_[static_cast<size_t>(in) * x.c + ic];
            const double g = gamma_.w.data[static_cast<size_t>(ic)];
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx) {
                    const double dy = grad_out.at(in, ic, y, xx);
                    const double xhat = (x.at(in, ic, y, xx) - mu) * istd;
                    sum_dy += dy;
                    sum_dy_xhat += dy * xhat;
                }
            if (accum_param) {
                gamma_.g.data[static_cast<size_t>(ic)] += static_cast<float>(sum_dy_xhat);
                beta_.g.data[static_cast<size_t>(ic)] += static_cast<float>(sum_dy);
            }
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx) {
                    const double dy = grad_out.at(in, ic, y, xx);
                    const double xhat = (x.at(in, ic, y, xx) - mu) * istd;
                    dx.at(in, ic, y, xx) = static_cast<float>(
                        g * istd * (dy - sum_dy / m - xhat * sum_dy_xhat / m));
                }
        }
    return dx;
}

std::vector<Param*> InstanceNorm::params() { return {&gamma_, &beta_}; }

Tensor Stack::forward(const Tensor& x) {
    acts_.clear();
    acts_.push_back(x);
    for (auto& layer : layers_) acts_.push_back(layer->forward(acts_.back()));
    return acts_.back();
}

Tensor Stack::backward(const Tensor& grad_out, bool accum_param) {
    return backward_with_taps(grad_out, {}, accum_param);
}

Tensor Stack::backward_with_taps(const Tensor& grad_out, const std::vector<Tap>& taps,
                                 bool accum_param) {
    if (acts_.size() != layers_.size() + 1)
        fail(ErrorCategory::numeric, "stack backward without a matching forward");
    Tensor g = grad_out;
    for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
        for (const auto& tap : taps)
            if (tap.layer_index == i) {
                if (!tap.grad.same_shape(g)) fail(ErrorCategory::shape, "tap gradient shape mismatch");
                for (size_t j = 0; j < g.data.size(); ++j) g.data[j] += tap.grad.data[j];
            }
        g = layers_[static_cast<size_t>(i)]->backward(g, accum_param);
    }
    return g;
}

std::vector<Param*> Stack::params() {
    std::vector<Param*> out;
    for (auto& layer : layers_)
        for (Param* p : layer->params()) out.push_back(p);
    return out;
}

const Tensor& Stack::act(size_t i) const {
    if (i + 1 >= acts_.size()) fail(ErrorCategory::shape, "stack activation index out of range");
    return acts_[i + 1];
}

} // namespace polyp::nn
