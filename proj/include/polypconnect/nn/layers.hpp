#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "polypconnect/nn/tensor.hpp"
#include "polypconnect/rng.hpp"

namespace polyp::nn {

// Learnable weight with its accumulated gradient.
struct Param {
    Tensor w;
    Tensor g;

    explicit Param(Tensor init) : w(std::move(init)), g(w.like_zeros()) {}
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    // Returns dL/dinput. Parameter gradients are accumulated into Param::g
    // when accum_param is true. Call only right after the matching forward;
    // layers stash activations from the most recent forward.
    virtual Tensor backward(const Tensor& grad_out, bool accum_param) = 0;
    virtual std::vector<Param*> params() { return {}; }
};

class Conv2d final : public Layer {
public:
    Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng,
           bool bias = true);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out, bool accum_param) override;
    std::vector<Param*> params() override;

    int in_channels() const { return in_ch_; }
    int out_channels() const { return out_ch_; }

private:
    int in_ch_, out_ch_, kernel_, stride_, pad_;
    bool has_bias_;
    Param weight_;
    Param bias_;
    Tensor input_;
};

class Linear final : public Layer {
public:
    Linear(int in_features, int out_features, Rng& rng);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out, bool accum_param) override;
    std::vector<Param*> params() override;

private:
    int in_features_, out_features_;
    Param weight_;
    Param bias_;
    Tensor input_;
};

class LeakyReLU final : public Layer {
public:
    explicit LeakyReLU(float slope = 0.2f) : slope_(slope) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out, bool accum_param) override;

private:
    float slope_;
    Tensor input_;
};

class Sigmoid final : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out, bool accum_param) override;

private:
    Tensor output_;
};

class UpsampleNearest2 final : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out, bool accum_param) override;

private:
    int in_h_ = 0, in_w_ = 0;
};

class AvgPool2 final : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out, bool accum_param) override;

private:
    int in_h_ = 0, in_w_ = 0;
};

// Per-sample, per-channel normalization with learned scale and shift.
class InstanceNorm final : public Layer {
public:
    explicit InstanceNorm(int channels);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out, bool accum_param) override;
    std::vector<Param*> params() override;

private:
    int channels_;
    Param gamma_;
    Param beta_;
    Tensor input_;
    std::vector<double> mean_, inv_std_;
};

// A gradient injected at an intermediate activation during the backward pass.
struct Tap {
    int layer_index;  // gradient is added to the output of this layer
    Tensor grad;
};

// Sequential container that records every activation of the latest forward,
// so losses on intermediate features can feed gradients back in.
class Stack final : public Layer {
public:
    Stack() = default;

    template <typename T, typename... Args>
    T& emplace(Args&&... args) {
        auto layer = std::make_unique<T>(std::forward<Args>(args)...);
        T& ref = *layer;
        layers_.push_back(std::move(layer));
        return ref;
    }

    size_t size() const { return layers_.size(); }

    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out, bool accum_param) override;
    Tensor backward_with_taps(const Tensor& grad_out, const std::vector<Tap>& taps,
                              bool accum_param);
    std::vector<Param*> params() override;

    // Output of layer i from the latest forward.
    const Tensor& act(size_t i) const;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<Tensor> acts_;  // acts_[0] = input, acts_[i+1] = output of layer i
};

} // namespace polyp::nn
