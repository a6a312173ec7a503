#pragma once

#include "polypconnect/nn/tensor.hpp"

namespace polyp::nn {

double softplus(double x);   // log(1 + e^x), overflow-safe
double sigmoid_d(double x);

// Mean absolute error; grad_a receives dL/da. Loss accumulates in double.
double l1_with_grad(const Tensor& a, const Tensor& b, Tensor& grad_a);
double l1(const Tensor& a, const Tensor& b);

// Mean absolute error restricted to mask==1 pixels. mask is (n,1,h,w) and
// broadcasts across channels; an all-zero mask yields zero loss and gradient.
double masked_l1_with_grad(const Tensor& a, const Tensor& b, const Tensor& mask,
                           Tensor& grad_a);

// Non-saturating GAN objective on raw discriminator logits:
// target_real=true  -> mean softplus(-y), pushes logits up
// target_real=false -> mean softplus(y),  pushes logits down
double adv_loss(const Tensor& logits, bool target_real);
Tensor adv_grad(const Tensor& logits, bool target_real);

// Binary cross entropy on logits with the usual max/log1p stabilization.
double bce_logits_with_grad(const Tensor& logits, const Tensor& target, Tensor& grad);

// Soft Dice on probabilities, averaged per sample. grad receives dL/dprobs.
double dice_loss_with_grad(const Tensor& probs, const Tensor& target, Tensor& grad);

// Per-sample Gram matrix of an activation map, normalized by c*h*w.
// Result shape: (n, 1, c, c).
Tensor gram(const Tensor& act);

// L1 between the Gram matrices of a and b; grad_a receives dL/da (the
// gradient through a's Gram only, b is treated as constant).
double gram_l1_with_grad(const Tensor& a, const Tensor& b, Tensor& grad_a);

} // namespace polyp::nn
