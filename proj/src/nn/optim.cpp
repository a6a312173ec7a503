#include "polypconnect/nn/optim.hpp"

#include <cmath>

namespace polyp::nn {

Adam::Adam(std::vector<Param*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Param* p : params_) {
        m_.emplace_back(p->w.numel(), 0.0f);
        v_.emplace_back(p->w.numel(), 0.0f);
    }
}

void Adam::zero_grad() {
    for (Param* p : params_) p->g.fill(0.0f);
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Param* p = params_[i];
        for (size_t j = 0; j < p->w.numel(); ++j) {
            const double g = p->g.data[j];
            const double m = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
            const double v = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
            m_[i][j] = static_cast<float>(m);
            v_[i][j] = static_cast<float>(v);
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            p->w.data[j] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

} // namespace polyp::nn
