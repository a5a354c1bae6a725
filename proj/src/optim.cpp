#include "peda/optim.hpp"

#include <algorithm>
#include <cmath>

namespace peda::nn {

AdamW::AdamW(const ParamStore& params, AdamWConfig config) : config_(config) {
    for (const auto& p : params.all()) {
        m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
        v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
}

double AdamW::learning_rate_at(std::size_t step) const {
    if (config_.warmup_steps == 0) return config_.learning_rate;
    const double frac = static_cast<double>(step) / static_cast<double>(config_.warmup_steps);
    return config_.learning_rate * std::min(1.0, frac);
}

void AdamW::step(ParamStore& params) {
    auto& ps = params.all();
    if (ps.size() != m_.size()) {
        throw std::logic_error("AdamW: parameter set changed since construction");
    }
    for (const auto& p : ps) {
        if (!p.grad.allFinite()) {
            throw NonFiniteGradient("AdamW: non-finite gradient in parameter '" + p.name + "'");
        }
    }
    ++step_;
    const double lr = learning_rate_at(step_);
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t i = 0; i < ps.size(); ++i) {
        auto& p = ps[i];
        m_[i] = b1 * m_[i] + (1.0 - b1) * p.grad;
        v_[i] = b2 * v_[i] + (1.0 - b2) * p.grad.cwiseProduct(p.grad);
        if (config_.weight_decay != 0.0) {
            p.value *= 1.0 - lr * config_.weight_decay;
        }
        p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
    }
}

} // namespace peda::nn
