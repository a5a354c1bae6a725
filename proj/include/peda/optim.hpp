#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "peda/nn.hpp"

namespace peda::nn {

struct AdamWConfig {
    double learning_rate = 1e-4;
    double weight_decay = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Linear warm-up length in steps; 0 disables the schedule.
    std::size_t warmup_steps = 0;
};

class NonFiniteGradient : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Adaptive-moment optimizer with decoupled weight decay and a linear
/// warm-up then constant learning-rate schedule.
class AdamW {
public:
    AdamW(const ParamStore& params, AdamWConfig config);

    /// Learning rate used by update number `step` (1-based).
    double learning_rate_at(std::size_t step) const;

    /// Applies one update from the accumulated gradients. Throws
    /// NonFiniteGradient naming the offending parameter.
    void step(ParamStore& params);

    std::size_t steps_taken() const noexcept { return step_; }
    const AdamWConfig& config() const noexcept { return config_; }

private:
    AdamWConfig config_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    std::size_t step_ = 0;
};

} // namespace peda::nn
