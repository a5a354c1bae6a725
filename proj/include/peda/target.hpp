#pragma once

// Preference -> achievable return target, fit by least squares on the best
// trajectories of each preference cell.

#include <span>
#include <stdexcept>
#include <vector>

#include "peda/core.hpp"

namespace peda {

struct ReturnTargetModel {
    /// coefficients[i][j]: weight of preference component j in objective i.
    std::vector<Vec> coefficients;
    Vec intercept;
    double fit_quantile = 0.1;

    std::size_t n_objectives() const noexcept { return intercept.size(); }
};

/// Preference grid resolution used to group trajectories before filtering.
inline constexpr std::size_t kTargetCellsPerDim = 20;
inline constexpr double kTargetRidge = 1e-9;

/// Fits G = W w + b on the top-`quantile` trajectories (by scalarized return)
/// of every preference cell. Because preferences sum to one the intercept is
/// absorbed into W and reported as zero.
ReturnTargetModel fit_target(const Dataset& dataset, double quantile = 0.1);

/// Fits directly on (preference, return) pairs with no filtering.
ReturnTargetModel fit_target_pairs(std::span<const Preference> prefs, std::span<const Vec> returns,
                                   double quantile = 1.0);

/// Affine prediction; never clamped or rescaled.
Vec predict_target(const ReturnTargetModel& model, const Preference& pref);

} // namespace peda
