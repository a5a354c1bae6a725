#include "peda/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace peda {

namespace {

void require_same(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                             " vs " + std::to_string(b) + ")");
    }
}

} // namespace

Preference::Preference(Vec weights) : w_(std::move(weights)) {
    if (w_.empty()) {
        throw std::invalid_argument("Preference: empty weight vector");
    }
    double sum = 0.0;
    for (double w : w_) {
        if (!std::isfinite(w) || w < 0.0) {
            throw std::invalid_argument("Preference: weights must be finite and non-negative");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        throw std::invalid_argument("Preference: weights sum to " + std::to_string(sum) +
                                    ", expected 1");
    }
}

Preference Preference::uniform(std::size_t n) {
    return Preference(Vec(n, 1.0 / static_cast<double>(n)));
}

Vec Trajectory::total_return() const {
    if (steps.empty()) {
        throw std::invalid_argument("Trajectory: empty");
    }
    Vec g(steps.front().reward.size(), 0.0);
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += it->reward[i];
        }
    }
    return g;
}

NormalizationStats NormalizationStats::scaled(double factor) const {
    NormalizationStats out = *this;
    for (auto& v : out.min) v /= factor;
    for (auto& v : out.max) v /= factor;
    return out;
}

void MOMDPSpec::validate() const {
    if (n_objectives == 0 || state_dim == 0 || action_dim == 0 || horizon == 0) {
        throw std::invalid_argument("MOMDPSpec: dimensions and horizon must be positive");
    }
    if (!(discount > 0.0 && discount <= 1.0)) {
        throw std::invalid_argument("MOMDPSpec: discount must lie in (0, 1]");
    }
}

void Dataset::validate() const {
    for (std::size_t k = 0; k < trajectories.size(); ++k) {
        const auto& traj = trajectories[k];
        if (traj.steps.empty()) {
            throw DimensionError("Dataset: trajectory " + std::to_string(k) + " is empty");
        }
        require_same(traj.preference.size(), n_obj, "Dataset preference");
        for (const auto& step : traj.steps) {
            require_same(step.state.size(), state_dim, "Dataset state");
            require_same(step.action.size(), action_dim, "Dataset action");
            require_same(step.reward.size(), n_obj, "Dataset reward");
        }
    }
}

double scalarize(const Preference& pref, std::span<const double> reward) {
    require_same(pref.size(), reward.size(), "scalarize");
    double s = 0.0;
    for (std::size_t i = 0; i < reward.size(); ++i) {
        s += pref[i] * reward[i];
    }
    return s;
}

std::vector<Vec> compute_rtg(const Trajectory& traj) {
    if (traj.steps.empty()) {
        throw std::invalid_argument("compute_rtg: empty trajectory");
    }
    const std::size_t n = traj.steps.front().reward.size();
    std::vector<Vec> rtg(traj.steps.size(), Vec(n, 0.0));
    Vec acc(n, 0.0);
    for (std::size_t t = traj.steps.size(); t-- > 0;) {
        const auto& r = traj.steps[t].reward;
        require_same(r.size(), n, "compute_rtg");
        for (std::size_t i = 0; i < n; ++i) {
            acc[i] += r[i];
        }
        rtg[t] = acc;
    }
    return rtg;
}

Vec weighted_rtg(std::span<const double> rtg, const Preference& pref) {
    require_same(rtg.size(), pref.size(), "weighted_rtg");
    Vec out(rtg.size());
    for (std::size_t i = 0; i < rtg.size(); ++i) {
        out[i] = rtg[i] * pref[i];
    }
    return out;
}

Vec normalize_return(std::span<const double> value, const NormalizationStats& stats) {
    require_same(value.size(), stats.size(), "normalize_return");
    require_same(stats.max.size(), stats.min.size(), "normalize_return stats");
    Vec out(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (!std::isfinite(value[i]) || !std::isfinite(stats.min[i]) ||
            !std::isfinite(stats.max[i])) {
            throw std::invalid_argument("normalize_return: non-finite input");
        }
        const double range = stats.max[i] - stats.min[i];
        out[i] = range > 0.0 ? (value[i] - stats.min[i]) / range : 0.0;
    }
    return out;
}

Vec denormalize_return(std::span<const double> value, const NormalizationStats& stats) {
    require_same(value.size(), stats.size(), "denormalize_return");
    require_same(stats.max.size(), stats.min.size(), "denormalize_return stats");
    Vec out(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
        out[i] = stats.min[i] + value[i] * (stats.max[i] - stats.min[i]);
    }
    return out;
}

NormalizationStats dataset_stats(const Dataset& dataset) {
    if (dataset.trajectories.empty()) {
        throw std::invalid_argument("dataset_stats: empty dataset");
    }
    NormalizationStats stats;
    for (const auto& traj : dataset.trajectories) {
        const Vec g = traj.total_return();
        if (stats.min.empty()) {
            stats.min = g;
            stats.max = g;
            continue;
        }
        require_same(g.size(), stats.min.size(), "dataset_stats");
        for (std::size_t i = 0; i < g.size(); ++i) {
            stats.min[i] = std::min(stats.min[i], g[i]);
            stats.max[i] = std::max(stats.max[i], g[i]);
        }
    }
    return stats;
}

} // namespace peda
