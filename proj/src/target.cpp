#include "peda/target.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace peda {

namespace {

std::vector<std::size_t> cell_key(const Preference& pref) {
    std::vector<std::size_t> key(pref.size());
    for (std::size_t i = 0; i < pref.size(); ++i) {
        const auto cell = static_cast<std::size_t>(pref[i] * static_cast<double>(kTargetCellsPerDim));
        key[i] = std::min(cell, kTargetCellsPerDim - 1);
    }
    return key;
}

} // namespace

ReturnTargetModel fit_target_pairs(std::span<const Preference> prefs, std::span<const Vec> returns,
                                   double quantile) {
    if (prefs.size() != returns.size()) {
        throw DimensionError("fit_target: preference/return count mismatch");
    }
    if (prefs.empty()) {
        throw std::invalid_argument("fit_target: no data");
    }
    const std::size_t n = prefs.front().size();
    if (prefs.size() < n + 1) {
        throw std::invalid_argument("fit_target: need at least " + std::to_string(n + 1) +
                                    " retained pairs, got " + std::to_string(prefs.size()));
    }
    Eigen::MatrixXd X(static_cast<Eigen::Index>(prefs.size()), static_cast<Eigen::Index>(n));
    Eigen::MatrixXd Y(static_cast<Eigen::Index>(prefs.size()), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < prefs.size(); ++r) {
        if (prefs[r].size() != n || returns[r].size() != n) {
            throw DimensionError("fit_target: inconsistent dimensions");
        }
        for (std::size_t j = 0; j < n; ++j) {
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = prefs[r][j];
            Y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = returns[r][j];
        }
    }
    Eigen::MatrixXd gram = X.transpose() * X;
    gram.diagonal().array() += kTargetRidge;
    const Eigen::MatrixXd beta = gram.ldlt().solve(X.transpose() * Y);  // n x n, column i -> objective i

    ReturnTargetModel model;
    model.fit_quantile = quantile;
    model.intercept.assign(n, 0.0);
    model.coefficients.assign(n, Vec(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double c = beta(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
            if (!std::isfinite(c)) throw std::runtime_error("fit_target: non-finite coefficient");
            model.coefficients[i][j] = c;
        }
    }
    return model;
}

ReturnTargetModel fit_target(const Dataset& dataset, double quantile) {
    if (dataset.empty()) {
        throw std::invalid_argument("fit_target: empty dataset");
    }
    if (!(quantile > 0.0 && quantile <= 1.0)) {
        throw std::invalid_argument("fit_target: quantile must lie in (0, 1]");
    }
    struct Entry {
        double score;
        std::size_t index;
    };
    std::map<std::vector<std::size_t>, std::vector<Entry>> cells;
    std::vector<Vec> totals(dataset.trajectories.size());
    for (std::size_t k = 0; k < dataset.trajectories.size(); ++k) {
        const auto& traj = dataset.trajectories[k];
        totals[k] = traj.total_return();
        cells[cell_key(traj.preference)].push_back({scalarize(traj.preference, totals[k]), k});
    }
    std::vector<Preference> prefs;
    std::vector<Vec> returns;
    for (auto& [key, entries] : cells) {
        std::stable_sort(entries.begin(), entries.end(),
                         [](const Entry& a, const Entry& b) { return a.score > b.score; });
        const auto keep = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(entries.size()) - 1e-12)));
        for (std::size_t i = 0; i < keep; ++i) {
            prefs.push_back(dataset.trajectories[entries[i].index].preference);
            returns.push_back(totals[entries[i].index]);
        }
    }
    return fit_target_pairs(prefs, returns, quantile);
}

Vec predict_target(const ReturnTargetModel& model, const Preference& pref) {
    const std::size_t n = model.n_objectives();
    if (pref.size() != n || model.coefficients.size() != n) {
        throw DimensionError("predict_target: dimension mismatch");
    }
    Vec out(model.intercept);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[i] += model.coefficients[i][j] * pref[j];
    }
    return out;
}

} // namespace peda
