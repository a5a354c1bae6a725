#pragma once

// Pareto dominance, hypervolume (exact and Monte-Carlo) and sparsity.
// All objectives are maximized.

#include <cstdint>
#include <span>
#include <vector>

#include "peda/core.hpp"
#include "peda/rng.hpp"

namespace peda {

/// Weak dominance: a >= b everywhere and a > b somewhere.
bool dominates(std::span<const double> a, std::span<const double> b);

/// Indices (ascending) of the points not dominated by any other point.
/// Exact duplicates collapse to their first occurrence.
std::vector<std::size_t> pareto_indices(std::span<const Vec> points);
std::vector<Vec> pareto_filter(std::span<const Vec> points);

struct ParetoSet {
    std::vector<Vec> solutions;
    Vec reference;

    /// Filters `points` and pairs them with `reference` (zero vector if empty).
    static ParetoSet from_points(std::span<const Vec> points, Vec reference = {});
};

class UnsupportedDimension : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Exact Lebesgue measure of the union of boxes [reference, p] for 2 <= n <= 4.
/// Points that do not strictly exceed the reference in every objective add nothing.
double hypervolume_exact(const ParetoSet& set);

struct MonteCarloEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

/// Uniform sampling over [reference, componentwise max of the solutions].
MonteCarloEstimate hypervolume_mc(const ParetoSet& set, std::size_t n_samples, Rng& rng);

/// Mean squared gap between neighbours in each objective's sorted values;
/// 0 for fewer than two solutions.
double sparsity(const ParetoSet& set);

} // namespace peda
