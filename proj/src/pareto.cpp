#include "peda/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace peda {

bool dominates(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("dominates: dimension mismatch");
    }
    bool strict = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return false;
        if (a[i] > b[i]) strict = true;
    }
    return strict;
}

std::vector<std::size_t> pareto_indices(std::span<const Vec> points) {
    if (points.empty()) return {};
    const std::size_t dim = points.front().size();
    for (const auto& p : points) {
        if (p.size() != dim) throw DimensionError("pareto_filter: mixed dimensions");
    }
    // In lexicographically descending order a point can only be dominated by
    // an earlier one, so a single pass against the kept set suffices.
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(points[b].begin(), points[b].end(), points[a].begin(),
                                            points[a].end());
    });
    std::vector<std::size_t> kept;
    for (std::size_t idx : order) {
        const Vec& p = points[idx];
        bool drop = false;
        for (std::size_t k : kept) {
            if (points[k] == p || dominates(points[k], p)) {
                drop = true;
                break;
            }
        }
        if (!drop) kept.push_back(idx);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

std::vector<Vec> pareto_filter(std::span<const Vec> points) {
    std::vector<Vec> out;
    for (std::size_t i : pareto_indices(points)) {
        out.push_back(points[i]);
    }
    return out;
}

ParetoSet ParetoSet::from_points(std::span<const Vec> points, Vec reference) {
    ParetoSet set;
    set.solutions = pareto_filter(points);
    if (reference.empty() && !points.empty()) {
        reference.assign(points.front().size(), 0.0);
    }
    set.reference = std::move(reference);
    return set;
}

namespace {

using Points = std::vector<Vec>;

double hv2(Points pts, const Vec& ref) {
    std::sort(pts.begin(), pts.end(), [](const Vec& a, const Vec& b) { return a[0] > b[0]; });
    double area = 0.0;
    double best_y = ref[1];
    for (const auto& p : pts) {
        if (p[1] > best_y) {
            area += (p[0] - ref[0]) * (p[1] - best_y);
            best_y = p[1];
        }
    }
    return area;
}

// Hypervolume by slicing along the last objective.
double hv_slice(Points pts, const Vec& ref) {
    const std::size_t d = ref.size();
    if (pts.empty()) return 0.0;
    if (d == 2) return hv2(std::move(pts), ref);
    const std::size_t last = d - 1;
    std::sort(pts.begin(), pts.end(), [&](const Vec& a, const Vec& b) { return a[last] > b[last]; });
    Vec sub_ref(ref.begin(), ref.end() - 1);
    Points active;
    double volume = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        active.emplace_back(pts[i].begin(), pts[i].end() - 1);
        const double top = pts[i][last];
        const double bottom = i + 1 < pts.size() ? pts[i + 1][last] : ref[last];
        if (top > bottom) {
            volume += hv_slice(pareto_filter(active), sub_ref) * (top - bottom);
        }
    }
    return volume;
}

Points above_reference(const ParetoSet& set) {
    Points pts;
    for (const auto& p : set.solutions) {
        if (p.size() != set.reference.size()) {
            throw DimensionError("hypervolume: solution/reference dimension mismatch");
        }
        bool inside = true;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (!(p[i] > set.reference[i])) {
                inside = false;
                break;
            }
        }
        if (inside) pts.push_back(p);
    }
    return pts;
}

} // namespace

double hypervolume_exact(const ParetoSet& set) {
    const std::size_t n = set.reference.size();
    if (n < 2 || n > 4) {
        throw UnsupportedDimension("hypervolume_exact: supports 2 to 4 objectives, got " +
                                   std::to_string(n));
    }
    Points pts = above_reference(set);
    if (pts.empty()) return 0.0;
    return hv_slice(pareto_filter(pts), set.reference);
}

MonteCarloEstimate hypervolume_mc(const ParetoSet& set, std::size_t n_samples, Rng& rng) {
    const Points pts = above_reference(set);
    if (pts.empty() || n_samples == 0) return {};
    const std::size_t n = set.reference.size();
    Vec upper = set.reference;
    for (const auto& p : pts) {
        for (std::size_t i = 0; i < n; ++i) upper[i] = std::max(upper[i], p[i]);
    }
    double box = 1.0;
    for (std::size_t i = 0; i < n; ++i) box *= upper[i] - set.reference[i];

    Vec z(n);
    std::size_t hits = 0;
    for (std::size_t s = 0; s < n_samples; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = rng.uniform(set.reference[i], upper[i]);
        }
        for (const auto& p : pts) {
            bool covered = true;
            for (std::size_t i = 0; i < n; ++i) {
                if (z[i] > p[i]) {
                    covered = false;
                    break;
                }
            }
            if (covered) {
                ++hits;
                break;
            }
        }
    }
    const double frac = static_cast<double>(hits) / static_cast<double>(n_samples);
    return {box * frac, box * std::sqrt(frac * (1.0 - frac) / static_cast<double>(n_samples))};
}

double sparsity(const ParetoSet& set) {
    const auto& pts = set.solutions;
    if (pts.size() < 2) return 0.0;
    const std::size_t n = pts.front().size();
    double total = 0.0;
    std::vector<double> column(pts.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < pts.size(); ++k) column[k] = pts[k][i];
        std::sort(column.begin(), column.end());
        for (std::size_t k = 0; k + 1 < column.size(); ++k) {
            const double gap = column[k + 1] - column[k];
            total += gap * gap;
        }
    }
    return total / static_cast<double>(pts.size() - 1);
}

} // namespace peda
