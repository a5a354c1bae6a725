#pragma once

// Numeric optimum of sum_i w_i c_i sqrt(a_i) over the probability simplex.

#include <algorithm>
#include <cmath>
#include <functional>

#include "peda/core.hpp"

namespace peda::testsupport {

// Euclidean projection onto {a : a_i >= floor, sum a = 1} (sort-based).
inline Vec project_simplex(Vec v, double floor) {
    const double total = 1.0 - floor * double(v.size());
    for (double& x : v) x -= floor;
    Vec u = v;
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        css += u[k];
        double t = (css - total) / double(k + 1);
        if (u[k] - t > 0) theta = t;
    }
    for (double& x : v) x = std::max(0.0, x - theta) + floor;
    return v;
}

inline double allocation_value(const Vec& a, const Preference& w, const Vec& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += w[i] * c[i] * std::sqrt(std::max(0.0, a[i]));
    return s;
}

inline Vec allocation_gradient(const Vec& a, const Preference& w, const Vec& c) {
    Vec g(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) g[i] = w[i] * c[i] / (2.0 * std::sqrt(a[i]));
    return g;
}

// Spectral projected-gradient ascent on sum_i w_i c_i sqrt(a_i), kept a hair
// inside the simplex where the gradient is finite.
inline Vec numeric_best_allocation(const Preference& w, const Vec& c) {
    const double floor = 1e-14;
    const std::size_t n = w.size();
    Vec a(n, 1.0 / double(n));
    Vec g = allocation_gradient(a, w, c);
    double lambda = 1e-2;
    for (int it = 0; it < 100000; ++it) {
        Vec trial(n);
        for (std::size_t i = 0; i < n; ++i) trial[i] = a[i] + lambda * g[i];
        Vec p = project_simplex(trial, floor);
        Vec d(n);
        double slope = 0.0, dmax = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d[i] = p[i] - a[i];
            slope += g[i] * d[i];
            dmax = std::max(dmax, std::abs(d[i]));
        }
        if (dmax < 1e-16) break;
        double f0 = allocation_value(a, w, c), t = 1.0;
        Vec next(n);
        for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
            for (std::size_t i = 0; i < n; ++i) next[i] = a[i] + t * d[i];
            if (allocation_value(next, w, c) >= f0 + 1e-4 * t * slope) break;
        }
        Vec gn = allocation_gradient(next, w, c);
        double ss = 0.0, sy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double step = next[i] - a[i];
            ss += step * step;
            sy -= step * (gn[i] - g[i]);
        }
        a = next;
        g = gn;
        lambda = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e12) : 1e2;
    }
    return a;
}

} // namespace peda::testsupport
