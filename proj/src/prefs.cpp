#include "peda/prefs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace peda {

PrefDist PrefDist::parse(std::string_view name) {
    if (name == "high") return high();
    if (name == "med") return med();
    if (name == "low") return low();
    throw std::invalid_argument("unknown preference distribution '" + std::string(name) +
                                "' (expected high|med|low)");
}

std::string PrefDist::name() const {
    switch (kind) {
    case Kind::High: return "high";
    case Kind::Med: return "med";
    case Kind::Low: return "low";
    }
    return "high";
}

bool PrefConstraint::accepts(const Preference& pref) const {
    if (!min.empty()) {
        if (min.size() != pref.size()) throw DimensionError("PrefConstraint: min dimension");
        for (std::size_t i = 0; i < min.size(); ++i) {
            if (pref[i] < min[i]) return false;
        }
    }
    if (!max.empty()) {
        if (max.size() != pref.size()) throw DimensionError("PrefConstraint: max dimension");
        for (std::size_t i = 0; i < max.size(); ++i) {
            if (pref[i] > max[i]) return false;
        }
    }
    return true;
}

namespace {

Preference normalized(Vec x) {
    double sum = 0.0;
    for (double v : x) sum += v;
    for (double& v : x) v /= sum;
    return Preference(std::move(x));
}

Preference sample_unconstrained(Rng& rng, const PrefDist& dist, std::size_t n_obj) {
    if (dist.kind == PrefDist::Kind::High) {
        return sample_high(rng, n_obj);
    }
    Vec alpha(n_obj);
    for (double& a : alpha) {
        do {
            a = rng.uniform(dist.alpha_low, dist.alpha_high);
        } while (a <= 0.0);
    }
    return sample_dirichlet(rng, alpha);
}

} // namespace

Preference sample_high(Rng& rng, std::size_t n_obj) {
    if (n_obj < 2) {
        throw std::invalid_argument("sample_high: need at least two objectives");
    }
    Vec x(n_obj);
    double sum;
    do {
        sum = 0.0;
        for (double& v : x) {
            v = rng.exponential();
            sum += v;
        }
    } while (sum <= 0.0);
    return normalized(std::move(x));
}

Preference sample_dirichlet(Rng& rng, std::span<const double> alpha) {
    if (alpha.size() < 2) {
        throw std::invalid_argument("sample_dirichlet: need at least two components");
    }
    for (double a : alpha) {
        if (!(a > 0.0) || !std::isfinite(a)) {
            throw std::invalid_argument("sample_dirichlet: alpha must be positive");
        }
    }
    Vec x(alpha.size());
    double sum;
    do {
        sum = 0.0;
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            x[i] = rng.gamma(alpha[i]);
            sum += x[i];
        }
    } while (sum <= 0.0);
    return normalized(std::move(x));
}

Preference sample_pref(Rng& rng, const PrefDist& dist, std::size_t n_obj,
                       const PrefConstraint& constraint) {
    for (std::size_t attempt = 0; attempt < kMaxConsecutiveRejections; ++attempt) {
        Preference p = sample_unconstrained(rng, dist, n_obj);
        if (constraint.accepts(p)) {
            return p;
        }
    }
    throw InfeasibleConstraint("sample_pref: constraint rejected " +
                               std::to_string(kMaxConsecutiveRejections) +
                               " consecutive samples");
}

void validate_constraint(const PrefConstraint& constraint, std::size_t n_obj,
                         std::size_t trials, std::uint64_t seed) {
    if (constraint.trivial()) return;
    if ((!constraint.min.empty() && constraint.min.size() != n_obj) ||
        (!constraint.max.empty() && constraint.max.size() != n_obj)) {
        throw DimensionError("PrefConstraint: bounds do not match objective count");
    }
    Rng rng(seed);
    for (std::size_t i = 0; i < trials; ++i) {
        if (constraint.accepts(sample_high(rng, n_obj))) return;
    }
    throw InfeasibleConstraint("preference constraint accepted none of " +
                               std::to_string(trials) + " uniform trial samples");
}

std::size_t triangular_side_for(std::size_t count) {
    std::size_t best = 1;
    std::size_t best_gap = std::numeric_limits<std::size_t>::max();
    for (std::size_t m = 1;; ++m) {
        const std::size_t nodes = (m + 1) * (m + 2) / 2;
        const std::size_t gap = nodes > count ? nodes - count : count - nodes;
        if (gap < best_gap) {
            best_gap = gap;
            best = m;
        }
        if (nodes > count) break;
    }
    return best;
}

std::vector<Preference> simplex_grid(std::size_t n_obj, std::size_t count) {
    if (count < 2) {
        throw std::invalid_argument("simplex_grid: count must be at least 2");
    }
    std::vector<Preference> grid;
    if (n_obj == 2) {
        grid.reserve(count);
        const double denom = static_cast<double>(count - 1);
        for (std::size_t k = 0; k < count; ++k) {
            const double w = static_cast<double>(k) / denom;
            grid.emplace_back(Vec{w, 1.0 - w});
        }
        return grid;
    }
    if (n_obj == 3) {
        const std::size_t m = triangular_side_for(count);
        const double denom = static_cast<double>(m);
        for (std::size_t i = 0; i <= m; ++i) {
            for (std::size_t j = 0; i + j <= m; ++j) {
                const std::size_t k = m - i - j;
                grid.emplace_back(Vec{static_cast<double>(i) / denom,
                                      static_cast<double>(j) / denom,
                                      static_cast<double>(k) / denom});
            }
        }
        return grid;
    }
    throw std::invalid_argument("simplex_grid: only 2 or 3 objectives are supported");
}

std::size_t default_vasicek_window(std::size_t n_samples) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n_samples))));
}

EntropyEstimate vasicek_entropy(std::span<const double> samples, std::size_t window) {
    const std::size_t n = samples.size();
    const std::size_t m = window == 0 ? default_vasicek_window(n) : window;
    if (n < 10 * m || n < 2) {
        throw std::invalid_argument("vasicek_entropy: need at least 10*window samples");
    }
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    const double scale = static_cast<double>(n) / (2.0 * static_cast<double>(m));
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t hi = std::min(n - 1, i + m);
        const std::size_t lo = i >= m ? i - m : 0;
        const double spacing = x[hi] - x[lo];
        if (!(spacing > 0.0)) {
            return {0.0, true};
        }
        acc += std::log(scale * spacing);
    }
    return {acc / static_cast<double>(n), false};
}

EntropyEstimate vasicek_entropy(std::span<const Preference> samples, std::size_t window) {
    if (samples.empty()) {
        throw std::invalid_argument("vasicek_entropy: no samples");
    }
    const std::size_t n_obj = samples.front().size();
    EntropyEstimate total;
    std::vector<double> coord(samples.size());
    for (std::size_t d = 0; d + 1 < n_obj; ++d) {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            coord[i] = samples[i][d];
        }
        const EntropyEstimate e = vasicek_entropy(coord, window);
        if (e.degenerate) return e;
        total.value += e.value;
    }
    return total;
}

} // namespace peda
