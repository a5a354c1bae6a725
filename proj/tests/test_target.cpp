#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "peda/datagen.hpp"
#include "peda/target.hpp"

using namespace peda;

namespace {

Vec episode_return(const Trajectory& t) {
    Vec g(t.steps.front().reward.size(), 0.0);
    for (const auto& s : t.steps)
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s.reward[i];
    return g;
}

// Top-q trajectories per 20-wide preference cell, by scalarized return.
std::vector<std::size_t> retained(const Dataset& ds, double q) {
    std::map<std::vector<long>, std::vector<std::pair<double, std::size_t>>> cells;
    for (std::size_t k = 0; k < ds.trajectories.size(); ++k) {
        const auto& t = ds.trajectories[k];
        std::vector<long> key;
        for (double w : t.preference.weights()) key.push_back(std::min(19L, long(std::floor(w * 20.0))));
        cells[key].push_back({-scalarize(t.preference, episode_return(t)), k});
    }
    std::vector<std::size_t> out;
    for (auto& [key, v] : cells) {
        std::stable_sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.first < b.first; });
        std::size_t keep = std::max<std::size_t>(1, std::size_t(std::ceil(q * double(v.size()) - 1e-12)));
        for (std::size_t i = 0; i < keep; ++i) out.push_back(v[i].second);
    }
    return out;
}

// Two-objective least squares G_i = a_i w_1 + b_i w_2 by Cramer's rule.
std::array<Vec, 2> ls_two(const Dataset& ds, const std::vector<std::size_t>& idx) {
    double s11 = 0, s12 = 0, s22 = 0;
    Vec r1(2, 0.0), r2(2, 0.0);
    for (std::size_t k : idx) {
        const auto& t = ds.trajectories[k];
        double w1 = t.preference[0], w2 = t.preference[1];
        Vec g = episode_return(t);
        s11 += w1 * w1;
        s12 += w1 * w2;
        s22 += w2 * w2;
        for (int i = 0; i < 2; ++i) {
            r1[i] += w1 * g[i];
            r2[i] += w2 * g[i];
        }
    }
    double det = s11 * s22 - s12 * s12;
    std::array<Vec, 2> coef;
    for (int i = 0; i < 2; ++i) coef[i] = {(r1[i] * s22 - r2[i] * s12) / det, (s11 * r2[i] - s12 * r1[i]) / det};
    return coef;
}

Dataset allocate_data(Quality q, std::size_t n, std::uint64_t seed, std::size_t T = 10) {
    GenConfig cfg;
    cfg.env = Environment::from_id("allocate2", T);
    cfg.quality = q;
    cfg.n_traj = n;
    cfg.seed = seed;
    return collect(cfg);
}

} // namespace

TEST_CASE("exact linear data is recovered") {
    Rng rng(1);
    std::vector<Preference> prefs;
    std::vector<Vec> returns;
    for (int i = 0; i < 50; ++i) {
        Preference w = sample_high(rng, 2);
        prefs.push_back(w);
        returns.push_back({10 * w[0], 10 * w[1]});
    }
    ReturnTargetModel m = fit_target_pairs(prefs, returns);
    CHECK(std::abs(m.coefficients[0][0] - 10) < 1e-8);
    CHECK(std::abs(m.coefficients[0][1]) < 1e-8);
    CHECK(std::abs(m.coefficients[1][0]) < 1e-8);
    CHECK(std::abs(m.coefficients[1][1] - 10) < 1e-8);
    Vec p = predict_target(m, Preference({0.3, 0.7}));
    CHECK(std::abs(p[0] - 3) < 1e-8);
    CHECK(std::abs(p[1] - 7) < 1e-8);

    std::vector<Preference> prefs3;
    std::vector<Vec> returns3;
    for (int i = 0; i < 60; ++i) {
        Preference w = sample_high(rng, 3);
        prefs3.push_back(w);
        returns3.push_back({2 * w[0] + 1, 4 * w[1] + 1, w[2] + 1});
    }
    ReturnTargetModel m3 = fit_target_pairs(prefs3, returns3);
    Vec p3 = predict_target(m3, Preference({0.2, 0.3, 0.5}));
    CHECK(std::abs(p3[0] - 1.4) < 1e-8);
    CHECK(std::abs(p3[1] - 2.2) < 1e-8);
    CHECK(std::abs(p3[2] - 1.5) < 1e-8);
}

TEST_CASE("predictions are affine in the preference") {
    Dataset ds = allocate_data(Quality::Amateur, 300, 2);
    ReturnTargetModel m = fit_target(ds, 0.1);
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        Preference a = sample_high(rng, 2), b = sample_high(rng, 2);
        double alpha = rng.uniform();
        Preference mix({alpha * a[0] + (1 - alpha) * b[0], alpha * a[1] + (1 - alpha) * b[1]});
        Vec pa = predict_target(m, a), pb = predict_target(m, b), pm = predict_target(m, mix);
        for (int k = 0; k < 2; ++k) CHECK(pm[k] == doctest::Approx(alpha * pa[k] + (1 - alpha) * pb[k]).epsilon(1e-12));
    }
    Vec big = predict_target(m, Preference({1.0, 0.0}));
    Vec scaled = big;
    for (double& v : scaled) v *= 1.1;
    CHECK(predict_target(m, Preference({1.0, 0.0})) == big);
}

TEST_CASE("expert Allocate fit equals the least-squares oracle") {
    Dataset ds = allocate_data(Quality::Expert, 2000, 1);
    for (double q : {1.0, 0.1}) {
        auto idx = retained(ds, q);
        auto coef = ls_two(ds, idx);
        ReturnTargetModel m = fit_target(ds, q);
        CHECK(m.fit_quantile == q);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) CHECK(m.coefficients[i][j] == doctest::Approx(coef[i][j]).epsilon(1e-6));
        Vec p = predict_target(m, Preference({0.5, 0.5}));
        CHECK(p[0] == doctest::Approx(0.5 * (coef[0][0] + coef[0][1])).epsilon(1e-6));
        // A linear map cannot follow the curved front: the fitted centre sits
        // below the analytic (7.071, 7.071) but well above the chord value 5.
        CHECK(p[0] > 5.0);
        CHECK(p[0] < 7.0711);
    }
}

TEST_CASE("top-quantile filtering dominates the unfiltered fit on amateur data") {
    Dataset ds = allocate_data(Quality::Amateur, 3000, 4, 20);
    ReturnTargetModel best = fit_target(ds, 0.1), all = fit_target(ds, 1.0);
    Vec avg_best(2, 0.0), avg_all(2, 0.0);
    auto grid = simplex_grid(2, 101);
    for (const auto& w : grid) {
        Vec a = predict_target(best, w), b = predict_target(all, w);
        for (int i = 0; i < 2; ++i) {
            avg_best[i] += a[i] / double(grid.size());
            avg_all[i] += b[i] / double(grid.size());
        }
    }
    CHECK(avg_best[0] > avg_all[0]);
    CHECK(avg_best[1] > avg_all[1]);
}

TEST_CASE("fit errors") {
    std::vector<Preference> prefs{Preference({0.5, 0.5}), Preference({0.2, 0.8})};
    std::vector<Vec> returns{{1, 1}, {2, 2}};
    CHECK_THROWS(fit_target_pairs(prefs, returns));
    CHECK_THROWS(fit_target_pairs(std::span<const Preference>{}, std::span<const Vec>{}));
    CHECK_THROWS(fit_target_pairs(prefs, std::vector<Vec>{{1, 1}}));

    Dataset ds = allocate_data(Quality::Expert, 2, 5);
    // Two trajectories cannot support three retained pairs.
    CHECK_THROWS(fit_target(ds, 1.0));
    Dataset empty;
    CHECK_THROWS(fit_target(empty, 0.1));
    CHECK_THROWS(fit_target(allocate_data(Quality::Expert, 50, 6), 0.0));
    CHECK_THROWS_AS(predict_target(fit_target(allocate_data(Quality::Expert, 50, 6), 1.0), Preference({0.2, 0.3, 0.5})),
                    DimensionError);
}
