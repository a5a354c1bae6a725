#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "peda/prefs.hpp"
#include "support/stats.hpp"

using namespace peda;
using peda::testsupport::ks_pvalue;
using peda::testsupport::ks_statistic;

namespace {

// Direct transliteration of the m-spacing estimator with clipped order statistics.
double vasicek_oracle(std::vector<double> x, std::size_t m) {
    std::sort(x.begin(), x.end());
    const double n = double(x.size());
    double sum = 0.0;
    for (std::size_t i = 1; i <= x.size(); ++i) {
        std::size_t hi = std::min(x.size(), i + m);
        std::size_t lo = i > m ? i - m : 1;
        sum += std::log(n / (2.0 * double(m)) * (x[hi - 1] - x[lo - 1]));
    }
    return sum / n;
}

std::vector<Preference> draw(PrefDist d, std::size_t n_obj, std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Preference> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(sample_pref(rng, d, n_obj));
    return out;
}

} // namespace

TEST_CASE("sample_high is uniform on the simplex") {
    Rng rng(1);
    const int N = 100000;
    double m0 = 0, m1 = 0;
    int above = 0;
    for (int i = 0; i < N; ++i) {
        Preference p = sample_high(rng, 2);
        CHECK(std::abs(p[0] + p[1] - 1.0) <= 1e-9);
        m0 += p[0];
        m1 += p[1];
        above += p[0] > 0.9;
    }
    CHECK(std::abs(m0 / N - 0.5) < 0.005);
    CHECK(std::abs(m1 / N - 0.5) < 0.005);
    CHECK(std::abs(double(above) / N - 0.1) < 0.01);
}

TEST_CASE("dirichlet with unit concentration matches the uniform sampler") {
    Rng a(2), b(3);
    std::vector<double> x, y;
    Vec alpha{1, 1};
    for (int i = 0; i < 100000; ++i) {
        x.push_back(sample_dirichlet(a, alpha)[0]);
        y.push_back(sample_high(b, 2)[0]);
    }
    double d = ks_statistic(x, y);
    CHECK(ks_pvalue(d, x.size(), y.size()) > 0.01);
}

TEST_CASE("dirichlet concentration and mean") {
    Rng rng(4);
    Vec huge{1e6, 1e6};
    for (int i = 0; i < 2000; ++i) CHECK(std::abs(sample_dirichlet(rng, huge)[0] - 0.5) < 0.01);

    Vec a{2, 6};
    double m0 = 0;
    for (int i = 0; i < 100000; ++i) m0 += sample_dirichlet(rng, a)[0];
    CHECK(std::abs(m0 / 100000 - 0.25) < 0.005);

    CHECK_THROWS_AS(sample_dirichlet(rng, Vec{0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(sample_dirichlet(rng, Vec{-1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("dirichlet is permutation equivariant") {
    Rng r1(5), r2(6);
    Vec a{2, 5, 9}, p{9, 2, 5};
    Vec m1(3, 0.0), m2(3, 0.0);
    const int N = 100000;
    for (int i = 0; i < N; ++i) {
        Preference x = sample_dirichlet(r1, a), y = sample_dirichlet(r2, p);
        for (int k = 0; k < 3; ++k) {
            m1[k] += x[k] / N;
            m2[k] += y[k] / N;
        }
    }
    CHECK(std::abs(m1[0] - m2[1]) < 0.01);
    CHECK(std::abs(m1[1] - m2[2]) < 0.01);
    CHECK(std::abs(m1[2] - m2[0]) < 0.01);
}

TEST_CASE("sample_pref families") {
    Rng rng(7);
    for (int i = 0; i < 5000; ++i) {
        Preference low = sample_pref(rng, PrefDist::low(), 2);
        CHECK(low[0] >= 1.0 / 3.0 - 0.05);
        CHECK(low[0] <= 2.0 / 3.0 + 0.05);
    }
    PrefDist med = PrefDist::parse("med");
    CHECK(med.alpha_low == 0.0);
    CHECK(med.alpha_high == 1e6);
    CHECK(PrefDist::parse("low").alpha_low == doctest::Approx(1e6 / 3));
    CHECK(PrefDist::parse("high").name() == "high");
    CHECK_THROWS(PrefDist::parse("extreme"));
}

TEST_CASE("rejection sampling honours the constraint") {
    Rng rng(8);
    PrefConstraint c{{0.5, 0.0}, {}};
    for (int i = 0; i < 5000; ++i) CHECK(sample_pref(rng, PrefDist::high(), 2, c)[0] >= 0.5);

    PrefConstraint box{{0.2, 0.1, 0.1}, {0.6, 0.6, 0.6}};
    for (int i = 0; i < 2000; ++i) {
        Preference p = sample_pref(rng, PrefDist::med(), 3, box);
        CHECK(box.accepts(p));
    }
}

TEST_CASE("infeasible constraints are reported") {
    PrefConstraint impossible{{0.6, 0.6}, {}};
    CHECK_THROWS_AS(validate_constraint(impossible, 2), InfeasibleConstraint);
    Rng rng(9);
    CHECK_THROWS_AS(sample_pref(rng, PrefDist::high(), 2, impossible), InfeasibleConstraint);
    CHECK_NOTHROW(validate_constraint(PrefConstraint{{0.1, 0.1}, {}}, 2));
    CHECK_THROWS_AS(validate_constraint(PrefConstraint{{0.1, 0.1, 0.1}, {}}, 2), DimensionError);
}

TEST_CASE("every sampled preference satisfies the simplex invariants") {
    Rng rng(10);
    for (PrefDist d : {PrefDist::high(), PrefDist::med(), PrefDist::low()}) {
        for (std::size_t n : {2u, 3u}) {
            for (int i = 0; i < 2000; ++i) {
                Preference p = sample_pref(rng, d, n);
                double s = 0;
                for (double w : p.weights()) {
                    CHECK(w >= 0.0);
                    s += w;
                }
                CHECK(std::abs(s - 1.0) <= 1e-9);
            }
        }
    }
}

TEST_CASE("vasicek estimator") {
    Rng rng(11);
    std::vector<double> u(50000);
    for (double& x : u) x = rng.uniform();
    auto e = vasicek_entropy(u);
    CHECK_FALSE(e.degenerate);
    CHECK(std::abs(e.value) < 0.05);
    CHECK(e.value == doctest::Approx(vasicek_oracle(u, default_vasicek_window(u.size()))).epsilon(1e-12));

    std::vector<double> g(50000);
    for (double& x : g) x = rng.normal();
    double gauss = 0.5 * std::log(2 * std::numbers::pi * std::numbers::e);
    CHECK(std::abs(vasicek_entropy(g).value - gauss) < 0.05);
    CHECK(vasicek_entropy(g, 50).value == doctest::Approx(vasicek_oracle(g, 50)).epsilon(1e-12));

    std::vector<double> constant(1000, 0.3);
    auto d = vasicek_entropy(constant);
    CHECK(d.degenerate);
    CHECK(std::isfinite(d.value));

    std::vector<double> few(50, 0.1);
    CHECK_THROWS(vasicek_entropy(few, 10));
    CHECK(default_vasicek_window(50000) == 223);
}

TEST_CASE("entropy decreases from High to Med to Low") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        double hi = vasicek_entropy(draw(PrefDist::high(), 3, 50000, seed)).value;
        double med = vasicek_entropy(draw(PrefDist::med(), 3, 50000, seed + 10)).value;
        double low = vasicek_entropy(draw(PrefDist::low(), 3, 50000, seed + 20)).value;
        CHECK(hi > med);
        CHECK(med > low);
    }
}

TEST_CASE("simplex grids") {
    auto three = simplex_grid(2, 3);
    REQUIRE(three.size() == 3);
    CHECK(three[0].weights() == Vec{0, 1});
    CHECK(three[1].weights() == Vec{0.5, 0.5});
    CHECK(three[2].weights() == Vec{1, 0});

    auto g = simplex_grid(2, 501);
    REQUIRE(g.size() == 501);
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(g[k][0] == double(k) / 500.0);
    for (std::size_t k = 1; k < g.size(); ++k) CHECK(g[k][0] - g[k - 1][0] == doctest::Approx(0.002).epsilon(1e-12));

    CHECK(triangular_side_for(325) == 24);
    CHECK(triangular_side_for(351) == 25);
    auto tri = simplex_grid(3, 325);
    CHECK(tri.size() == 325);
    std::set<std::vector<long>> seen;
    for (const auto& p : tri) {
        CHECK(std::abs(p[0] + p[1] + p[2] - 1.0) <= 1e-12);
        seen.insert({std::lround(p[0] * 24), std::lround(p[1] * 24)});
    }
    CHECK(seen.size() == 325);
}
