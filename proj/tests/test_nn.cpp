#include <doctest.h>

#include <cmath>
#include <limits>

#include "peda/nn.hpp"
#include "peda/optim.hpp"
#include "support/finite_diff.hpp"

using namespace peda;
using namespace peda::nn;

namespace {

Matrix random_matrix(Rng& rng, Index rows, Index cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

Matrix row(std::initializer_list<double> values) {
    Matrix m(1, static_cast<Index>(values.size()));
    Index j = 0;
    for (double v : values) m(0, j++) = v;
    return m;
}

void add_affine(ParamStore& store, const std::string& name, Index in, Index out, Rng& rng) {
    store.init_uniform(store.add(name + ".w", in, out), rng);
    Parameter& b = store.add(name + ".b", 1, out);
    for (Index i = 0; i < b.value.size(); ++i) b.value.data()[i] = 0.1 * rng.normal();
}

Var affine(Tape& t, ParamStore& s, const std::string& name, Var x) {
    return t.affine(x, t.param(s.get(name + ".w")), t.param(s.get(name + ".b")));
}

AttentionWeights attention_params(Tape& t, ParamStore& s) {
    return {t.param(s.get("q.w")), t.param(s.get("q.b")), t.param(s.get("k.w")), t.param(s.get("k.b")),
            t.param(s.get("v.w")), t.param(s.get("v.b")), t.param(s.get("o.w")), t.param(s.get("o.b"))};
}

ParamStore attention_store(Index d, Rng& rng) {
    ParamStore s;
    for (const char* n : {"q", "k", "v", "o"}) add_affine(s, n, d, d, rng);
    Parameter& g = s.add("ln.gain", 1, d);
    g.value.setOnes();
    s.add("ln.shift", 1, d);
    return s;
}

} // namespace

TEST_CASE("primitive fixed points") {
    Tape t;
    Var x = t.constant(row({0.0, -1.0, 2.0}));
    CHECK(t.value(t.tanh(x))(0, 0) == 0.0);
    CHECK(t.value(t.relu(x))(0, 1) == 0.0);
    CHECK(t.value(t.relu(x))(0, 2) == 2.0);

    Var c = t.constant(Matrix::Constant(2, 4, 3.7));
    const Matrix& sm = t.value(t.softmax_rows(c));
    for (Index i = 0; i < sm.size(); ++i) CHECK(sm.data()[i] == doctest::Approx(0.25).epsilon(1e-15));

    Var y = t.constant(row({1.5, -2.0}));
    CHECK(t.value(t.mse(y, y))(0, 0) == 0.0);

    Rng rng(1);
    Var big = t.constant(random_matrix(rng, 4, 6));
    CHECK(t.value(t.dropout(big, 0.5, false, rng)) == t.value(big));
    CHECK(t.value(t.dropout(big, 0.0, true, rng)) == t.value(big));
}

TEST_CASE("mse gradient vanishes at the target") {
    ParamStore s;
    Parameter& p = s.add("x", 2, 3);
    Rng rng(2);
    p.value = random_matrix(rng, 2, 3);
    Tape t;
    Var loss = t.mse(t.param(p), t.constant(p.value));
    t.backward(loss);
    CHECK(p.grad.isZero(0.0));

    Matrix mask_target = p.value;
    mask_target(1, 0) += 5.0;
    s.zero_grad();
    Tape t2;
    std::vector<std::uint8_t> mask{1, 0};
    Var masked = t2.mse(t2.param(p), t2.constant(mask_target), mask);
    CHECK(t2.value(masked)(0, 0) == 0.0);
}

TEST_CASE("dropout keeps the expectation") {
    Rng rng(3);
    Tape t;
    Var ones = t.constant(Matrix::Ones(200, 200));
    const Matrix& out = t.value(t.dropout(ones, 0.1, true, rng));
    double mean = out.mean();
    CHECK(std::abs(mean - 1.0) < 0.01);
    for (Index i = 0; i < out.size(); ++i) {
        double v = out.data()[i];
        CHECK((v == 0.0 || std::abs(v - 1.0 / 0.9) < 1e-12));
    }
}

TEST_CASE("layer norm, row plumbing and shape errors") {
    Rng rng(4);
    Tape t;
    Var x = t.constant(random_matrix(rng, 5, 8, 3.0));
    Var out = t.layer_norm(x, t.constant(Matrix::Ones(1, 8)), t.constant(Matrix::Zero(1, 8)));
    for (Index r = 0; r < 5; ++r) {
        auto rv = t.value(out).row(r);
        CHECK(std::abs(rv.mean()) < 1e-12);
        CHECK(rv.array().square().mean() == doctest::Approx(1.0).epsilon(1e-4));
    }

    Matrix table(3, 2);
    table << 1, 2, 3, 4, 5, 6;
    Var tab = t.constant(table);
    std::vector<Index> idx{2, 0, 2};
    const Matrix& g = t.value(t.gather_rows(tab, idx));
    CHECK(g(0, 0) == 5.0);
    CHECK(g(1, 1) == 2.0);
    CHECK(g(2, 1) == 6.0);

    Var a = t.constant(Matrix::Constant(2, 1, 1.0));
    Var b = t.constant(Matrix::Constant(2, 1, 2.0));
    Var c = t.constant(Matrix::Constant(2, 1, 3.0));
    std::vector<Var> parts{a, b, c};
    const Matrix& il = t.value(t.interleave_rows(parts));
    REQUIRE(il.rows() == 6);
    CHECK(il(0, 0) == 1.0);
    CHECK(il(1, 0) == 2.0);
    CHECK(il(2, 0) == 3.0);
    CHECK(il(3, 0) == 1.0);

    CHECK_THROWS_AS(t.matmul(t.constant(Matrix::Ones(2, 3)), t.constant(Matrix::Ones(2, 3))), ShapeError);
    CHECK_THROWS_AS(t.add(t.constant(Matrix::Ones(2, 3)), t.constant(Matrix::Ones(3, 2))), ShapeError);
    CHECK_THROWS_AS(t.mse(t.constant(Matrix::Ones(2, 3)), t.constant(Matrix::Ones(2, 2))), ShapeError);
}

TEST_CASE("backward before forward is an error") {
    Tape t;
    CHECK_THROWS(t.backward(Var{}));
    CHECK_THROWS(t.backward(Var{3}));
    Var v = t.constant(Matrix::Ones(2, 2));
    CHECK_THROWS(t.backward(v));
}

TEST_CASE("two-layer MLP gradients match finite differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        ParamStore s;
        add_affine(s, "l0", 6, 16, rng);
        add_affine(s, "l1", 16, 3, rng);
        Matrix x = random_matrix(rng, 8, 6);
        Matrix y = random_matrix(rng, 8, 3, 0.5);
        auto build = [&](Tape& t) {
            Var h = t.relu(affine(t, s, "l0", t.constant(x)));
            Var out = t.tanh(affine(t, s, "l1", h));
            return t.mse(out, t.constant(y));
        };
        auto res = testsupport::check_gradients(s, build, 40, seed);
        CHECK(res.checked + res.skipped == 40 + 16 + 40 + 3);
        CHECK(res.skipped < 10);
        CHECK_MESSAGE(res.max_rel_error < 1e-6, res.worst);
    }
}

TEST_CASE("attention block gradients match finite differences") {
    const Index d = 8;
    const std::size_t seq = 5, n_seq = 2;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed + 100);
        ParamStore s = attention_store(d, rng);
        Matrix tokens = random_matrix(rng, Index(seq * n_seq), d);
        Matrix target = random_matrix(rng, Index(seq * n_seq), d);
        std::vector<std::uint8_t> valid(seq * n_seq, 1);
        valid[0] = 0;
        valid[5] = 0;
        auto build = [&](Tape& t) {
            Var x = t.layer_norm(t.constant(tokens), t.param(s.get("ln.gain")), t.param(s.get("ln.shift")));
            Var y = causal_self_attention(t, x, attention_params(t, s), seq, 1, valid);
            return t.mse(t.add(y, t.constant(tokens)), t.constant(target));
        };
        auto res = testsupport::check_gradients(s, build, 64, seed);
        CHECK(res.checked > 200);
        CHECK_MESSAGE(res.max_rel_error < 1e-5, res.worst);
    }
}

TEST_CASE("causal attention ignores future tokens exactly") {
    const Index d = 6;
    const std::size_t seq = 7;
    Rng rng(9);
    ParamStore s = attention_store(d, rng);
    Matrix tokens = random_matrix(rng, Index(seq), d);
    std::vector<std::uint8_t> valid(seq, 1);

    auto run = [&](const Matrix& in) {
        Tape t;
        Var y = causal_self_attention(t, t.constant(in), attention_params(t, s), seq, 1, valid);
        return Matrix(t.value(y));
    };
    Matrix base = run(tokens);
    for (std::size_t j = 1; j < seq; ++j) {
        Matrix z = tokens;
        z.row(Index(j)).setZero();
        Matrix out = run(z);
        for (std::size_t i = 0; i < j; ++i) CHECK(out.row(Index(i)) == base.row(Index(i)));
        CHECK(out.row(Index(j)) != base.row(Index(j)));
    }

    // A query whose only admissible keys are masked outputs zeros.
    Tape t;
    Var q = t.constant(random_matrix(rng, 3, 4));
    std::vector<std::uint8_t> pad{0, 1, 1};
    const Matrix& out = t.value(t.causal_attention(q, q, q, 3, 2, pad));
    CHECK(out.row(0).isZero(0.0));
    CHECK_FALSE(out.row(1).isZero(0.0));
}

TEST_CASE("forward and backward are bitwise deterministic") {
    auto once = [](std::uint64_t seed) {
        Rng rng(seed);
        ParamStore s = attention_store(8, rng);
        Matrix tokens = random_matrix(rng, 10, 8);
        std::vector<std::uint8_t> valid(10, 1);
        Rng drop(seed + 1);
        Tape t;
        Var y = causal_self_attention(t, t.dropout(t.constant(tokens), 0.1, true, drop), attention_params(t, s), 5, 2,
                                      valid);
        Var loss = t.mse(y, t.constant(Matrix::Zero(10, 8)));
        t.backward(loss);
        return std::make_pair(t.value(loss)(0, 0), Matrix(s.get("q.w").grad));
    };
    auto a = once(4), b = once(4);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    CHECK(once(5).first != a.first);
}

TEST_CASE("param store") {
    ParamStore s;
    s.add("a", 2, 3);
    CHECK_THROWS(s.add("a", 1, 1));
    CHECK_THROWS(s.get("missing"));
    CHECK(s.contains("a"));
    CHECK(s.total_size() == 6);
    Rng rng(1);
    Parameter& w = s.add("w", 100, 10);
    s.init_uniform(w, rng);
    CHECK(w.value.maxCoeff() <= 0.1);
    CHECK(w.value.minCoeff() >= -0.1);
    CHECK(w.grad.rows() == 100);
    CHECK(w.grad.isZero(0.0));
}

TEST_CASE("adamw") {
    SUBCASE("zero gradients and no decay leave parameters unchanged") {
        ParamStore s;
        Rng rng(1);
        Parameter& p = s.add("p", 3, 3);
        p.value = random_matrix(rng, 3, 3);
        Matrix before = p.value;
        AdamW opt(s, {1e-2, 0.0});
        for (int i = 0; i < 10; ++i) opt.step(s);
        CHECK(p.value == before);
        CHECK(opt.steps_taken() == 10);
    }
    SUBCASE("quadratic bowl converges") {
        ParamStore s;
        Parameter& w = s.add("w", 1, 1);
        w.value(0, 0) = 1.0;
        AdamW opt(s, {1e-2, 0.0});
        int steps = 0;
        for (; steps < 2000 && std::abs(w.value(0, 0)) >= 0.1; ++steps) {
            s.zero_grad();
            w.grad(0, 0) = 2.0 * w.value(0, 0);
            opt.step(s);
        }
        CHECK(std::abs(w.value(0, 0)) < 0.1);
        CHECK(steps < 2000);
    }
    SUBCASE("warm-up schedule") {
        ParamStore s;
        s.add("w", 1, 1);
        AdamWConfig cfg;
        cfg.learning_rate = 1e-4;
        cfg.warmup_steps = 4000;
        AdamW opt(s, cfg);
        CHECK(opt.learning_rate_at(1) == doctest::Approx(1e-4 / 4000).epsilon(1e-12));
        CHECK(opt.learning_rate_at(2000) == doctest::Approx(0.5e-4).epsilon(1e-12));
        CHECK(opt.learning_rate_at(4000) == doctest::Approx(1e-4).epsilon(1e-12));
        CHECK(opt.learning_rate_at(90000) == doctest::Approx(1e-4).epsilon(1e-12));
        AdamW flat(s, AdamWConfig{});
        CHECK(flat.learning_rate_at(1) == 1e-4);
    }
    SUBCASE("first step size equals the learning rate") {
        ParamStore s;
        Parameter& w = s.add("w", 1, 2);
        w.value << 0.5, -0.5;
        AdamW opt(s, {1e-3, 0.0});
        w.grad << 3.0, -0.01;
        opt.step(s);
        CHECK(w.value(0, 0) == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
        CHECK(w.value(0, 1) == doctest::Approx(-0.5 + 1e-3).epsilon(1e-6));
    }
    SUBCASE("decoupled weight decay shrinks with zero gradient") {
        ParamStore s;
        Parameter& w = s.add("w", 1, 1);
        w.value(0, 0) = 2.0;
        AdamW opt(s, {1e-2, 0.5});
        opt.step(s);
        CHECK(w.value(0, 0) == doctest::Approx(2.0 * (1.0 - 1e-2 * 0.5)).epsilon(1e-12));
    }
    SUBCASE("non-finite gradients are reported by name") {
        ParamStore s;
        s.add("ok", 1, 1);
        Parameter& bad = s.add("layer.bad", 2, 2);
        AdamW opt(s, AdamWConfig{});
        bad.grad(1, 1) = std::numeric_limits<double>::quiet_NaN();
        try {
            opt.step(s);
            FAIL("expected NonFiniteGradient");
        } catch (const NonFiniteGradient& e) {
            CHECK(std::string(e.what()).find("layer.bad") != std::string::npos);
        }
    }
}
