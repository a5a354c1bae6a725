#include "peda/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace peda::nn {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

std::string shape(const Matrix& m) {
    return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

} // namespace

// ---------------------------------------------------------------- ParamStore

Parameter& ParamStore::add(std::string name, Index rows, Index cols) {
    if (contains(name)) {
        throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
    }
    params_.push_back(Parameter{std::move(name), Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)});
    return params_.back();
}

Parameter& ParamStore::get(std::string_view name) {
    for (auto& p : params_) {
        if (p.name == name) return p;
    }
    throw std::out_of_range("ParamStore: no parameter '" + std::string(name) + "'");
}

const Parameter& ParamStore::get(std::string_view name) const {
    for (const auto& p : params_) {
        if (p.name == name) return p;
    }
    throw std::out_of_range("ParamStore: no parameter '" + std::string(name) + "'");
}

bool ParamStore::contains(std::string_view name) const {
    return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

std::size_t ParamStore::total_size() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.grad.setZero();
}

void ParamStore::init_uniform(Parameter& p, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(1, p.value.rows())));
    for (Index i = 0; i < p.value.size(); ++i) {
        p.value.data()[i] = rng.uniform(-bound, bound);
    }
}

// ---------------------------------------------------------------- Tape core

Var Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&, const Matrix&)> back) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.backward = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
    Node& n = nodes_[v.id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
        n.grad = g;
    } else {
        n.grad += g;
    }
}

template <class Expr>
void Tape::accumulate_expr(Var v, const Expr& g) {
    Node& n = nodes_[v.id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
        n.grad = g;
    } else {
        n.grad += g;
    }
}

Var Tape::constant(Matrix value) {
    return push(std::move(value), false, nullptr);
}

Var Tape::param(Parameter& p) {
    Var v = push(Matrix(), true, nullptr);
    nodes_[v.id].param = &p;
    return v;
}

void Tape::backward(Var loss) {
    if (nodes_.empty() || !loss.valid() || loss.id >= nodes_.size()) {
        throw std::logic_error("Tape::backward: no forward evaluation recorded");
    }
    const Matrix& out = nodes_[loss.id].value;
    require(out.rows() == 1 && out.cols() == 1, "Tape::backward: loss must be 1x1, got " + shape(out));
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[loss.id].grad = Matrix::Ones(1, 1);
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.grad.size() == 0) continue;
        if (n.param != nullptr) {
            n.param->grad += n.grad;
        }
        if (n.backward) {
            n.backward(*this, n.grad);
        }
    }
}

// ---------------------------------------------------------------- ops

Var Tape::matmul(Var a, Var b) {
    const Matrix& A = value(a);
    const Matrix& B = value(b);
    require(A.cols() == B.rows(), "matmul: " + shape(A) + " x " + shape(B));
    Matrix out = A * B;
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
        if (t.needs(a)) t.accumulate_expr(a, g * t.value(b).transpose());
        if (t.needs(b)) t.accumulate_expr(b, t.value(a).transpose() * g);
    });
}

Var Tape::affine(Var x, Var w, Var b) {
    const Matrix& X = value(x);
    const Matrix& W = value(w);
    const Matrix& B = value(b);
    require(X.cols() == W.rows(), "affine: input " + shape(X) + " weight " + shape(W));
    require(B.rows() == 1 && B.cols() == W.cols(), "affine: bias " + shape(B) + " weight " + shape(W));
    Matrix out(X.rows(), W.cols());
    out.noalias() = X * W;
    out.rowwise() += B.row(0);
    return push(std::move(out), needs(x) || needs(w) || needs(b), [x, w, b](Tape& t, const Matrix& g) {
        if (t.needs(x)) t.accumulate_expr(x, g * t.value(w).transpose());
        if (t.needs(w)) t.accumulate_expr(w, t.value(x).transpose() * g);
        if (t.needs(b)) t.accumulate_expr(b, g.colwise().sum());
    });
}

Var Tape::add(Var a, Var b) {
    const Matrix& A = value(a);
    const Matrix& B = value(b);
    require(A.rows() == B.rows() && A.cols() == B.cols(), "add: " + shape(A) + " + " + shape(B));
    return push(A + B, needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

Var Tape::relu(Var x) {
    const Matrix& X = value(x);
    Matrix out = X.cwiseMax(0.0);
    std::uint64_t h = relu_signature_;
    for (Index i = 0; i < X.size(); ++i) {
        h = (h ^ static_cast<std::uint64_t>(X.data()[i] > 0.0)) * 1099511628211ULL;
    }
    relu_signature_ = h;
    return push(std::move(out), needs(x), [x](Tape& t, const Matrix& g) {
        const Matrix& X = t.value(x);
        t.accumulate_expr(x, (X.array() > 0.0).select(g.array(), 0.0).matrix());
    });
}

Var Tape::tanh(Var x) {
    Matrix out = value(x).array().tanh().matrix();
    const Var self{nodes_.size()};
    return push(std::move(out), needs(x), [x, self](Tape& t, const Matrix& g) {
        const Matrix& Y = t.value(self);
        t.accumulate_expr(x, (g.array() * (1.0 - Y.array().square())).matrix());
    });
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
    const Matrix& X = value(x);
    const Matrix& G = value(gain);
    const Matrix& B = value(bias);
    const Index d = X.cols();
    require(G.rows() == 1 && G.cols() == d && B.rows() == 1 && B.cols() == d,
            "layer_norm: gain/bias must be 1x" + std::to_string(d));
    Matrix xhat(X.rows(), d);
    Eigen::VectorXd inv(X.rows());
    for (Index r = 0; r < X.rows(); ++r) {
        const double mean = X.row(r).mean();
        const double var = (X.row(r).array() - mean).square().mean();
        inv(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (X.row(r).array() - mean) * inv(r);
    }
    Matrix out = (xhat.array().rowwise() * G.row(0).array()).matrix();
    out.rowwise() += B.row(0);
    return push(std::move(out), needs(x) || needs(gain) || needs(bias),
                [x, gain, bias, xhat = std::move(xhat), inv = std::move(inv)](Tape& t, const Matrix& g) {
                    const Index d = xhat.cols();
                    if (t.needs(gain)) t.accumulate_expr(gain, (g.array() * xhat.array()).colwise().sum().matrix());
                    if (t.needs(bias)) t.accumulate_expr(bias, g.colwise().sum());
                    if (t.needs(x)) {
                        const Matrix dxhat = (g.array().rowwise() * t.value(gain).row(0).array()).matrix();
                        Matrix dx(dxhat.rows(), d);
                        const double nd = static_cast<double>(d);
                        for (Index r = 0; r < dxhat.rows(); ++r) {
                            const double s1 = dxhat.row(r).sum();
                            const double s2 = dxhat.row(r).dot(xhat.row(r));
                            dx.row(r) = (inv(r) / nd) *
                                        (nd * dxhat.row(r).array() - s1 - xhat.row(r).array() * s2);
                        }
                        t.accumulate(x, dx);
                    }
                });
}

Var Tape::softmax_rows(Var x) {
    const Matrix& X = value(x);
    Matrix out(X.rows(), X.cols());
    for (Index r = 0; r < X.rows(); ++r) {
        const double m = X.row(r).maxCoeff();
        out.row(r) = (X.row(r).array() - m).exp();
        out.row(r) /= out.row(r).sum();
    }
    const Var self{nodes_.size()};
    return push(std::move(out), needs(x), [x, self](Tape& t, const Matrix& g) {
        const Matrix& Y = t.value(self);
        const Eigen::VectorXd dots = (g.array() * Y.array()).rowwise().sum();
        t.accumulate_expr(x, (Y.array() * (g.array().colwise() - dots.array())).matrix());
    });
}

Var Tape::dropout(Var x, double rate, bool train, Rng& rng) {
    if (!train || rate <= 0.0) return x;
    require(rate < 1.0, "dropout: rate must be below 1");
    const Matrix& X = value(x);
    Matrix mask(X.rows(), X.cols());
    const double keep = 1.0 / (1.0 - rate);
    for (Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = rng.uniform() < rate ? 0.0 : keep;
    }
    Matrix out = X.cwiseProduct(mask);
    return push(std::move(out), needs(x), [x, mask = std::move(mask)](Tape& t, const Matrix& g) {
        t.accumulate_expr(x, g.cwiseProduct(mask));
    });
}

Var Tape::scale_shift_cols(Var x, std::span<const double> scale, std::span<const double> shift) {
    const Matrix& X = value(x);
    require(static_cast<Index>(scale.size()) == X.cols() && static_cast<Index>(shift.size()) == X.cols(),
            "scale_shift_cols: width mismatch");
    Eigen::RowVectorXd s(X.cols()), b(X.cols());
    for (Index j = 0; j < X.cols(); ++j) {
        s(j) = scale[static_cast<std::size_t>(j)];
        b(j) = shift[static_cast<std::size_t>(j)];
    }
    Matrix out = (X.array().rowwise() * s.array()).matrix();
    out.rowwise() += b;
    return push(std::move(out), needs(x), [x, s](Tape& t, const Matrix& g) {
        t.accumulate_expr(x, (g.array().rowwise() * s.array()).matrix());
    });
}

Var Tape::causal_attention(Var q, Var k, Var v, std::size_t seq_len, std::size_t n_head,
                           std::span<const std::uint8_t> valid) {
    const Matrix& Q = value(q);
    const Matrix& K = value(k);
    const Matrix& V = value(v);
    require(Q.rows() == K.rows() && Q.rows() == V.rows() && Q.cols() == K.cols() && Q.cols() == V.cols(),
            "causal_attention: q/k/v shapes differ");
    const Index L = static_cast<Index>(seq_len);
    const Index H = static_cast<Index>(n_head);
    require(L > 0 && Q.rows() % L == 0, "causal_attention: rows not a multiple of seq_len");
    require(H > 0 && Q.cols() % H == 0, "causal_attention: width not divisible by n_head");
    require(valid.size() == static_cast<std::size_t>(Q.rows()), "causal_attention: mask length");
    const Index n_seq = Q.rows() / L;
    const Index dh = Q.cols() / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    // probs[s * H + h] is the L x L attention matrix (zero where masked).
    std::vector<Matrix> probs(static_cast<std::size_t>(n_seq * H));
    Matrix out = Matrix::Zero(Q.rows(), Q.cols());
    for (Index s = 0; s < n_seq; ++s) {
        const Index r0 = s * L;
        for (Index h = 0; h < H; ++h) {
            const Index c0 = h * dh;
            Matrix scores = (Q.block(r0, c0, L, dh) * K.block(r0, c0, L, dh).transpose()) * scale;
            Matrix& P = probs[static_cast<std::size_t>(s * H + h)];
            P = Matrix::Zero(L, L);
            for (Index i = 0; i < L; ++i) {
                double m = -std::numeric_limits<double>::infinity();
                for (Index j = 0; j <= i; ++j) {
                    if (valid[static_cast<std::size_t>(r0 + j)]) m = std::max(m, scores(i, j));
                }
                if (!std::isfinite(m)) continue;
                double z = 0.0;
                for (Index j = 0; j <= i; ++j) {
                    if (valid[static_cast<std::size_t>(r0 + j)]) {
                        P(i, j) = std::exp(scores(i, j) - m);
                        z += P(i, j);
                    }
                }
                P.row(i).head(i + 1) /= z;
            }
            out.block(r0, c0, L, dh).noalias() = P * V.block(r0, c0, L, dh);
        }
    }
    return push(std::move(out), needs(q) || needs(k) || needs(v),
                [q, k, v, L, H, dh, n_seq, scale, probs = std::move(probs)](Tape& t, const Matrix& g) {
                    const Matrix& Q = t.value(q);
                    const Matrix& K = t.value(k);
                    const Matrix& V = t.value(v);
                    Matrix dQ = Matrix::Zero(Q.rows(), Q.cols());
                    Matrix dK = Matrix::Zero(K.rows(), K.cols());
                    Matrix dV = Matrix::Zero(V.rows(), V.cols());
                    for (Index s = 0; s < n_seq; ++s) {
                        const Index r0 = s * L;
                        for (Index h = 0; h < H; ++h) {
                            const Index c0 = h * dh;
                            const Matrix& P = probs[static_cast<std::size_t>(s * H + h)];
                            const auto G = g.block(r0, c0, L, dh);
                            dV.block(r0, c0, L, dh).noalias() = P.transpose() * G;
                            const Matrix dP = G * V.block(r0, c0, L, dh).transpose();
                            const Eigen::VectorXd dots = (dP.array() * P.array()).rowwise().sum();
                            const Matrix dS = (P.array() * (dP.array().colwise() - dots.array())).matrix() * scale;
                            dQ.block(r0, c0, L, dh).noalias() = dS * K.block(r0, c0, L, dh);
                            dK.block(r0, c0, L, dh).noalias() = dS.transpose() * Q.block(r0, c0, L, dh);
                        }
                    }
                    t.accumulate(q, dQ);
                    t.accumulate(k, dK);
                    t.accumulate(v, dV);
                });
}

Var Tape::gather_rows(Var table, std::span<const Index> rows) {
    const Matrix& T = value(table);
    Matrix out(static_cast<Index>(rows.size()), T.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        require(rows[r] >= 0 && rows[r] < T.rows(), "gather_rows: index out of range");
        out.row(static_cast<Index>(r)) = T.row(rows[r]);
    }
    std::vector<Index> idx(rows.begin(), rows.end());
    const Index n_rows = T.rows();
    return push(std::move(out), needs(table), [table, idx = std::move(idx), n_rows](Tape& t, const Matrix& g) {
        Matrix d = Matrix::Zero(n_rows, g.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) d.row(idx[r]) += g.row(static_cast<Index>(r));
        t.accumulate(table, d);
    });
}

Var Tape::select_rows(Var x, std::span<const Index> rows) {
    return gather_rows(x, rows);
}

Var Tape::interleave_rows(std::span<const Var> parts) {
    require(!parts.empty(), "interleave_rows: no parts");
    const Index rows = value(parts[0]).rows();
    const Index cols = value(parts[0]).cols();
    const Index m = static_cast<Index>(parts.size());
    bool any = false;
    for (Var p : parts) {
        require(value(p).rows() == rows && value(p).cols() == cols, "interleave_rows: part shapes differ");
        any = any || needs(p);
    }
    Matrix out(rows * m, cols);
    for (Index r = 0; r < rows; ++r) {
        for (Index j = 0; j < m; ++j) out.row(r * m + j) = value(parts[static_cast<std::size_t>(j)]).row(r);
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return push(std::move(out), any, [ps = std::move(ps), rows, cols, m](Tape& t, const Matrix& g) {
        for (Index j = 0; j < m; ++j) {
            const Var p = ps[static_cast<std::size_t>(j)];
            if (!t.needs(p)) continue;
            Matrix d(rows, cols);
            for (Index r = 0; r < rows; ++r) d.row(r) = g.row(r * m + j);
            t.accumulate(p, d);
        }
    });
}

Var Tape::mse(Var pred, Var target, std::span<const std::uint8_t> row_mask) {
    const Matrix& P = value(pred);
    const Matrix& T = value(target);
    require(P.rows() == T.rows() && P.cols() == T.cols(), "mse: " + shape(P) + " vs " + shape(T));
    require(row_mask.empty() || row_mask.size() == static_cast<std::size_t>(P.rows()), "mse: mask length");
    Eigen::VectorXd w = Eigen::VectorXd::Ones(P.rows());
    if (!row_mask.empty()) {
        for (Index r = 0; r < P.rows(); ++r) w(r) = row_mask[static_cast<std::size_t>(r)] ? 1.0 : 0.0;
    }
    const double count = w.sum() * static_cast<double>(P.cols());
    require(count > 0.0, "mse: no rows selected");
    const Matrix diff = ((P - T).array().colwise() * w.array()).matrix();
    Matrix out(1, 1);
    out(0, 0) = diff.squaredNorm() / count;
    return push(std::move(out), needs(pred) || needs(target),
                [pred, target, diff, count](Tape& t, const Matrix& g) {
                    const double s = 2.0 * g(0, 0) / count;
                    if (t.needs(pred)) t.accumulate_expr(pred, diff * s);
                    if (t.needs(target)) t.accumulate_expr(target, diff * (-s));
                });
}

Var causal_self_attention(Tape& tape, Var tokens, const AttentionWeights& w, std::size_t seq_len,
                          std::size_t n_head, std::span<const std::uint8_t> valid) {
    const Var q = tape.affine(tokens, w.wq, w.bq);
    const Var k = tape.affine(tokens, w.wk, w.bk);
    const Var v = tape.affine(tokens, w.wv, w.bv);
    const Var ctx = tape.causal_attention(q, k, v, seq_len, n_head, valid);
    return tape.affine(ctx, w.wo, w.bo);
}

} // namespace peda::nn
