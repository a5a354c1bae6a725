#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// A Tape records one forward evaluation. Each op stores its value and a
// closure that pushes the output gradient back to its inputs; backward()
// replays the closures in reverse order and accumulates parameter gradients
// into the owning ParamStore. Tapes are single-use and single-threaded.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "peda/rng.hpp"

namespace peda::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
};

/// Named parameters with paired gradient accumulators. Parameters must all be
/// added before any Tape references them (storage is a vector).
class ParamStore {
public:
    Parameter& add(std::string name, Index rows, Index cols);
    Parameter& get(std::string_view name);
    const Parameter& get(std::string_view name) const;
    bool contains(std::string_view name) const;

    std::vector<Parameter>& all() noexcept { return params_; }
    const std::vector<Parameter>& all() const noexcept { return params_; }

    std::size_t total_size() const;
    void zero_grad();
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in = rows.
    void init_uniform(Parameter& p, Rng& rng);

private:
    std::vector<Parameter> params_;
};

struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
    bool valid() const noexcept { return id != static_cast<std::size_t>(-1); }
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    Var param(Parameter& p);

    const Matrix& value(Var v) const {
        const Node& n = nodes_.at(v.id);
        return n.param ? n.param->value : n.value;
    }
    /// Gradient of the last backward() w.r.t. v (empty if v did not contribute).
    const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Reverse accumulation from a 1x1 loss. Parameter gradients are added to
    /// Parameter::grad (call ParamStore::zero_grad() between steps).
    void backward(Var loss);

    Var matmul(Var a, Var b);
    /// x W + b, with b a 1 x out row broadcast over rows.
    Var affine(Var x, Var w, Var b);
    Var add(Var a, Var b);
    Var relu(Var x);
    Var tanh(Var x);
    /// Row-wise normalization with learned 1 x d gain and bias.
    Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
    Var softmax_rows(Var x);
    /// Inverted dropout; identity when `train` is false or rate is 0.
    Var dropout(Var x, double rate, bool train, Rng& rng);
    /// y[:, j] = x[:, j] * scale[j] + shift[j]
    Var scale_shift_cols(Var x, std::span<const double> scale, std::span<const double> shift);

    /// Scaled dot-product attention over `rows / seq_len` independent
    /// sequences, split into `n_head` column blocks. Query i attends to keys
    /// j <= i with valid[j] set; a query with no admissible key outputs zeros.
    Var causal_attention(Var q, Var k, Var v, std::size_t seq_len, std::size_t n_head,
                         std::span<const std::uint8_t> valid);

    Var gather_rows(Var table, std::span<const Index> rows);
    Var select_rows(Var x, std::span<const Index> rows);
    /// Stacks parts so that output row (r * parts.size() + j) is parts[j] row r.
    Var interleave_rows(std::span<const Var> parts);

    /// Mean squared error over rows with row_mask[r] != 0 (all rows if empty).
    Var mse(Var pred, Var target, std::span<const std::uint8_t> row_mask = {});

    /// Hash of every ReLU activation pattern recorded on this tape.
    std::uint64_t relu_signature() const noexcept { return relu_signature_; }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(Tape&, const Matrix&)> backward;
        Parameter* param = nullptr;
        bool needs_grad = false;
    };

    Var push(Matrix value, bool needs_grad, std::function<void(Tape&, const Matrix&)> back);
    bool needs(Var v) const { return nodes_[v.id].needs_grad; }
    void accumulate(Var v, const Matrix& g);
    template <class Expr>
    void accumulate_expr(Var v, const Expr& g);

    std::vector<Node> nodes_;
    std::uint64_t relu_signature_ = 1469598103934665603ULL;
};

/// Projection weights for one causal self-attention layer.
struct AttentionWeights {
    Var wq, bq, wk, bk, wv, bv, wo, bo;
};

/// Full causal self-attention: projections, masked attention, output projection.
Var causal_self_attention(Tape& tape, Var tokens, const AttentionWeights& w, std::size_t seq_len,
                          std::size_t n_head, std::span<const std::uint8_t> valid);

} // namespace peda::nn
