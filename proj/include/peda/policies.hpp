#pragma once

// Return- and preference-conditioned supervised policies:
//
//   MORvS  single-step MLP on  state (+ w) + average returns-to-go
//   BC     MLP on the last K states (+ w), no return conditioning
//   MODT   causal transformer over interleaved (rtg, state, action) tokens
//
// The "(P)" variants concatenate the preference w to every input before any
// layer; the naive variants only see it through the weighted return.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "peda/core.hpp"
#include "peda/envs.hpp"
#include "peda/nn.hpp"
#include "peda/target.hpp"

namespace peda {

enum class Algo { MORvS, BC, MODT };
enum class RtgMode { Vector, Scalar };

std::string to_string(RtgMode mode);
RtgMode parse_rtg_mode(std::string_view name);

struct PolicyKind {
    Algo algo = Algo::MORvS;
    bool preference_conditioned = true;
    /// Ignored by BC.
    RtgMode rtg_mode = RtgMode::Vector;

    bool uses_returns() const noexcept { return algo != Algo::BC; }
    /// morvs-p | morvs | bc-p | bc | modt-p | modt
    std::string name() const;
    static PolicyKind parse(std::string_view name, RtgMode mode = RtgMode::Vector);

    friend bool operator==(const PolicyKind&, const PolicyKind&) = default;
};

struct PolicyConfig {
    std::size_t hidden_size = 512;
    std::size_t n_layer = 3;
    std::size_t n_head = 1;
    /// Context length K (timesteps).
    std::size_t context = 1;
    std::size_t batch_size = 64;
    double dropout = 0.1;
    double learning_rate = 1e-4;
    double weight_decay = 1e-3;
    std::size_t warmup_steps = 0;
    std::size_t training_steps = 20'000;
    std::uint64_t seed = 0;
    /// Top fraction per preference cell used to fit the return target.
    double target_quantile = 0.1;

    /// Per-algorithm defaults: K = 1/20/20, warm-up 0/4000/10000,
    /// steps 20K/20K/50K for MORvS/BC/MODT.
    static PolicyConfig defaults_for(Algo algo);
    void validate(Algo algo) const;
};

struct EnvDims {
    std::size_t n_obj = 0;
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    std::size_t horizon = 0;
    Vec action_low;
    Vec action_high;

    static EnvDims of(const Environment& env);
    friend bool operator==(const EnvDims&, const EnvDims&) = default;
};

/// A run of consecutive timesteps ending at the step whose action is wanted.
/// `actions` may be one shorter than `states` (the current action is unknown
/// at decision time); `rtgs` are raw (unnormalized) vector returns-to-go.
struct WindowView {
    const Preference* pref = nullptr;
    std::span<const Vec> states;
    std::span<const Vec> actions;
    std::span<const Vec> rtgs;
    std::size_t first_timestep = 0;
};

/// Return conditioning for one timestep: normalized (MORvS: per remaining
/// step), weighted by w, then summed in Scalar mode.
Vec rtg_features(const PolicyKind& kind, std::span<const double> rtg, std::size_t timestep,
                 const Preference& pref, const NormalizationStats& stats, std::size_t horizon);

/// [state, w (if preference-conditioned), rtg (x) w or its sum]. `rtg` must
/// already be normalized.
Vec build_morvs_input(const PolicyKind& kind, std::span<const double> state, const Preference& pref,
                      std::span<const double> rtg);

/// Raw (pre-embedding) MODT tokens for one window, left-padded to K.
struct TokenWindow {
    nn::Matrix rtg;     // K x (rtg width [+ n])
    nn::Matrix state;   // K x (state_dim [+ n])
    nn::Matrix action;  // K x (action_dim [+ n])
    std::vector<nn::Index> timesteps;
    std::vector<std::uint8_t> valid;

    std::size_t token_count() const noexcept { return 3 * valid.size(); }
    std::size_t padding_tokens() const;
};

TokenWindow modt_tokenize(const PolicyKind& kind, const WindowView& window, const NormalizationStats& stats,
                          std::size_t horizon, std::size_t context, std::size_t action_dim);

/// Network inputs for a batch of windows.
struct EncodedBatch {
    std::size_t size = 0;
    nn::Matrix flat;  // MORvS / BC
    nn::Matrix rtg, state, action;  // MODT, (size*K) rows each
    std::vector<nn::Index> timesteps;
    std::vector<std::uint8_t> valid;
};

class ModelError : public std::runtime_error {
public:
    enum class Code { Io, BadVersion, BlobLength, Malformed };
    ModelError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

class PolicyModel {
public:
    PolicyModel(PolicyKind kind, PolicyConfig config, EnvDims dims, NormalizationStats stats);

    const PolicyKind& kind() const noexcept { return kind_; }
    const PolicyConfig& config() const noexcept { return config_; }
    const EnvDims& dims() const noexcept { return dims_; }
    const NormalizationStats& stats() const noexcept { return stats_; }
    nn::ParamStore& params() noexcept { return params_; }
    const nn::ParamStore& params() const noexcept { return params_; }

    std::optional<ReturnTargetModel> target;

    /// Randomly initializes all parameters from `seed`.
    void initialize(std::uint64_t seed);

    std::size_t input_width() const;
    EncodedBatch encode(std::span<const WindowView> windows) const;

    /// Predicted actions, one row per window (MORvS/BC) or per window
    /// position (MODT, size*K rows).
    nn::Var forward(nn::Tape& tape, const EncodedBatch& batch, bool train, Rng& dropout_rng);

    /// Eval-mode action for the last timestep of `window`.
    Vec predict_action(const WindowView& window) const;

    /// Rounds every parameter to float precision (the stored representation).
    void quantize_to_f32();

private:
    nn::Var mlp(nn::Tape& tape, nn::Var x, bool train, Rng& rng) const;
    nn::Var squash(nn::Tape& tape, nn::Var x) const;

    PolicyKind kind_;
    PolicyConfig config_;
    EnvDims dims_;
    NormalizationStats stats_;
    mutable nn::ParamStore params_;
};

struct TrainResult {
    PolicyModel model;
    std::vector<double> loss_log;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(std::size_t step, const std::string& what) : std::runtime_error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

struct TrainOptions {
    /// Fit the preference -> return regression on the training data.
    bool fit_target = true;
    /// Called every `progress_every` steps with (step, loss).
    std::function<void(std::size_t, double)> progress;
    std::size_t progress_every = 1000;
};

/// Action box and horizon for a dataset, from its recorded environment.
EnvDims dataset_dims(const Dataset& dataset);

/// Windows sampled uniformly over trajectories, then uniformly over window
/// positions; each step minimizes MSE on predicted actions.
TrainResult train(const Dataset& dataset, const PolicyKind& kind, const PolicyConfig& config,
                  const TrainOptions& options = {});
TrainResult train(const Dataset& dataset, const PolicyKind& kind, const PolicyConfig& config,
                  const EnvDims& dims, const TrainOptions& options = {});

inline constexpr int kModelFormatVersion = 1;

/// Writes model.json (manifest) and params.bin (little-endian f32) into `dir`.
void save_model(const PolicyModel& model, const std::filesystem::path& dir);
PolicyModel load_model(const std::filesystem::path& dir);

std::string target_to_json(const ReturnTargetModel& target);

} // namespace peda
