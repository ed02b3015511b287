#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "scenevec/cooccur.hpp"
#include "scenevec/errors.hpp"

namespace scenevec {

enum class OutputMode { SumMainContext, MainOnly };

struct TrainConfig {
    int dim = 50;
    double x_max = 100.0;
    double alpha = 0.75;
    double initial_step = 0.05;
    int epochs = 50;
    std::uint64_t seed = 1;
    OutputMode output_mode = OutputMode::SumMainContext;
    int threads = 1;

    /// Throws ConfigError on an out-of-range field.
    void validate() const;
};

/// Clipped power weighting for a co-occurrence count:
/// (x / x_max)^alpha below x_max, 1 from x_max on.
template <typename Scalar>
Scalar cooccur_weight(Scalar x, Scalar x_max, Scalar alpha) {
    if (x < x_max) return std::pow(x / x_max, alpha);
    return Scalar(1);
}

/// Weighted squared error of one nonzero table entry:
/// f(x) * (main . context + main_bias + context_bias - log x)^2.
template <typename DerivedA, typename DerivedB>
double pair_loss(const Eigen::MatrixBase<DerivedA>& main_vec,
                 const Eigen::MatrixBase<DerivedB>& context_vec, double main_bias,
                 double context_bias, double x, double x_max, double alpha) {
    const double residual = main_vec.dot(context_vec) + main_bias + context_bias - std::log(x);
    const double loss = cooccur_weight(x, x_max, alpha) * residual * residual;
    if (!std::isfinite(loss)) throw NumericError("pair loss is not finite");
    return loss;
}

/// Gradients of pair_loss with the constant factor 2 from the squared
/// residual folded into the step size: with g = f(x) * residual, the
/// returned components are g*context, g*main, g, g. The true derivative
/// of pair_loss is exactly twice each component.
struct PairGradients {
    Eigen::VectorXd main_vec;
    Eigen::VectorXd context_vec;
    double main_bias = 0;
    double context_bias = 0;
};

template <typename DerivedA, typename DerivedB>
PairGradients pair_gradients(const Eigen::MatrixBase<DerivedA>& main_vec,
                             const Eigen::MatrixBase<DerivedB>& context_vec, double main_bias,
                             double context_bias, double x, double x_max, double alpha) {
    const double residual = main_vec.dot(context_vec) + main_bias + context_bias - std::log(x);
    const double g = cooccur_weight(x, x_max, alpha) * residual;
    PairGradients grads;
    grads.main_vec = g * context_vec.transpose();
    grads.context_vec = g * main_vec.transpose();
    grads.main_bias = g;
    grads.context_bias = g;
    return grads;
}

/// Main/context vectors and biases plus the per-parameter squared
/// gradient accumulators driving the adaptive step sizes.
struct ModelParams {
    Eigen::MatrixXd main;          // V x d
    Eigen::MatrixXd context;       // V x d
    Eigen::VectorXd main_bias;     // V
    Eigen::VectorXd context_bias;  // V

    Eigen::MatrixXd main_grad_sq;
    Eigen::MatrixXd context_grad_sq;
    Eigen::VectorXd main_bias_grad_sq;
    Eigen::VectorXd context_bias_grad_sq;

    int vocab_size() const { return static_cast<int>(main.rows()); }
    int dim() const { return static_cast<int>(main.cols()); }

    bool operator==(const ModelParams&) const = default;
};

struct TrainReport {
    std::vector<double> epoch_mean_loss;
    double wall_seconds = 0;
    std::uint64_t entries_processed = 0;
};

/// Vectors and biases drawn uniformly from (-0.5/d, +0.5/d); the
/// accumulators start at zero.
ModelParams init_params(int vocab_size, int dim, std::uint64_t seed);

/// Invoked after every epoch (0-based index); wired by the CLI for
/// periodic checkpoints.
using EpochCallback = std::function<void(int epoch, const ModelParams& params)>;

/// Runs epochs [first_epoch, cfg.epochs) of adaptive SGD over the
/// nonzero table entries in seeded-shuffled order. Single-threaded mode
/// is bit-deterministic for a given seed; cfg.threads > 1 updates
/// shared parameters without locks and forfeits that guarantee.
TrainReport train_epochs(ModelParams& params, const CooccurTable& table, const TrainConfig& cfg,
                         int first_epoch = 0, const EpochCallback& after_epoch = {});

/// init_params + train_epochs over a non-empty table with V >= 2.
std::pair<ModelParams, TrainReport> train(const CooccurTable& table, const TrainConfig& cfg);

/// Objective value summed over the nonzero entries (test and report aid).
double total_loss(const ModelParams& params, const CooccurTable& table, double x_max, double alpha);

/// SumMainContext -> main + context elementwise; MainOnly -> main.
Eigen::MatrixXd finalize(const ModelParams& params, OutputMode mode);

/// Full binary training state: config echo, epochs completed, all four
/// parameter blocks, and the gradient accumulators.
struct Checkpoint {
    TrainConfig config;
    int epochs_done = 0;
    ModelParams params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace scenevec
