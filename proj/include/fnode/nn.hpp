#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fnode/array.hpp"

namespace fnode::nn {

enum class Activation { Tanh, Gelu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

enum class LossForm { MeanSquared, MeanNorm };

/// Fully connected network. Parameters live in one flat vector laid out
/// [W0, b0, W1, b1, ...] with W row-major (out x in); hidden layers apply the
/// activation, the last layer is affine.
class MlpModel {
  public:
    MlpModel() = default;
    MlpModel(std::vector<int> layer_sizes, Activation act);

    /// Seeded init: W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
    static MlpModel init(std::vector<int> layer_sizes, std::uint64_t seed,
                         Activation act = Activation::Tanh);

    const std::vector<int>& layer_sizes() const { return sizes_; }
    Activation activation() const { return act_; }
    int n_layers() const { return static_cast<int>(sizes_.size()) - 1; }
    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }

    std::size_t n_params() const { return params_.size(); }
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    std::span<double> weight(int layer);
    std::span<const double> weight(int layer) const;
    std::span<double> bias(int layer);
    std::span<const double> bias(int layer) const;

    /// Single-sample forward (allocation-free given an external workspace is
    /// not needed; uses a small internal scratch).
    void forward(std::span<const double> input, std::span<double> output) const;

  private:
    std::vector<int> sizes_;
    Activation act_ = Activation::Tanh;
    std::vector<double> params_;
    std::vector<std::size_t> w_off_, b_off_;

    void build_offsets();
    friend class MlpWorkspace;
};

/// Reverse-mode scratch bound to one model shape. forward() caches the
/// per-layer activations that backward() consumes; one workspace per thread.
class MlpWorkspace {
  public:
    explicit MlpWorkspace(const MlpModel& model);

    void forward(const MlpModel& model, std::span<const double> input, std::span<double> output);

    /// Accumulates (+=) parameter gradients for d(loss)/d(output)=cotangent
    /// into grad_accum and, when non-empty, writes d(loss)/d(input).
    void backward(const MlpModel& model, std::span<const double> cotangent,
                  std::span<double> grad_accum, std::span<double> input_grad = {});

  private:
    std::vector<std::vector<double>> acts_;     // acts_[0] = input, acts_[l+1] = layer l output
    std::vector<std::vector<double>> preacts_;  // pre-activation of hidden layers
    std::vector<double> delta_, delta_prev_;
};

struct LossGradResult {
    double loss = 0.0;
    std::vector<double> grads;
};

/// Mean loss over batch rows and its parameter gradient.
/// MeanSquared: sum_i w_i ||y_i - t_i||^2 / sum_i w_i (squared L2 per row);
/// MeanNorm: the same with the unsquared norm. Empty row_weights means all
/// ones. Row work is distributed over a fixed block grid and block results
/// are reduced in index order, so results are bitwise identical for any
/// thread count.
LossGradResult loss_and_grad(const MlpModel& model, const Array2d& inputs, const Array2d& targets,
                             LossForm form, std::span<const double> row_weights = {});

/// Forward-only batch loss with the same deterministic reduction.
double batch_loss(const MlpModel& model, const Array2d& inputs, const Array2d& targets,
                  LossForm form, std::span<const double> row_weights = {});

/// Row-parallel batch forward.
void forward_batch(const MlpModel& model, const Array2d& inputs, Array2d& outputs);

/// Adam with decoupled weight decay: p *= (1 - lr*wd) before the
/// bias-corrected moment update.
struct AdamState {
    std::vector<double> first_moment, second_moment;
    long step_count = 0;
    double lr = 1e-3;
    double weight_decay = 1e-5;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static AdamState init(std::size_t n_params, double lr, double weight_decay);
};

void adam_step(MlpModel& model, std::span<const double> grads, AdamState& state);

/// Deterministic block grid used by batch reductions (exposed so the serial
/// reference can mirror the exact summation order).
std::size_t reduction_block_count(std::size_t rows);

}  // namespace fnode::nn
