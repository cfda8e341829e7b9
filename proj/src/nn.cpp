#include "fnode/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>

#include "fnode/errors.hpp"
#include "fnode/rng.hpp"

namespace fnode::nn {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double act_eval(Activation a, double z) {
    return a == Activation::Tanh ? std::tanh(z) : 0.5 * z * (1.0 + std::erf(z * kInvSqrt2));
}

double act_deriv(Activation a, double z, double activated) {
    if (a == Activation::Tanh) return 1.0 - activated * activated;
    const double phi = kInvSqrt2Pi * std::exp(-0.5 * z * z);
    return 0.5 * (1.0 + std::erf(z * kInvSqrt2)) + z * phi;
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "gelu"; }

Activation activation_from_string(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "gelu") return Activation::Gelu;
    throw ConfigError("unknown activation: " + name);
}

MlpModel::MlpModel(std::vector<int> layer_sizes, Activation act)
    : sizes_(std::move(layer_sizes)), act_(act) {
    if (sizes_.size() < 2) throw InvalidInputError("MlpModel: need at least input and output sizes");
    for (int s : sizes_)
        if (s < 1) throw InvalidInputError("MlpModel: layer sizes must be positive");
    build_offsets();
}

void MlpModel::build_offsets() {
    std::size_t total = 0;
    w_off_.clear();
    b_off_.clear();
    for (int l = 0; l + 1 < static_cast<int>(sizes_.size()); ++l) {
        const std::size_t in = static_cast<std::size_t>(sizes_[static_cast<std::size_t>(l)]);
        const std::size_t out = static_cast<std::size_t>(sizes_[static_cast<std::size_t>(l) + 1]);
        w_off_.push_back(total);
        total += in * out;
        b_off_.push_back(total);
        total += out;
    }
    params_.assign(total, 0.0);
}

MlpModel MlpModel::init(std::vector<int> layer_sizes, std::uint64_t seed, Activation act) {
    MlpModel m(std::move(layer_sizes), act);
    Rng rng(seed);
    for (int l = 0; l < m.n_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(m.sizes_[static_cast<std::size_t>(l)]));
        for (double& w : m.weight(l)) w = rng.uniform(-bound, bound);
        // biases stay zero
    }
    return m;
}

std::span<double> MlpModel::weight(int layer) {
    const std::size_t in = static_cast<std::size_t>(sizes_[static_cast<std::size_t>(layer)]);
    const std::size_t out = static_cast<std::size_t>(sizes_[static_cast<std::size_t>(layer) + 1]);
    return {params_.data() + w_off_[static_cast<std::size_t>(layer)], in * out};
}

std::span<const double> MlpModel::weight(int layer) const {
    return const_cast<MlpModel*>(this)->weight(layer);
}

std::span<double> MlpModel::bias(int layer) {
    const std::size_t out = static_cast<std::size_t>(sizes_[static_cast<std::size_t>(layer) + 1]);
    return {params_.data() + b_off_[static_cast<std::size_t>(layer)], out};
}

std::span<const double> MlpModel::bias(int layer) const {
    return const_cast<MlpModel*>(this)->bias(layer);
}

void MlpModel::forward(std::span<const double> input, std::span<double> output) const {
    MlpWorkspace ws(*this);
    ws.forward(*this, input, output);
}

MlpWorkspace::MlpWorkspace(const MlpModel& model) {
    const auto& s = model.layer_sizes();
    acts_.resize(s.size());
    for (std::size_t l = 0; l < s.size(); ++l)
        acts_[l].resize(static_cast<std::size_t>(s[l]));
    preacts_.resize(s.size() - 1);
    for (std::size_t l = 0; l + 1 < s.size(); ++l)
        preacts_[l].resize(static_cast<std::size_t>(s[l + 1]));
    std::size_t widest = 0;
    for (int v : s) widest = std::max(widest, static_cast<std::size_t>(v));
    delta_.resize(widest);
    delta_prev_.resize(widest);
}

void MlpWorkspace::forward(const MlpModel& model, std::span<const double> input,
                           std::span<double> output) {
    if (input.size() != static_cast<std::size_t>(model.input_dim()))
        throw ShapeError("mlp forward: input dim mismatch");
    if (output.size() != static_cast<std::size_t>(model.output_dim()))
        throw ShapeError("mlp forward: output dim mismatch");

    std::copy(input.begin(), input.end(), acts_[0].begin());
    const int layers = model.n_layers();
    for (int l = 0; l < layers; ++l) {
        const auto w = model.weight(l);
        const auto b = model.bias(l);
        const auto& src = acts_[static_cast<std::size_t>(l)];
        auto& pre = preacts_[static_cast<std::size_t>(l)];
        auto& dst = acts_[static_cast<std::size_t>(l) + 1];
        const std::size_t in = src.size(), out = dst.size();
        for (std::size_t o = 0; o < out; ++o) {
            const double* wrow = w.data() + o * in;
            double acc = b[o];
            for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * src[i];
            pre[o] = acc;
            dst[o] = (l + 1 < layers) ? act_eval(model.activation(), acc) : acc;
        }
    }
    std::copy(acts_.back().begin(), acts_.back().end(), output.begin());
}

void MlpWorkspace::backward(const MlpModel& model, std::span<const double> cotangent,
                            std::span<double> grad_accum, std::span<double> input_grad) {
    if (grad_accum.size() != model.n_params())
        throw ShapeError("mlp backward: grad buffer size mismatch");
    const int layers = model.n_layers();
    std::copy(cotangent.begin(), cotangent.end(), delta_.begin());

    for (int l = layers - 1; l >= 0; --l) {
        const auto w = model.weight(l);
        const auto& src = acts_[static_cast<std::size_t>(l)];
        const std::size_t in = src.size();
        const std::size_t out = static_cast<std::size_t>(model.layer_sizes()[static_cast<std::size_t>(l) + 1]);

        double* gw = grad_accum.data() + (w.data() - model.params().data());
        double* gb = gw + in * out;
        std::fill(delta_prev_.begin(), delta_prev_.begin() + static_cast<std::ptrdiff_t>(in), 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            const double d = delta_[o];
            gb[o] += d;
            const double* wrow = w.data() + o * in;
            double* gwrow = gw + o * in;
            for (std::size_t i = 0; i < in; ++i) {
                gwrow[i] += d * src[i];
                delta_prev_[i] += d * wrow[i];
            }
        }
        if (l > 0) {
            const auto& pre = preacts_[static_cast<std::size_t>(l) - 1];
            for (std::size_t i = 0; i < in; ++i)
                delta_prev_[i] *= act_deriv(model.activation(), pre[i], src[i]);
        }
        std::swap(delta_, delta_prev_);
    }
    if (!input_grad.empty()) {
        if (input_grad.size() != static_cast<std::size_t>(model.input_dim()))
            throw ShapeError("mlp backward: input_grad size mismatch");
        std::copy(delta_.begin(), delta_.begin() + static_cast<std::ptrdiff_t>(input_grad.size()),
                  input_grad.begin());
    }
}

std::size_t reduction_block_count(std::size_t rows) {
    if (rows == 0) return 0;
    return std::min<std::size_t>(64, (rows + 63) / 64);
}

namespace {

struct BatchShape {
    std::size_t rows, n_blocks, rows_per_block;
};

BatchShape batch_shape(const Array2d& inputs) {
    BatchShape s;
    s.rows = inputs.rows();
    s.n_blocks = reduction_block_count(s.rows);
    s.rows_per_block = s.n_blocks == 0 ? 0 : (s.rows + s.n_blocks - 1) / s.n_blocks;
    return s;
}

void check_batch(const MlpModel& model, const Array2d& inputs, const Array2d& targets,
                 std::span<const double> row_weights) {
    if (inputs.rows() == 0) throw InvalidInputError("loss_and_grad: empty batch");
    if (inputs.cols() != static_cast<std::size_t>(model.input_dim()))
        throw ShapeError("loss_and_grad: input dim mismatch");
    if (targets.rows() != inputs.rows() ||
        targets.cols() != static_cast<std::size_t>(model.output_dim()))
        throw ShapeError("loss_and_grad: target shape mismatch");
    if (!row_weights.empty() && row_weights.size() != inputs.rows())
        throw ShapeError("loss_and_grad: row_weights length mismatch");
}

}  // namespace

LossGradResult loss_and_grad(const MlpModel& model, const Array2d& inputs, const Array2d& targets,
                             LossForm form, std::span<const double> row_weights) {
    check_batch(model, inputs, targets, row_weights);
    const auto shape = batch_shape(inputs);
    const std::size_t d_out = targets.cols();

    double weight_total = 0.0;
    if (row_weights.empty()) {
        weight_total = static_cast<double>(shape.rows);
    } else {
        for (double w : row_weights) weight_total += w;
    }
    if (!(weight_total > 0.0)) throw InvalidInputError("loss_and_grad: total row weight is zero");

    std::vector<std::vector<double>> block_grads(shape.n_blocks);
    std::vector<double> block_loss(shape.n_blocks, 0.0);
    std::atomic<bool> non_finite{false};

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(shape.n_blocks); ++b) {
        const std::size_t bu = static_cast<std::size_t>(b);
        const std::size_t lo = bu * shape.rows_per_block;
        const std::size_t hi = std::min(shape.rows, lo + shape.rows_per_block);
        auto& grads = block_grads[bu];
        grads.assign(model.n_params(), 0.0);
        MlpWorkspace ws(model);
        std::vector<double> y(d_out), cot(d_out);
        double loss_sum = 0.0;
        for (std::size_t r = lo; r < hi && !non_finite.load(std::memory_order_relaxed); ++r) {
            const double w = row_weights.empty() ? 1.0 : row_weights[r];
            if (w == 0.0) continue;
            ws.forward(model, inputs.row(r), y);
            double sq = 0.0;
            for (std::size_t c = 0; c < d_out; ++c) {
                const double res = y[c] - targets(r, c);
                cot[c] = res;
                sq += res * res;
            }
            if (!std::isfinite(sq)) {
                non_finite.store(true, std::memory_order_relaxed);
                break;
            }
            if (form == LossForm::MeanSquared) {
                loss_sum += w * sq;
                const double scale = 2.0 * w / weight_total;
                for (double& v : cot) v *= scale;
            } else {
                const double norm = std::sqrt(sq);
                loss_sum += w * norm;
                const double scale = norm > 0.0 ? w / (weight_total * norm) : 0.0;
                for (double& v : cot) v *= scale;
            }
            ws.backward(model, cot, grads);
        }
        block_loss[bu] = loss_sum;
    }
    if (non_finite.load()) throw NumericalError("loss_and_grad: non-finite forward value");

    LossGradResult out;
    out.grads.assign(model.n_params(), 0.0);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < shape.n_blocks; ++b) {
        loss_sum += block_loss[b];
        const auto& g = block_grads[b];
        for (std::size_t i = 0; i < g.size(); ++i) out.grads[i] += g[i];
    }
    out.loss = loss_sum / weight_total;
    return out;
}

double batch_loss(const MlpModel& model, const Array2d& inputs, const Array2d& targets,
                  LossForm form, std::span<const double> row_weights) {
    check_batch(model, inputs, targets, row_weights);
    const auto shape = batch_shape(inputs);
    const std::size_t d_out = targets.cols();

    double weight_total = 0.0;
    if (row_weights.empty()) {
        weight_total = static_cast<double>(shape.rows);
    } else {
        for (double w : row_weights) weight_total += w;
    }
    if (!(weight_total > 0.0)) throw InvalidInputError("batch_loss: total row weight is zero");

    std::vector<double> block_loss(shape.n_blocks, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(shape.n_blocks); ++b) {
        const std::size_t bu = static_cast<std::size_t>(b);
        const std::size_t lo = bu * shape.rows_per_block;
        const std::size_t hi = std::min(shape.rows, lo + shape.rows_per_block);
        MlpWorkspace ws(model);
        std::vector<double> y(d_out);
        double loss_sum = 0.0;
        for (std::size_t r = lo; r < hi; ++r) {
            const double w = row_weights.empty() ? 1.0 : row_weights[r];
            if (w == 0.0) continue;
            ws.forward(model, inputs.row(r), y);
            double sq = 0.0;
            for (std::size_t c = 0; c < d_out; ++c) {
                const double res = y[c] - targets(r, c);
                sq += res * res;
            }
            loss_sum += form == LossForm::MeanSquared ? w * sq : w * std::sqrt(sq);
        }
        block_loss[bu] = loss_sum;
    }
    double loss_sum = 0.0;
    for (double v : block_loss) loss_sum += v;
    return loss_sum / weight_total;
}

void forward_batch(const MlpModel& model, const Array2d& inputs, Array2d& outputs) {
    if (inputs.cols() != static_cast<std::size_t>(model.input_dim()))
        throw ShapeError("forward_batch: input dim mismatch");
    outputs = Array2d(inputs.rows(), static_cast<std::size_t>(model.output_dim()));
    const auto shape = batch_shape(inputs);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(shape.n_blocks); ++b) {
        const std::size_t bu = static_cast<std::size_t>(b);
        const std::size_t lo = bu * shape.rows_per_block;
        const std::size_t hi = std::min(shape.rows, lo + shape.rows_per_block);
        MlpWorkspace ws(model);
        for (std::size_t r = lo; r < hi; ++r) ws.forward(model, inputs.row(r), outputs.row(r));
    }
}

AdamState AdamState::init(std::size_t n_params, double lr, double weight_decay) {
    AdamState s;
    s.first_moment.assign(n_params, 0.0);
    s.second_moment.assign(n_params, 0.0);
    s.lr = lr;
    s.weight_decay = weight_decay;
    return s;
}

void adam_step(MlpModel& model, std::span<const double> grads, AdamState& state) {
    auto params = model.params();
    if (grads.size() != params.size() || state.first_moment.size() != params.size())
        throw ShapeError("adam_step: size mismatch");
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    const double decay = 1.0 - state.lr * state.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] *= decay;
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
        v = state.beta2 * v + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

}  // namespace fnode::nn
