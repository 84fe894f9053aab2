#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pauselab/tensor.hpp"
#include "pauselab/tokens.hpp"

namespace pauselab {

enum class Precision { Single, Double };

struct ModelConfig {
    int num_layers = 2;
    int num_heads = 4;
    int d_model = 64;
    int d_ff = 256;
    int vocab_size = 0;
    int max_seq_len = 128;
    double init_scale = 0.02;
    Precision precision = Precision::Single;

    /// Throws std::invalid_argument on an inconsistent configuration.
    void validate() const;
};

template <class Real>
struct LayerParams {
    Tensor<Real> ln1_gain, ln1_bias;
    Tensor<Real> w_query, w_key, w_value, w_out_proj;
    Tensor<Real> ln2_gain, ln2_bias;
    Tensor<Real> w_ff1, b_ff1, w_ff2, b_ff2;
};

/// All trainable weights of the decoder-only transformer. Also used as the
/// container for gradients and optimizer momentum (same shapes).
template <class Real>
struct Model {
    ModelConfig config;
    Tensor<Real> token_embeddings;       // vocab_size × d_model
    Tensor<Real> positional_embeddings;  // max_seq_len × d_model
    std::vector<LayerParams<Real>> layers;
    Tensor<Real> lnf_gain, lnf_bias;
    Tensor<Real> w_unembed;  // d_model × vocab_size

    /// Visits every parameter tensor with a stable name, in a fixed order.
    void for_each_tensor(const std::function<void(const std::string&, Tensor<Real>&)>& fn);
    void for_each_tensor(const std::function<void(const std::string&, const Tensor<Real>&)>& fn) const;

    std::size_t num_parameters() const;
};

struct LossValue {
    double mean_nll = 0.0;
    long contributing_positions = 0;
};

/// One training item: a full token sequence with its loss window.
/// loss_lo/loss_hi delimit context positions k (half-open, 0-based) whose
/// next-token prediction contributes to the loss; ignore_set lists the
/// positions inside that window that are excluded.
struct LossItem {
    std::vector<TokenId> ids;
    std::vector<int> ignore_set;
    int loss_lo = 0;
    int loss_hi = 0;
};

template <class Real>
Model<Real> init_params(const ModelConfig& config, std::uint64_t seed);

/// Same shapes as `model`, all entries zero (gradient / momentum buffers).
template <class Real>
Model<Real> zeros_like(const Model<Real>& model);

/// Returns the full seq_len × vocab_size logits matrix.
template <class Real>
Tensor<Real> forward(const Model<Real>& model, const std::vector<TokenId>& ids);

/// Teacher-forced log p(ids[k+1] | ids[0..k]) for each context position k in
/// [lo, hi). Requires 0 <= lo <= hi <= len(ids)-1.
template <class Real>
std::vector<double> token_log_likelihoods(const Model<Real>& model, const std::vector<TokenId>& ids,
                                          int lo, int hi);

template <class Real>
LossValue masked_nll(const Model<Real>& model, const LossItem& item);

/// Accumulates gradients of the batch-mean masked NLL into `grads` (which
/// must be zeroed by the caller) and returns the loss.
template <class Real>
LossValue backward(const Model<Real>& model, const std::vector<LossItem>& batch, Model<Real>& grads);

template <class Real>
struct SgdState {
    double momentum = 0.0;
    double clip_norm = 0.0;     // 0 disables clipping
    double weight_decay = 0.0;  // L2 coupling added to the gradient; skips gains/biases
    Model<Real> velocity;       // allocated lazily when momentum > 0
};

/// In-place SGD update. Returns the pre-clip global gradient norm.
template <class Real>
double sgd_step(Model<Real>& model, const Model<Real>& grads, SgdState<Real>& state, double learning_rate);

/// Convenience wrapper: one backward pass plus one optimizer step.
/// Throws std::runtime_error on a non-finite gradient.
template <class Real>
LossValue backward_and_step(Model<Real>& model, const std::vector<LossItem>& batch,
                            SgdState<Real>& state, double learning_rate);

/// Central finite-difference check of backward() against masked_nll on a
/// sampled subset of each parameter tensor. Returns the max relative error.
template <class Real>
double grad_check(const Model<Real>& model, const LossItem& item, double epsilon,
                  int samples_per_tensor, std::uint64_t seed);

struct DecodeFlags {
    bool ban_pause = false;
};

/// Greedy argmax continuation. Stops at EOS or after max_new tokens; returns
/// prefix + continuation. Optionally records log p(chosen) per emitted token.
template <class Real>
std::vector<TokenId> generate(const Model<Real>& model, const std::vector<TokenId>& prefix_ids,
                              int max_new, DecodeFlags flags = {},
                              std::vector<double>* step_logprobs = nullptr);

}  // namespace pauselab
