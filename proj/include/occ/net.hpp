#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "occ/textenc.hpp"

namespace occ {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Encoder hyperparameters. Desk-scale defaults; the full-scale column in
/// the docs maps hidden_dim=768, max_len=2048 etc. onto the same fields.
struct ModelConfig {
    int hidden_dim = 64;
    int num_hashes = 4;
    int hash_buckets = 512;
    int downsample_rate = 4;
    int num_layers = 2;
    int num_heads = 4;
    int max_len = 128;
    int label_count = 0;
    double dropout_p = 0.10;

    int ffn_dim() const { return 4 * hidden_dim; }
    int head_dim() const { return hidden_dim / num_heads; }
    int slice_dim() const { return hidden_dim / num_hashes; }
    int group_count() const { return (max_len + downsample_rate - 1) / downsample_rate; }

    /// Throws Error("InvalidConfig") on violated shape invariants.
    void validate() const;
};

/// Character hash functions: h_k(cp) = ((cp * mul[k] + add[k]) mod prime) mod buckets.
/// The constants are frozen here and echoed into every checkpoint so that
/// tokenization stays stable across versions.
struct HashSpec {
    std::uint64_t prime;
    std::array<std::uint64_t, 16> mul;
    std::array<std::uint64_t, 16> add;
};

const HashSpec& hash_spec();
int hash_bucket(std::int32_t codepoint, int k, int buckets);

template <typename S>
struct LayerParams {
    Mat<S> attn_wq, attn_wk, attn_wv, attn_wo;  // d x d
    Mat<S> ffn_w1, ffn_b1;                      // d x 4d, 1 x 4d
    Mat<S> ffn_w2, ffn_b2;                      // 4d x d, 1 x d
    Mat<S> ln1_scale, ln1_offset;               // 1 x d
    Mat<S> ln2_scale, ln2_offset;               // 1 x d
};

/// The full learned state. Biases and layer-norm vectors are stored as
/// 1 x n matrices so every tensor can be visited uniformly.
template <typename S>
struct ParamSet {
    std::vector<Mat<S>> hash_tables;  // num_hashes tables of buckets x (d / num_hashes)
    Mat<S> pos_embed;                 // max_len x d
    Mat<S> down_w;                    // d x d projection after group pooling
    Mat<S> embed_ln_scale;            // 1 x d, norm entering the transformer stack
    Mat<S> embed_ln_offset;           // 1 x d
    std::vector<LayerParams<S>> layers;
    Mat<S> pooler_w;  // d x d
    Mat<S> head_w;    // d x label_count
    Mat<S> head_b;    // 1 x label_count

    ParamSet<S> zeros_like() const;

    template <typename T>
    ParamSet<T> cast() const;
};

using Parameters = ParamSet<float>;

/// Enumerates every tensor in a fixed order with a stable name. The same
/// order drives initialization, checkpoints, Adam state and gradient checks.
template <typename S, typename F>
void visit_tensors(ParamSet<S>& params, F&& fn) {
    for (std::size_t k = 0; k < params.hash_tables.size(); ++k) {
        fn("embed.hash." + std::to_string(k), params.hash_tables[k]);
    }
    fn(std::string("embed.pos"), params.pos_embed);
    fn(std::string("down.w"), params.down_w);
    fn(std::string("embed.ln.scale"), params.embed_ln_scale);
    fn(std::string("embed.ln.offset"), params.embed_ln_offset);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const std::string p = "layer." + std::to_string(l) + ".";
        auto& layer = params.layers[l];
        fn(p + "attn.wq", layer.attn_wq);
        fn(p + "attn.wk", layer.attn_wk);
        fn(p + "attn.wv", layer.attn_wv);
        fn(p + "attn.wo", layer.attn_wo);
        fn(p + "ffn.w1", layer.ffn_w1);
        fn(p + "ffn.b1", layer.ffn_b1);
        fn(p + "ffn.w2", layer.ffn_w2);
        fn(p + "ffn.b2", layer.ffn_b2);
        fn(p + "ln1.scale", layer.ln1_scale);
        fn(p + "ln1.offset", layer.ln1_offset);
        fn(p + "ln2.scale", layer.ln2_scale);
        fn(p + "ln2.offset", layer.ln2_offset);
    }
    fn(std::string("pool.w"), params.pooler_w);
    fn(std::string("head.w"), params.head_w);
    fn(std::string("head.b"), params.head_b);
}

template <typename S, typename F>
void visit_tensors(const ParamSet<S>& params, F&& fn) {
    visit_tensors(const_cast<ParamSet<S>&>(params),
                  [&fn](const std::string& name, Mat<S>& m) { fn(name, std::as_const(m)); });
}

/// Weights from a truncated normal (std 0.02, clipped at 2 sigma), biases
/// and layer-norm offsets zero, layer-norm scales one. Deterministic per seed.
template <typename S>
ParamSet<S> init_params(const ModelConfig& config, std::uint64_t seed);

enum class RunMode { train, eval };

template <typename S>
struct ForwardResult {
    Mat<S> probs;   // batch x label_count, strictly in (0,1)
    Mat<S> pooled;  // batch x hidden_dim, pre-head representation
    Mat<S> logits;  // batch x label_count
};

/// Full encoder pass. In train mode dropout masks are sampled from
/// dropout_rng (required when dropout_p > 0); eval mode is deterministic.
template <typename S>
ForwardResult<S> forward(const ParamSet<S>& params, const ModelConfig& config,
                         std::span<const EncodedInput> batch, RunMode mode,
                         std::mt19937_64* dropout_rng = nullptr);

/// Mean binary cross-entropy over batch and labels, evaluated in the
/// numerically stable logit form.
template <typename S>
S bce_loss(const Mat<S>& probs, const Mat<S>& targets);

template <typename S>
struct BackwardResult {
    S loss;
    ParamSet<S> grads;
};

/// Loss plus exact reverse-mode gradients for every tensor. Dropout masks
/// are sampled once per call so the gradients match the sampled subnetwork.
template <typename S>
BackwardResult<S> backward(const ParamSet<S>& params, const ModelConfig& config,
                           std::span<const EncodedInput> batch, const Mat<S>& targets,
                           RunMode mode = RunMode::train,
                           std::mt19937_64* dropout_rng = nullptr);

}  // namespace occ
