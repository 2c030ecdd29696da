#include "occ/net.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "occ/errors.hpp"
#include "occ/rng.hpp"

namespace occ {

void ModelConfig::validate() const {
    if (hidden_dim < 1 || num_layers < 1 || num_heads < 1 || num_hashes < 1 ||
        hash_buckets < 1 || max_len < 1) {
        throw_config("InvalidConfig", "model dimensions must be positive");
    }
    if (num_hashes > 16) {
        throw_config("InvalidConfig", "num_hashes exceeds the fixed hash-constant table (16)");
    }
    if (hidden_dim % num_hashes != 0) {
        throw_config("InvalidConfig", "hidden_dim must be divisible by num_hashes");
    }
    if (hidden_dim % num_heads != 0) {
        throw_config("InvalidConfig", "hidden_dim must be divisible by num_heads");
    }
    if (downsample_rate < 1) {
        throw_config("InvalidConfig", "downsample_rate must be >= 1");
    }
    if (label_count < 1) {
        throw_config("InvalidConfig", "label_count must be >= 1");
    }
    if (dropout_p < 0.0 || dropout_p >= 1.0) {
        throw_config("InvalidConfig", "dropout_p must lie in [0,1)");
    }
}

const HashSpec& hash_spec() {
    static const HashSpec spec{
        2147483647ULL,  // 2^31 - 1
        {1175074399ULL, 440535237ULL, 175053825ULL, 2039980155ULL, 667508357ULL, 1018652335ULL,
         1602407671ULL, 1793884193ULL, 375986549ULL, 2041474609ULL, 1856379265ULL, 1058431481ULL,
         2002774809ULL, 121845497ULL, 1731144435ULL, 837909495ULL},
        {1884161903ULL, 732760783ULL, 29764541ULL, 681780837ULL, 2036049989ULL, 922239171ULL,
         1839270451ULL, 1584615135ULL, 1357272543ULL, 640535681ULL, 2247145ULL, 1970910959ULL,
         1532602403ULL, 734674719ULL, 914257839ULL, 284978287ULL},
    };
    return spec;
}

int hash_bucket(std::int32_t codepoint, int k, int buckets) {
    const HashSpec& spec = hash_spec();
    const std::uint64_t cp = static_cast<std::uint64_t>(static_cast<std::uint32_t>(codepoint));
    const std::uint64_t h =
        (cp * spec.mul[static_cast<std::size_t>(k)] + spec.add[static_cast<std::size_t>(k)]) %
        spec.prime;
    return static_cast<int>(h % static_cast<std::uint64_t>(buckets));
}

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kAttnMaskValue = -1e9;

template <typename S>
Mat<S> zeros(Eigen::Index rows, Eigen::Index cols) {
    return Mat<S>::Zero(rows, cols);
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

template <typename S>
S gelu(S x) {
    return S(0.5) * x * (S(1) + std::erf(x * S(kInvSqrt2)));
}

template <typename S>
S gelu_grad(S x) {
    const S phi = S(0.5) * (S(1) + std::erf(x * S(kInvSqrt2)));
    const S pdf = std::exp(S(-0.5) * x * x) * S(kInvSqrt2Pi);
    return phi + x * pdf;
}

template <typename S>
S sigmoid(S x) {
    if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
    const S e = std::exp(x);
    return e / (S(1) + e);
}

/// Inverted-dropout mask: entries are 1/keep with probability keep, else 0.
template <typename S>
Mat<S> sample_dropout_mask(Eigen::Index rows, Eigen::Index cols, double dropout_p,
                           std::mt19937_64& rng) {
    Mat<S> mask(rows, cols);
    const double keep = 1.0 - dropout_p;
    const S scale = S(1.0 / keep);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            mask(r, c) = uniform01(rng) < keep ? scale : S(0);
        }
    }
    return mask;
}

template <typename S>
struct LayerNormTrace {
    Mat<S> xhat;                     // rows x d
    Eigen::Matrix<S, Eigen::Dynamic, 1> ivar;  // rows
};

template <typename S>
Mat<S> layer_norm(const Mat<S>& x, const Mat<S>& scale, const Mat<S>& offset,
                  LayerNormTrace<S>* trace) {
    const Eigen::Index rows = x.rows(), d = x.cols();
    Mat<S> out(rows, d);
    if (trace) {
        trace->xhat.resize(rows, d);
        trace->ivar.resize(rows);
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
        const S mean = x.row(r).mean();
        const S var = (x.row(r).array() - mean).square().mean();
        const S ivar = S(1) / std::sqrt(var + S(kLayerNormEps));
        auto xhat = ((x.row(r).array() - mean) * ivar).matrix();
        out.row(r) = (xhat.array() * scale.row(0).array() + offset.row(0).array()).matrix();
        if (trace) {
            trace->xhat.row(r) = xhat;
            trace->ivar(r) = ivar;
        }
    }
    return out;
}

/// d(loss)/dx for y = xhat*scale + offset, given upstream dy.
template <typename S>
Mat<S> layer_norm_backward(const Mat<S>& dy, const LayerNormTrace<S>& trace, const Mat<S>& scale,
                           Mat<S>& dscale, Mat<S>& doffset) {
    const Eigen::Index rows = dy.rows(), d = dy.cols();
    Mat<S> dx(rows, d);
    for (Eigen::Index r = 0; r < rows; ++r) {
        dscale.row(0).array() += dy.row(r).array() * trace.xhat.row(r).array();
        doffset.row(0).array() += dy.row(r).array();
        auto dxhat = (dy.row(r).array() * scale.row(0).array()).eval();
        const S mean_dxhat = dxhat.mean();
        const S mean_dxhat_xhat = (dxhat * trace.xhat.row(r).array()).mean();
        dx.row(r) = (trace.ivar(r) *
                     (dxhat - mean_dxhat - trace.xhat.row(r).array() * mean_dxhat_xhat))
                        .matrix();
    }
    return dx;
}

template <typename S>
struct LayerTrace {
    Mat<S> x_in;                        // G x d
    Mat<S> q, k, v;                     // G x d
    std::vector<Mat<S>> attn;           // per head, G x G post-softmax
    Mat<S> ctx;                         // G x d (heads concatenated, pre-Wo)
    Mat<S> attn_drop;                   // dropout mask, empty when inactive
    LayerNormTrace<S> ln1;
    Mat<S> x_mid;                       // G x d after first residual + norm
    Mat<S> ffn_pre;                     // G x ffn_dim, pre-GELU
    Mat<S> ffn_act;                     // G x ffn_dim, post-GELU
    Mat<S> ffn_drop;                    // dropout mask, empty when inactive
    LayerNormTrace<S> ln2;
    Mat<S> x_out;                       // G x d
};

template <typename S>
struct ExampleTrace {
    const EncodedInput* input = nullptr;
    Mat<S> embed_drop;                  // T x d dropout mask, empty when inactive
    Mat<S> groups;                      // G x d mask-aware group means
    LayerNormTrace<S> embed_ln;
    Mat<S> x0;                          // G x d after down-projection and norm
    std::vector<int> group_sizes;       // non-pad characters per group
    std::vector<std::uint8_t> group_mask;
    std::vector<LayerTrace<S>> layers;
    Eigen::Matrix<S, 1, Eigen::Dynamic> pooled;  // tanh output, 1 x d
};

template <typename S>
void check_batch(const ModelConfig& config, std::span<const EncodedInput> batch) {
    for (const auto& input : batch) {
        if (static_cast<int>(input.token_ids.size()) != config.max_len ||
            input.attention_mask.size() != input.token_ids.size()) {
            throw_numeric("ShapeMismatch", "encoded input length does not match config.max_len");
        }
    }
}

/// Runs one example through the encoder stack, optionally recording the
/// activations backward needs.
template <typename S>
Eigen::Matrix<S, 1, Eigen::Dynamic> run_example(const ParamSet<S>& params,
                                                const ModelConfig& config,
                                                const EncodedInput& input, bool train_mode,
                                                std::mt19937_64* rng, ExampleTrace<S>* trace) {
    const int T = config.max_len;
    const int d = config.hidden_dim;
    const int G = config.group_count();
    const int r = config.downsample_rate;
    const int dk = config.slice_dim();
    const int heads = config.num_heads;
    const int dh = config.head_dim();
    const S inv_sqrt_dh = S(1) / std::sqrt(S(dh));
    const bool dropout = train_mode && config.dropout_p > 0.0 && rng != nullptr;

    // Character hash embeddings plus learned positions.
    Mat<S> embed(T, d);
    for (int t = 0; t < T; ++t) {
        for (int k = 0; k < config.num_hashes; ++k) {
            const int bucket = hash_bucket(input.token_ids[static_cast<std::size_t>(t)], k,
                                           config.hash_buckets);
            embed.row(t).segment(k * dk, dk) =
                params.hash_tables[static_cast<std::size_t>(k)].row(bucket);
        }
        embed.row(t) += params.pos_embed.row(t);
    }
    if (dropout) {
        Mat<S> mask = sample_dropout_mask<S>(T, d, config.dropout_p, *rng);
        embed.array() *= mask.array();
        if (trace) trace->embed_drop = std::move(mask);
    }

    // Downsample: mask-aware mean over contiguous groups of r characters.
    Mat<S> groups = zeros<S>(G, d);
    std::vector<int> group_sizes(static_cast<std::size_t>(G), 0);
    std::vector<std::uint8_t> group_mask(static_cast<std::size_t>(G), 0);
    for (int g = 0; g < G; ++g) {
        const int lo = g * r;
        const int hi = std::min(T, lo + r);
        int count = 0;
        for (int t = lo; t < hi; ++t) {
            if (input.attention_mask[static_cast<std::size_t>(t)]) {
                groups.row(g) += embed.row(t);
                ++count;
            }
        }
        if (count > 0) {
            groups.row(g) /= S(count);
            group_mask[static_cast<std::size_t>(g)] = 1;
        }
        group_sizes[static_cast<std::size_t>(g)] = count;
    }

    // Project and normalize before the stack; the norm keeps the residual
    // stream at unit scale regardless of the embedding magnitudes.
    LayerNormTrace<S> embed_ln;
    Mat<S> x = layer_norm(Mat<S>(groups * params.down_w), params.embed_ln_scale,
                          params.embed_ln_offset, trace ? &embed_ln : nullptr);
    if (trace) {
        trace->input = &input;
        trace->groups = groups;
        trace->embed_ln = std::move(embed_ln);
        trace->x0 = x;
        trace->group_sizes = group_sizes;
        trace->group_mask = group_mask;
        trace->layers.resize(static_cast<std::size_t>(config.num_layers));
    }

    for (int l = 0; l < config.num_layers; ++l) {
        const auto& layer = params.layers[static_cast<std::size_t>(l)];
        LayerTrace<S>* lt = trace ? &trace->layers[static_cast<std::size_t>(l)] : nullptr;
        if (lt) lt->x_in = x;

        // Multi-head self-attention with additive masking of padded groups.
        Mat<S> q = x * layer.attn_wq;
        Mat<S> k = x * layer.attn_wk;
        Mat<S> v = x * layer.attn_wv;
        Mat<S> ctx(G, d);
        std::vector<Mat<S>> attn_heads;
        if (lt) attn_heads.reserve(static_cast<std::size_t>(heads));
        for (int h = 0; h < heads; ++h) {
            auto qh = q.middleCols(h * dh, dh);
            auto kh = k.middleCols(h * dh, dh);
            auto vh = v.middleCols(h * dh, dh);
            Mat<S> scores = (qh * kh.transpose()) * inv_sqrt_dh;
            for (int j = 0; j < G; ++j) {
                if (!group_mask[static_cast<std::size_t>(j)]) {
                    scores.col(j).array() += S(kAttnMaskValue);
                }
            }
            Mat<S> attn(G, G);
            for (int i = 0; i < G; ++i) {
                const S row_max = scores.row(i).maxCoeff();
                auto ex = (scores.row(i).array() - row_max).exp();
                attn.row(i) = (ex / ex.sum()).matrix();
            }
            ctx.middleCols(h * dh, dh) = attn * vh;
            if (lt) attn_heads.push_back(std::move(attn));
        }
        Mat<S> attn_out = ctx * layer.attn_wo;
        if (lt) {
            lt->q = std::move(q);
            lt->k = std::move(k);
            lt->v = std::move(v);
            lt->attn = std::move(attn_heads);
            lt->ctx = ctx;
        }
        if (dropout) {
            Mat<S> mask = sample_dropout_mask<S>(G, d, config.dropout_p, *rng);
            attn_out.array() *= mask.array();
            if (lt) lt->attn_drop = std::move(mask);
        }

        // Post-norm residual blocks.
        Mat<S> res1 = x + attn_out;
        LayerNormTrace<S> ln1;
        Mat<S> x_mid = layer_norm(res1, layer.ln1_scale, layer.ln1_offset, lt ? &ln1 : nullptr);

        Mat<S> ffn_pre = (x_mid * layer.ffn_w1).rowwise() + layer.ffn_b1.row(0);
        Mat<S> ffn_act = ffn_pre.unaryExpr([](S a) { return gelu(a); });
        Mat<S> ffn_out = (ffn_act * layer.ffn_w2).rowwise() + layer.ffn_b2.row(0);
        if (dropout) {
            Mat<S> mask = sample_dropout_mask<S>(G, d, config.dropout_p, *rng);
            ffn_out.array() *= mask.array();
            if (lt) lt->ffn_drop = std::move(mask);
        }

        Mat<S> res2 = x_mid + ffn_out;
        LayerNormTrace<S> ln2;
        Mat<S> x_out = layer_norm(res2, layer.ln2_scale, layer.ln2_offset, lt ? &ln2 : nullptr);
        if (lt) {
            lt->ln1 = std::move(ln1);
            lt->x_mid = std::move(x_mid);
            lt->ffn_pre = std::move(ffn_pre);
            lt->ffn_act = std::move(ffn_act);
            lt->ln2 = std::move(ln2);
            lt->x_out = x_out;
        }
        x = std::move(x_out);
    }

    // Pooled representation: tanh projection of the first group (holds [CLS]).
    Eigen::Matrix<S, 1, Eigen::Dynamic> pooled =
        (x.row(0) * params.pooler_w).unaryExpr([](S a) { return std::tanh(a); });
    if (trace) trace->pooled = pooled;
    return pooled;
}

/// Accumulates gradients for one example, starting from d(loss)/d(pooled).
template <typename S>
void back_example(const ParamSet<S>& params, const ModelConfig& config,
                  const ExampleTrace<S>& trace,
                  const Eigen::Matrix<S, 1, Eigen::Dynamic>& dpooled, ParamSet<S>& grads) {
    const int T = config.max_len;
    const int d = config.hidden_dim;
    const int G = config.group_count();
    const int r = config.downsample_rate;
    const int dk = config.slice_dim();
    const int heads = config.num_heads;
    const int dh = config.head_dim();
    const S inv_sqrt_dh = S(1) / std::sqrt(S(dh));
    const EncodedInput& input = *trace.input;

    // tanh pooler
    Eigen::Matrix<S, 1, Eigen::Dynamic> dpre =
        (dpooled.array() * (S(1) - trace.pooled.array().square())).matrix();
    const Mat<S>& x_final =
        config.num_layers > 0 ? trace.layers.back().x_out : trace.x0;
    grads.pooler_w += x_final.row(0).transpose() * dpre;
    Mat<S> dx = zeros<S>(G, d);
    dx.row(0) = dpre * params.pooler_w.transpose();

    for (int l = config.num_layers - 1; l >= 0; --l) {
        const auto& layer = params.layers[static_cast<std::size_t>(l)];
        auto& glayer = grads.layers[static_cast<std::size_t>(l)];
        const LayerTrace<S>& lt = trace.layers[static_cast<std::size_t>(l)];

        // ln2
        Mat<S> dres2 =
            layer_norm_backward(dx, lt.ln2, layer.ln2_scale, glayer.ln2_scale, glayer.ln2_offset);

        // ffn branch
        Mat<S> dffn_out = dres2;
        if (lt.ffn_drop.size() > 0) dffn_out.array() *= lt.ffn_drop.array();
        glayer.ffn_w2 += lt.ffn_act.transpose() * dffn_out;
        glayer.ffn_b2.row(0) += dffn_out.colwise().sum();
        Mat<S> dffn_act = dffn_out * layer.ffn_w2.transpose();
        Mat<S> dffn_pre =
            (dffn_act.array() * lt.ffn_pre.unaryExpr([](S a) { return gelu_grad(a); }).array())
                .matrix();
        glayer.ffn_w1 += lt.x_mid.transpose() * dffn_pre;
        glayer.ffn_b1.row(0) += dffn_pre.colwise().sum();
        Mat<S> dx_mid = dres2 + dffn_pre * layer.ffn_w1.transpose();

        // ln1
        Mat<S> dres1 = layer_norm_backward(dx_mid, lt.ln1, layer.ln1_scale, glayer.ln1_scale,
                                           glayer.ln1_offset);

        // attention branch
        Mat<S> dattn_out = dres1;
        if (lt.attn_drop.size() > 0) dattn_out.array() *= lt.attn_drop.array();
        glayer.attn_wo += lt.ctx.transpose() * dattn_out;
        Mat<S> dctx = dattn_out * layer.attn_wo.transpose();

        Mat<S> dq = zeros<S>(G, d), dkm = zeros<S>(G, d), dv = zeros<S>(G, d);
        for (int h = 0; h < heads; ++h) {
            auto vh = lt.v.middleCols(h * dh, dh);
            auto qh = lt.q.middleCols(h * dh, dh);
            auto kh = lt.k.middleCols(h * dh, dh);
            const Mat<S>& attn = lt.attn[static_cast<std::size_t>(h)];
            auto dctx_h = dctx.middleCols(h * dh, dh);

            Mat<S> dattn = dctx_h * vh.transpose();
            dv.middleCols(h * dh, dh) += attn.transpose() * dctx_h;

            // softmax backward, rowwise
            Mat<S> dscores(G, G);
            for (int i = 0; i < G; ++i) {
                const S dot = (dattn.row(i).array() * attn.row(i).array()).sum();
                dscores.row(i) =
                    (attn.row(i).array() * (dattn.row(i).array() - dot)).matrix();
            }
            dq.middleCols(h * dh, dh) += (dscores * kh) * inv_sqrt_dh;
            dkm.middleCols(h * dh, dh) += (dscores.transpose() * qh) * inv_sqrt_dh;
        }

        glayer.attn_wq += lt.x_in.transpose() * dq;
        glayer.attn_wk += lt.x_in.transpose() * dkm;
        glayer.attn_wv += lt.x_in.transpose() * dv;
        Mat<S> dx_in = dres1;  // residual path
        dx_in += dq * layer.attn_wq.transpose();
        dx_in += dkm * layer.attn_wk.transpose();
        dx_in += dv * layer.attn_wv.transpose();
        dx = std::move(dx_in);
    }

    // embedding norm, then down-projection
    Mat<S> dproj = layer_norm_backward(dx, trace.embed_ln, params.embed_ln_scale,
                                       grads.embed_ln_scale, grads.embed_ln_offset);
    grads.down_w += trace.groups.transpose() * dproj;
    Mat<S> dgroups = dproj * params.down_w.transpose();

    // group mean pooling -> characters
    Mat<S> dembed = zeros<S>(T, d);
    for (int g = 0; g < G; ++g) {
        const int count = trace.group_sizes[static_cast<std::size_t>(g)];
        if (count == 0) continue;
        const int lo = g * r;
        const int hi = std::min(T, lo + r);
        const S inv = S(1) / S(count);
        for (int t = lo; t < hi; ++t) {
            if (input.attention_mask[static_cast<std::size_t>(t)]) {
                dembed.row(t) += dgroups.row(g) * inv;
            }
        }
    }
    if (trace.embed_drop.size() > 0) dembed.array() *= trace.embed_drop.array();

    // position embeddings and hash tables (pad positions carry zero grad)
    for (int t = 0; t < T; ++t) {
        if (!input.attention_mask[static_cast<std::size_t>(t)]) continue;
        grads.pos_embed.row(t) += dembed.row(t);
        for (int k = 0; k < config.num_hashes; ++k) {
            const int bucket = hash_bucket(input.token_ids[static_cast<std::size_t>(t)], k,
                                           config.hash_buckets);
            grads.hash_tables[static_cast<std::size_t>(k)].row(bucket) +=
                dembed.row(t).segment(k * dk, dk);
        }
    }
}

/// max(z,0) - z*y + log(1 + exp(-|z|)), elementwise
template <typename S>
S stable_bce_from_logit(S z, S y) {
    const S zmax = z > S(0) ? z : S(0);
    return zmax - z * y + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

template <typename S>
ParamSet<S> ParamSet<S>::zeros_like() const {
    ParamSet<S> out;
    out.hash_tables.reserve(hash_tables.size());
    for (const auto& t : hash_tables) out.hash_tables.push_back(zeros<S>(t.rows(), t.cols()));
    out.pos_embed = zeros<S>(pos_embed.rows(), pos_embed.cols());
    out.down_w = zeros<S>(down_w.rows(), down_w.cols());
    out.embed_ln_scale = zeros<S>(embed_ln_scale.rows(), embed_ln_scale.cols());
    out.embed_ln_offset = zeros<S>(embed_ln_offset.rows(), embed_ln_offset.cols());
    out.layers.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& in = layers[l];
        auto& o = out.layers[l];
        o.attn_wq = zeros<S>(in.attn_wq.rows(), in.attn_wq.cols());
        o.attn_wk = zeros<S>(in.attn_wk.rows(), in.attn_wk.cols());
        o.attn_wv = zeros<S>(in.attn_wv.rows(), in.attn_wv.cols());
        o.attn_wo = zeros<S>(in.attn_wo.rows(), in.attn_wo.cols());
        o.ffn_w1 = zeros<S>(in.ffn_w1.rows(), in.ffn_w1.cols());
        o.ffn_b1 = zeros<S>(in.ffn_b1.rows(), in.ffn_b1.cols());
        o.ffn_w2 = zeros<S>(in.ffn_w2.rows(), in.ffn_w2.cols());
        o.ffn_b2 = zeros<S>(in.ffn_b2.rows(), in.ffn_b2.cols());
        o.ln1_scale = zeros<S>(in.ln1_scale.rows(), in.ln1_scale.cols());
        o.ln1_offset = zeros<S>(in.ln1_offset.rows(), in.ln1_offset.cols());
        o.ln2_scale = zeros<S>(in.ln2_scale.rows(), in.ln2_scale.cols());
        o.ln2_offset = zeros<S>(in.ln2_offset.rows(), in.ln2_offset.cols());
    }
    out.pooler_w = zeros<S>(pooler_w.rows(), pooler_w.cols());
    out.head_w = zeros<S>(head_w.rows(), head_w.cols());
    out.head_b = zeros<S>(head_b.rows(), head_b.cols());
    return out;
}

template <typename S>
template <typename T>
ParamSet<T> ParamSet<S>::cast() const {
    ParamSet<T> out;
    out.hash_tables.reserve(hash_tables.size());
    for (const auto& t : hash_tables) out.hash_tables.push_back(t.template cast<T>());
    out.pos_embed = pos_embed.template cast<T>();
    out.down_w = down_w.template cast<T>();
    out.embed_ln_scale = embed_ln_scale.template cast<T>();
    out.embed_ln_offset = embed_ln_offset.template cast<T>();
    out.layers.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& in = layers[l];
        auto& o = out.layers[l];
        o.attn_wq = in.attn_wq.template cast<T>();
        o.attn_wk = in.attn_wk.template cast<T>();
        o.attn_wv = in.attn_wv.template cast<T>();
        o.attn_wo = in.attn_wo.template cast<T>();
        o.ffn_w1 = in.ffn_w1.template cast<T>();
        o.ffn_b1 = in.ffn_b1.template cast<T>();
        o.ffn_w2 = in.ffn_w2.template cast<T>();
        o.ffn_b2 = in.ffn_b2.template cast<T>();
        o.ln1_scale = in.ln1_scale.template cast<T>();
        o.ln1_offset = in.ln1_offset.template cast<T>();
        o.ln2_scale = in.ln2_scale.template cast<T>();
        o.ln2_offset = in.ln2_offset.template cast<T>();
    }
    out.pooler_w = pooler_w.template cast<T>();
    out.head_w = head_w.template cast<T>();
    out.head_b = head_b.template cast<T>();
    return out;
}

template <typename S>
ParamSet<S> init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    const int d = config.hidden_dim;
    ParamSet<S> params;
    params.hash_tables.resize(static_cast<std::size_t>(config.num_hashes));
    for (auto& table : params.hash_tables) {
        table.resize(config.hash_buckets, config.slice_dim());
    }
    params.pos_embed.resize(config.max_len, d);
    params.down_w.resize(d, d);
    params.embed_ln_scale.resize(1, d);
    params.embed_ln_offset.resize(1, d);
    params.layers.resize(static_cast<std::size_t>(config.num_layers));
    for (auto& layer : params.layers) {
        layer.attn_wq.resize(d, d);
        layer.attn_wk.resize(d, d);
        layer.attn_wv.resize(d, d);
        layer.attn_wo.resize(d, d);
        layer.ffn_w1.resize(d, config.ffn_dim());
        layer.ffn_b1.resize(1, config.ffn_dim());
        layer.ffn_w2.resize(config.ffn_dim(), d);
        layer.ffn_b2.resize(1, d);
        layer.ln1_scale.resize(1, d);
        layer.ln1_offset.resize(1, d);
        layer.ln2_scale.resize(1, d);
        layer.ln2_offset.resize(1, d);
    }
    params.pooler_w.resize(d, d);
    params.head_w.resize(d, config.label_count);
    params.head_b.resize(1, config.label_count);

    std::mt19937_64 rng(mix64(seed));
    std::normal_distribution<double> normal(0.0, 0.02);
    auto truncated = [&rng, &normal]() {
        double x = normal(rng);
        while (std::abs(x) > 0.04) x = normal(rng);  // clip at 2 sigma
        return x;
    };
    visit_tensors(params, [&](const std::string& name, Mat<S>& m) {
        const bool is_bias = name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2");
        const bool is_ln_scale = name.find("ln") != std::string::npos && name.ends_with("scale");
        const bool is_ln_offset = name.find("ln") != std::string::npos && name.ends_with("offset");
        if (is_ln_scale) {
            m.setOnes();
        } else if (is_bias || is_ln_offset) {
            m.setZero();
        } else {
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                for (Eigen::Index c = 0; c < m.cols(); ++c) {
                    m(r, c) = static_cast<S>(truncated());
                }
            }
        }
    });
    return params;
}

template <typename S>
ForwardResult<S> forward(const ParamSet<S>& params, const ModelConfig& config,
                         std::span<const EncodedInput> batch, RunMode mode,
                         std::mt19937_64* dropout_rng) {
    config.validate();
    check_batch<S>(config, batch);
    const auto n = static_cast<Eigen::Index>(batch.size());
    ForwardResult<S> out;
    out.pooled.resize(n, config.hidden_dim);
    out.logits.resize(n, config.label_count);
    out.probs.resize(n, config.label_count);
    const bool train_mode = mode == RunMode::train;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto pooled = run_example<S>(params, config, batch[static_cast<std::size_t>(i)],
                                     train_mode, dropout_rng, nullptr);
        out.pooled.row(i) = pooled;
        out.logits.row(i) = pooled * params.head_w + params.head_b.row(0);
        out.probs.row(i) = out.logits.row(i).unaryExpr([](S z) { return sigmoid(z); });
    }
    return out;
}

template <typename S>
S bce_loss(const Mat<S>& probs, const Mat<S>& targets) {
    if (probs.rows() != targets.rows() || probs.cols() != targets.cols()) {
        throw_numeric("ShapeMismatch", "probs and targets must have identical shapes");
    }
    if (probs.size() == 0) throw_numeric("ShapeMismatch", "empty prediction matrix");
    S total = S(0);
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        for (Eigen::Index j = 0; j < probs.cols(); ++j) {
            const S p = probs(i, j);
            const S z = std::log(p) - std::log1p(-p);  // logit
            total += stable_bce_from_logit(z, targets(i, j));
        }
    }
    return total / S(probs.size());
}

template <typename S>
BackwardResult<S> backward(const ParamSet<S>& params, const ModelConfig& config,
                           std::span<const EncodedInput> batch, const Mat<S>& targets,
                           RunMode mode, std::mt19937_64* dropout_rng) {
    config.validate();
    check_batch<S>(config, batch);
    const auto n = static_cast<Eigen::Index>(batch.size());
    if (targets.rows() != n || targets.cols() != config.label_count) {
        throw_numeric("ShapeMismatch", "target matrix does not match batch x label_count");
    }
    const bool train_mode = mode == RunMode::train;

    BackwardResult<S> out;
    out.grads = params.zeros_like();
    out.loss = S(0);
    const S denom = S(n) * S(config.label_count);

    for (Eigen::Index i = 0; i < n; ++i) {
        ExampleTrace<S> trace;
        auto pooled = run_example<S>(params, config, batch[static_cast<std::size_t>(i)],
                                     train_mode, dropout_rng, &trace);
        Eigen::Matrix<S, 1, Eigen::Dynamic> logits = pooled * params.head_w + params.head_b.row(0);

        Eigen::Matrix<S, 1, Eigen::Dynamic> dlogits(config.label_count);
        for (Eigen::Index j = 0; j < config.label_count; ++j) {
            const S z = logits(j);
            const S y = targets(i, j);
            out.loss += stable_bce_from_logit(z, y);
            dlogits(j) = (sigmoid(z) - y) / denom;
        }

        out.grads.head_w += pooled.transpose() * dlogits;
        out.grads.head_b.row(0) += dlogits;
        Eigen::Matrix<S, 1, Eigen::Dynamic> dpooled = dlogits * params.head_w.transpose();
        back_example<S>(params, config, trace, dpooled, out.grads);
    }
    out.loss /= denom;
    return out;
}

template struct ParamSet<float>;
template struct ParamSet<double>;
template ParamSet<double> ParamSet<float>::cast<double>() const;
template ParamSet<float> ParamSet<double>::cast<float>() const;
template ParamSet<float> init_params<float>(const ModelConfig&, std::uint64_t);
template ParamSet<double> init_params<double>(const ModelConfig&, std::uint64_t);
template ForwardResult<float> forward<float>(const ParamSet<float>&, const ModelConfig&,
                                             std::span<const EncodedInput>, RunMode,
                                             std::mt19937_64*);
template ForwardResult<double> forward<double>(const ParamSet<double>&, const ModelConfig&,
                                               std::span<const EncodedInput>, RunMode,
                                               std::mt19937_64*);
template float bce_loss<float>(const Mat<float>&, const Mat<float>&);
template double bce_loss<double>(const Mat<double>&, const Mat<double>&);
template BackwardResult<float> backward<float>(const ParamSet<float>&, const ModelConfig&,
                                               std::span<const EncodedInput>, const Mat<float>&,
                                               RunMode, std::mt19937_64*);
template BackwardResult<double> backward<double>(const ParamSet<double>&, const ModelConfig&,
                                                 std::span<const EncodedInput>, const Mat<double>&,
                                                 RunMode, std::mt19937_64*);

}  // namespace occ
