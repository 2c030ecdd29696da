#include <algorithm>
#include <cmath>
#include <numeric>

#include "occ/errors.hpp"
#include "occ/model.hpp"
#include "occ/rng.hpp"

namespace occ {

namespace {

// Seed-derivation keys for the independent RNG streams inside train().
constexpr std::uint64_t kShuffleStream = 11;
constexpr std::uint64_t kAugmentStream = 12;
constexpr std::uint64_t kDropoutStream = 13;

struct AdamState {
    Parameters m;
    Parameters v;
    long step = 0;
};

void adam_update(Parameters& params, const Parameters& grads, AdamState& state,
                 const TrainConfig& cfg) {
    ++state.step;
    const float b1 = static_cast<float>(cfg.adam_beta1);
    const float b2 = static_cast<float>(cfg.adam_beta2);
    const float eps = static_cast<float>(cfg.adam_epsilon);
    const float lr = static_cast<float>(cfg.learning_rate);
    const float bc1 = 1.0f - std::pow(b1, static_cast<float>(state.step));
    const float bc2 = 1.0f - std::pow(b2, static_cast<float>(state.step));

    auto* grad_tensors = &grads;
    auto* m_tensors = &state.m;
    auto* v_tensors = &state.v;
    std::vector<Mat<float>*> g_list, m_list, v_list;
    visit_tensors(const_cast<Parameters&>(*grad_tensors),
                  [&](const std::string&, Mat<float>& t) { g_list.push_back(&t); });
    visit_tensors(*m_tensors, [&](const std::string&, Mat<float>& t) { m_list.push_back(&t); });
    visit_tensors(*v_tensors, [&](const std::string&, Mat<float>& t) { v_list.push_back(&t); });
    std::size_t i = 0;
    visit_tensors(params, [&](const std::string&, Mat<float>& theta) {
        Mat<float>& g = *g_list[i];
        Mat<float>& m = *m_list[i];
        Mat<float>& v = *v_list[i];
        m = b1 * m + (1.0f - b1) * g;
        v = (b2 * v.array() + (1.0f - b2) * g.array().square()).matrix();
        auto m_hat = m.array() / bc1;
        auto v_hat = v.array() / bc2;
        theta.array() -= lr * m_hat / (v_hat.sqrt() + eps);
        ++i;
    });
}

Mat<float> targets_matrix(const CleanDataset& data, std::span<const std::size_t> indices,
                          const LabelSpace& space) {
    Mat<float> targets = Mat<float>::Zero(static_cast<Eigen::Index>(indices.size()),
                                          static_cast<Eigen::Index>(space.size()));
    for (std::size_t row = 0; row < indices.size(); ++row) {
        for (int idx : target_indices(data.records[indices[row]].targets, space)) {
            targets(static_cast<Eigen::Index>(row), idx) = 1.0f;
        }
    }
    return targets;
}

std::vector<EncodedInput> encode_plain(const CleanDataset& data, int max_len) {
    std::vector<EncodedInput> encoded;
    encoded.reserve(data.records.size());
    for (const auto& rec : data.records) {
        encoded.push_back(encode(rec.lang, rec.text, static_cast<std::size_t>(max_len)));
    }
    return encoded;
}

std::vector<EncodedInput> encode_inputs(std::span<const LangText> inputs, int max_len) {
    std::vector<EncodedInput> encoded;
    encoded.reserve(inputs.size());
    for (const auto& [lang, text] : inputs) {
        encoded.push_back(encode(lang, text, static_cast<std::size_t>(max_len)));
    }
    return encoded;
}

void verify_digest(const Checkpoint& ckpt, const LabelSpace& space) {
    if (ckpt.label_space_digest != space.digest()) {
        throw_data("LabelSpaceMismatch",
                   "checkpoint was trained against a different label space (digest " +
                       ckpt.label_space_digest + " vs " + space.digest() + ")");
    }
}

Checkpoint run_training(Parameters params, const CleanDataset& train_set,
                        const CleanDataset& val_set, const LabelSpace& space,
                        const ModelConfig& mcfg, const TrainConfig& tcfg, double initial_best,
                        const EpochLogFn& log) {
    if (train_set.records.empty() || val_set.records.empty()) {
        throw_data("EmptyDataset", "training and validation sets must be non-empty");
    }

    Checkpoint best;
    best.config = mcfg;
    best.params = params;
    best.label_space_digest = space.digest();
    best.best_val_accuracy = initial_best;
    best.meta.seed = tcfg.rng_seed;
    best.meta.epochs_seen = 0;
    bool have_best = false;

    AdamState adam;
    adam.m = params.zeros_like();
    adam.v = params.zeros_like();

    std::vector<std::size_t> order(train_set.records.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        auto shuffle_rng = keyed_rng(tcfg.rng_seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)});
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tcfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
            std::vector<std::size_t> batch_idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(end));

            // Augmentation and language dropout are keyed per (epoch, record)
            // so the stream does not depend on batch composition.
            std::vector<EncodedInput> batch;
            batch.reserve(batch_idx.size());
            for (std::size_t idx : batch_idx) {
                const auto& rec = train_set.records[idx];
                auto rec_rng = keyed_rng(tcfg.augment.rng_seed,
                                         {kAugmentStream, static_cast<std::uint64_t>(epoch),
                                          static_cast<std::uint64_t>(idx)});
                const std::string text = augment(rec.text, tcfg.augment, rec_rng);
                const Lang lang = apply_language_dropout(rec.lang, tcfg.p_lang_unknown, rec_rng);
                batch.push_back(encode(lang, text, static_cast<std::size_t>(mcfg.max_len)));
            }
            const Mat<float> targets = targets_matrix(train_set, batch_idx, space);

            auto dropout_rng = keyed_rng(tcfg.rng_seed, {kDropoutStream,
                                                         static_cast<std::uint64_t>(epoch),
                                                         static_cast<std::uint64_t>(batches)});
            auto result = backward<float>(params, mcfg, batch, targets, RunMode::train,
                                          &dropout_rng);
            if (!std::isfinite(result.loss)) {
                throw_numeric("NonFiniteLoss",
                              "loss became non-finite at epoch " + std::to_string(epoch) +
                                  ", batch " + std::to_string(batches) +
                                  "; try a lower learning rate");
            }
            adam_update(params, result.grads, adam, tcfg);
            epoch_loss += result.loss;
            ++batches;
        }
        epoch_loss /= static_cast<double>(std::max<std::size_t>(batches, 1));

        const double val_acc = exact_match_accuracy(params, mcfg, space, val_set, 0.5);
        const bool improved = !have_best ? true : val_acc > best.best_val_accuracy;
        if (improved) {
            best.params = params;
            best.best_val_accuracy = val_acc;
            best.meta.epochs_seen = epoch;
            have_best = true;
            if (!tcfg.checkpoint_path.empty()) save_checkpoint(best, tcfg.checkpoint_path);
        }
        if (log) log(epoch, epoch_loss, val_acc, improved);
    }
    return best;
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1) throw_config("InvalidConfig", "batch_size must be >= 1");
    if (max_epochs < 0) throw_config("InvalidConfig", "max_epochs must be >= 0");
    if (!(learning_rate > 0.0)) throw_config("InvalidConfig", "learning_rate must be > 0");
    if (p_lang_unknown < 0.0 || p_lang_unknown > 1.0) {
        throw_config("InvalidConfig", "p_lang_unknown must lie in [0,1]");
    }
    augment.validate();
}

Checkpoint train(const CleanDataset& train_set, const CleanDataset& val_set,
                 const LabelSpace& space, const ModelConfig& mcfg, const TrainConfig& tcfg,
                 const EpochLogFn& log) {
    ModelConfig cfg = mcfg;
    cfg.label_count = static_cast<int>(space.size());
    cfg.validate();
    tcfg.validate();
    Parameters params = init_params<float>(cfg, tcfg.rng_seed);
    Checkpoint ckpt =
        run_training(std::move(params), train_set, val_set, space, cfg, tcfg, 0.0, log);
    if (ckpt.meta.epochs_seen == 0 && !tcfg.checkpoint_path.empty()) {
        // No epoch ran (max_epochs == 0): persist the initialized model.
        save_checkpoint(ckpt, tcfg.checkpoint_path);
    }
    return ckpt;
}

Checkpoint finetune(const Checkpoint& ckpt, const CleanDataset& new_data, const LabelSpace& space,
                    const TrainConfig& tcfg, double val_frac, const EpochLogFn& log) {
    verify_digest(ckpt, space);
    tcfg.validate();
    if (new_data.records.empty()) throw_data("EmptyDataset", "finetune data must be non-empty");
    for (const auto& rec : new_data.records) {
        for (const auto& code : rec.targets) {
            if (!space.contains(code)) {
                throw_data("LabelSpaceMismatch",
                           "finetune record uses code '" + code.digits() +
                               "' outside the checkpoint's label space");
            }
        }
    }
    if (tcfg.max_epochs == 0) {
        Checkpoint out = ckpt;
        if (!tcfg.checkpoint_path.empty()) save_checkpoint(out, tcfg.checkpoint_path);
        return out;
    }
    if (val_frac <= 0.0 || val_frac >= 1.0) {
        throw_config("InvalidConfig", "finetune val_frac must lie in (0,1)");
    }

    // Deterministic validation split of the new data.
    CleanDataset ft_train, ft_val;
    std::mt19937_64 rng(mix64(tcfg.rng_seed ^ 0x66742d73706c6974ULL));
    for (const auto& rec : new_data.records) {
        (uniform01(rng) < val_frac ? ft_val : ft_train).records.push_back(rec);
    }
    if (ft_train.records.empty() || ft_val.records.empty()) {
        throw_data("EmptyDataset", "finetune split produced an empty train or val set");
    }
    return run_training(ckpt.params, ft_train, ft_val, space, ckpt.config, tcfg, 0.0, log);
}

Mat<float> predict_proba(const Checkpoint& ckpt, const LabelSpace& space,
                         std::span<const LangText> inputs) {
    verify_digest(ckpt, space);
    const auto encoded = encode_inputs(inputs, ckpt.config.max_len);
    return forward<float>(ckpt.params, ckpt.config, encoded, RunMode::eval).probs;
}

std::vector<Prediction> predict(const Checkpoint& ckpt, const LabelSpace& space,
                                std::span<const LangText> inputs, double threshold,
                                bool fallback_top1) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw_config("ThresholdOutOfRange", "threshold must lie strictly in (0,1)");
    }
    const Mat<float> probs = predict_proba(ckpt, space, inputs);
    std::vector<Prediction> out(inputs.size());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        Prediction& pred = out[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < probs.cols(); ++j) {
            if (probs(i, j) >= static_cast<float>(threshold)) {
                pred.codes.push_back(space.code_at(static_cast<std::size_t>(j)));
                pred.probs.push_back(probs(i, j));
            }
        }
        if (pred.codes.empty() && fallback_top1) {
            Eigen::Index best = 0;
            probs.row(i).maxCoeff(&best);
            pred.codes.push_back(space.code_at(static_cast<std::size_t>(best)));
            pred.probs.push_back(probs(i, best));
        }
    }
    return out;
}

Mat<float> embed(const Checkpoint& ckpt, std::span<const LangText> inputs) {
    const auto encoded = encode_inputs(inputs, ckpt.config.max_len);
    return forward<float>(ckpt.params, ckpt.config, encoded, RunMode::eval).pooled;
}

double exact_match_accuracy(const Parameters& params, const ModelConfig& config,
                            const LabelSpace& space, const CleanDataset& data, double threshold) {
    if (data.records.empty()) throw_data("EmptyDataset", "cannot evaluate an empty dataset");
    const auto encoded = encode_plain(data, config.max_len);
    const auto result = forward<float>(params, config, encoded, RunMode::eval);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        std::vector<int> predicted;
        for (Eigen::Index j = 0; j < result.probs.cols(); ++j) {
            if (result.probs(static_cast<Eigen::Index>(i), j) >= static_cast<float>(threshold)) {
                predicted.push_back(static_cast<int>(j));
            }
        }
        if (predicted == target_indices(data.records[i].targets, space)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.records.size());
}

}  // namespace occ
