#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "occ/hisco.hpp"
#include "occ/ingest.hpp"
#include "occ/net.hpp"
#include "occ/textenc.hpp"

namespace occ {

struct TrainConfig {
    int batch_size = 32;
    int max_epochs = 10;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t rng_seed = 0;
    AugmentConfig augment;
    double p_lang_unknown = 0.25;
    std::filesystem::path checkpoint_path;  // empty -> keep best in memory only

    void validate() const;
};

struct TrainingMeta {
    int epochs_seen = 0;
    std::uint64_t seed = 0;
};

struct Checkpoint {
    ModelConfig config;
    Parameters params;
    std::string label_space_digest;
    double best_val_accuracy = 0.0;
    TrainingMeta meta;
};

/// Per-epoch training log callback: (epoch, mean train loss, val exact-match
/// accuracy at threshold 0.5, whether the checkpoint was saved).
using EpochLogFn = std::function<void(int, double, double, bool)>;

/// Epoch loop with seeded shuffling, per-record augmentation and language
/// dropout, Adam updates, and save-on-validation-improvement. Returns the
/// best checkpoint (also written to tcfg.checkpoint_path when set).
Checkpoint train(const CleanDataset& train_set, const CleanDataset& val_set,
                 const LabelSpace& space, const ModelConfig& mcfg, const TrainConfig& tcfg,
                 const EpochLogFn& log = {});

/// Continues training from an existing checkpoint on new data, which is
/// split val_frac/1-val_frac for the save-on-improvement rule. All codes in
/// new_data must be inside the checkpoint's label space.
Checkpoint finetune(const Checkpoint& ckpt, const CleanDataset& new_data, const LabelSpace& space,
                    const TrainConfig& tcfg, double val_frac = 0.1, const EpochLogFn& log = {});

struct Prediction {
    std::vector<HiscoCode> codes;
    std::vector<double> probs;  // aligned with codes
};

using LangText = std::pair<Lang, std::string>;

/// Thresholded multi-label prediction; when the set is empty and
/// fallback_top1 is on, the single argmax code is returned.
std::vector<Prediction> predict(const Checkpoint& ckpt, const LabelSpace& space,
                                std::span<const LangText> inputs, double threshold,
                                bool fallback_top1);

/// Per-record probability rows over the label space (eval mode).
Mat<float> predict_proba(const Checkpoint& ckpt, const LabelSpace& space,
                         std::span<const LangText> inputs);

/// Pooled pre-head representations, one row per input.
Mat<float> embed(const Checkpoint& ckpt, std::span<const LangText> inputs);

/// Exact-match accuracy of thresholded predictions against record targets.
double exact_match_accuracy(const Parameters& params, const ModelConfig& config,
                            const LabelSpace& space, const CleanDataset& data, double threshold);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace occ
