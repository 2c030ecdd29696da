#pragma once

#include <filesystem>
#include <optional>

#include "occ/analysis.hpp"
#include "occ/calibrate.hpp"
#include "occ/config.hpp"
#include "occ/model.hpp"

namespace occ {

/// Reads a dataset CSV (raw or prepared schema) and cleans it against the
/// label space. Cleaning is idempotent, so prepared files pass through
/// unchanged.
CleanDataset dataset_from_csv(const std::filesystem::path& path, const LabelSpace& space,
                              const TranslitTable& table);

/// Runs the model over the records. When lang_context is false every tag is
/// replaced by "unk", mirroring the no-language-information evaluation.
PredictionMatrix prediction_matrix(const Checkpoint& ckpt, const LabelSpace& space,
                                   const CleanDataset& data, bool lang_context = true);

/// Threshold resolution for predict/evaluate: explicit flag wins, then the
/// F1-optimal overall threshold from a calibration file, then 0.5.
double resolve_threshold(std::optional<double> flag,
                         const std::filesystem::path& thresholds_json);

/// Overall best (value, threshold) per metric, with and without language
/// context: the "best overall performance" table.
struct OverallCalibration {
    ThresholdTable with_lang;     // per-language + overall rows
    std::map<std::string, GridResult> overall_with_lang;
    std::map<std::string, GridResult> overall_without_lang;
};

OverallCalibration calibrate_full(const Checkpoint& ckpt, const LabelSpace& space,
                                  const CleanDataset& data, const GridSpec& grid);

std::string overall_table_text(const OverallCalibration& cal);
nlohmann::json overall_table_json(const OverallCalibration& cal);

}  // namespace occ
