#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "occ/language.hpp"
#include "occ/net.hpp"

namespace occ {

/// Per-record probability rows plus the truth needed for calibration.
struct PredictionMatrix {
    Mat<float> probs;                          // N x L, entries in (0,1)
    std::vector<std::vector<int>> target_sets;  // N sorted index sets, each non-empty
    std::vector<Lang> langs;                    // N

    std::size_t record_count() const { return target_sets.size(); }
    int label_count() const { return static_cast<int>(probs.cols()); }
    void validate() const;
};

/// Row i -> { j : probs[i][j] >= threshold }. Empty sets are permitted;
/// calibration never applies a top-1 fallback.
std::vector<std::vector<int>> set_predictions(const Mat<float>& probs, double threshold);

struct MetricReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t n = 0;
};

/// Exact-match accuracy plus micro-averaged precision/recall/F1.
/// Throws NoPredictions when every predicted set is empty (micro precision
/// undefined).
MetricReport compute_metrics(std::span<const std::vector<int>> predicted,
                             std::span<const std::vector<int>> targets);

enum class Metric { accuracy, precision, recall, f1 };

std::string metric_name(Metric metric);
Metric parse_metric(const std::string& name);

struct GridSpec {
    double lo = 0.01;
    double hi = 0.99;
    double step = 0.01;

    std::vector<double> points() const;
};

struct GridResult {
    double threshold = 0.0;
    double value = 0.0;
};

/// Evaluates the metric at every grid point and returns the maximizer,
/// breaking ties toward the smaller threshold. Grid points where the metric
/// is undefined are skipped; AllUndefined when none is defined.
GridResult grid_search_threshold(const PredictionMatrix& pm, Metric metric,
                                 const GridSpec& grid = {});

struct ThresholdCell {
    double threshold = 0.0;
    double value = 0.0;
    std::size_t n = 0;
    bool defined = false;
};

/// metric name -> language ("overall" for the pooled set) -> cell.
struct ThresholdTable {
    std::map<std::string, std::map<std::string, ThresholdCell>> cells;
};

/// Grid search per metric, for the pooled set and for every language
/// present. Undefined grid searches become undefined cells rather than
/// errors.
ThresholdTable calibrate_per_language(const PredictionMatrix& pm, const GridSpec& grid = {});

nlohmann::json threshold_table_json(const ThresholdTable& table);
ThresholdTable threshold_table_from_json(const nlohmann::json& j);

/// Aligned text rendering: language, n test obs., statistic, value, optimal
/// threshold; one block of four statistics per language, pooled rows last.
std::string threshold_table_text(const ThresholdTable& table);

}  // namespace occ
