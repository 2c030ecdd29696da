#include "occ/pipeline.hpp"

#include <iomanip>
#include <sstream>

#include "occ/csv.hpp"
#include "occ/errors.hpp"

namespace occ {

CleanDataset dataset_from_csv(const std::filesystem::path& path, const LabelSpace& space,
                              const TranslitTable& table) {
    return clean_dataset(raw_rows_from_csv(path), space, table);
}

PredictionMatrix prediction_matrix(const Checkpoint& ckpt, const LabelSpace& space,
                                   const CleanDataset& data, bool lang_context) {
    std::vector<LangText> inputs;
    inputs.reserve(data.records.size());
    PredictionMatrix pm;
    for (const auto& rec : data.records) {
        inputs.emplace_back(lang_context ? rec.lang : Lang::unk, rec.text);
        pm.target_sets.push_back(target_indices(rec.targets, space));
        pm.langs.push_back(rec.lang);
    }
    pm.probs = predict_proba(ckpt, space, inputs);
    return pm;
}

double resolve_threshold(std::optional<double> flag,
                         const std::filesystem::path& thresholds_json) {
    if (flag) {
        if (!(*flag > 0.0 && *flag < 1.0)) {
            throw_config("ThresholdOutOfRange", "threshold must lie strictly in (0,1)");
        }
        return *flag;
    }
    if (!thresholds_json.empty() && std::filesystem::exists(thresholds_json)) {
        const auto table = threshold_table_from_json(
            nlohmann::json::parse(read_text_file(thresholds_json)));
        auto metric_it = table.cells.find("f1");
        if (metric_it != table.cells.end()) {
            auto cell_it = metric_it->second.find("overall");
            if (cell_it != metric_it->second.end() && cell_it->second.defined) {
                return cell_it->second.threshold;
            }
        }
    }
    return 0.5;
}

OverallCalibration calibrate_full(const Checkpoint& ckpt, const LabelSpace& space,
                                  const CleanDataset& data, const GridSpec& grid) {
    OverallCalibration cal;
    const PredictionMatrix with_lang = prediction_matrix(ckpt, space, data, true);
    const PredictionMatrix without_lang = prediction_matrix(ckpt, space, data, false);
    cal.with_lang = calibrate_per_language(with_lang, grid);
    for (Metric metric : {Metric::accuracy, Metric::f1, Metric::precision, Metric::recall}) {
        cal.overall_with_lang[metric_name(metric)] =
            grid_search_threshold(with_lang, metric, grid);
        cal.overall_without_lang[metric_name(metric)] =
            grid_search_threshold(without_lang, metric, grid);
    }
    return cal;
}

std::string overall_table_text(const OverallCalibration& cal) {
    static const std::pair<const char*, const char*> kRows[] = {
        {"accuracy", "Accuracy"}, {"f1", "F1 score"}, {"precision", "Precision"},
        {"recall", "Recall"}};
    std::ostringstream out;
    out << "Best overall performance\n";
    out << std::left << std::setw(11) << "Metric" << std::setw(13) << "Lang. info."
        << std::right << std::setw(8) << "Value" << std::setw(14) << "Optimal thr." << '\n';
    out << std::string(46, '-') << '\n';
    for (const auto& [key, label] : kRows) {
        for (bool with : {false, true}) {
            const auto& results = with ? cal.overall_with_lang : cal.overall_without_lang;
            const GridResult& r = results.at(key);
            out << std::left << std::setw(11) << label << std::setw(13) << (with ? "Yes" : "No")
                << std::right << std::setw(8) << std::fixed << std::setprecision(3) << r.value
                << std::setw(14) << std::setprecision(2) << r.threshold << '\n';
            out.unsetf(std::ios::fixed);
        }
    }
    return out.str();
}

nlohmann::json overall_table_json(const OverallCalibration& cal) {
    nlohmann::json out;
    for (const auto& [metric, result] : cal.overall_with_lang) {
        out[metric]["with_lang"] = {{"threshold", result.threshold}, {"value", result.value}};
    }
    for (const auto& [metric, result] : cal.overall_without_lang) {
        out[metric]["without_lang"] = {{"threshold", result.threshold}, {"value", result.value}};
    }
    return out;
}

}  // namespace occ
