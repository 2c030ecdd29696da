#include "occ/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "occ/errors.hpp"

namespace occ {

void PredictionMatrix::validate() const {
    const auto n = static_cast<std::size_t>(probs.rows());
    if (target_sets.size() != n || langs.size() != n) {
        throw_numeric("ShapeMismatch", "prediction matrix rows, targets and langs disagree");
    }
    for (const auto& t : target_sets) {
        if (t.empty()) throw_data("InvalidTargets", "every target row must be non-empty");
    }
}

std::vector<std::vector<int>> set_predictions(const Mat<float>& probs, double threshold) {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(probs.rows()));
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        for (Eigen::Index j = 0; j < probs.cols(); ++j) {
            if (probs(i, j) >= static_cast<float>(threshold)) {
                out[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
            }
        }
    }
    return out;
}

MetricReport compute_metrics(std::span<const std::vector<int>> predicted,
                             std::span<const std::vector<int>> targets) {
    if (predicted.size() != targets.size() || targets.empty()) {
        throw_numeric("ShapeMismatch", "prediction and target lists must match and be non-empty");
    }
    std::size_t exact = 0;
    std::size_t inter_sum = 0, pred_sum = 0, target_sum = 0;
    std::vector<int> inter;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto& p = predicted[i];
        const auto& t = targets[i];
        if (p == t) ++exact;
        inter.clear();
        std::set_intersection(p.begin(), p.end(), t.begin(), t.end(), std::back_inserter(inter));
        inter_sum += inter.size();
        pred_sum += p.size();
        target_sum += t.size();
    }
    if (pred_sum == 0) {
        throw_data("NoPredictions", "all predicted sets are empty; micro precision undefined");
    }

    MetricReport report;
    report.n = targets.size();
    report.accuracy = static_cast<double>(exact) / static_cast<double>(targets.size());
    report.precision = static_cast<double>(inter_sum) / static_cast<double>(pred_sum);
    report.recall = static_cast<double>(inter_sum) / static_cast<double>(target_sum);
    const double pr = report.precision + report.recall;
    report.f1 = pr > 0.0 ? 2.0 * report.precision * report.recall / pr : 0.0;
    return report;
}

std::string metric_name(Metric metric) {
    switch (metric) {
        case Metric::accuracy: return "accuracy";
        case Metric::precision: return "precision";
        case Metric::recall: return "recall";
        case Metric::f1: return "f1";
    }
    return "?";
}

Metric parse_metric(const std::string& name) {
    if (name == "accuracy") return Metric::accuracy;
    if (name == "precision") return Metric::precision;
    if (name == "recall") return Metric::recall;
    if (name == "f1") return Metric::f1;
    throw_config("InvalidConfig", "unknown metric '" + name + "'");
}

std::vector<double> GridSpec::points() const {
    if (!(lo > 0.0) || !(hi < 1.0) || lo > hi || !(step > 0.0)) {
        throw_config("InvalidConfig", "threshold grid must satisfy 0 < lo <= hi < 1, step > 0");
    }
    std::vector<double> pts;
    // Integer stepping avoids drift; lo/hi/step are config-file decimals.
    const long n = std::lround((hi - lo) / step);
    for (long i = 0; i <= n; ++i) {
        const double t = lo + step * static_cast<double>(i);
        if (t < 1.0) pts.push_back(t);
    }
    return pts;
}

namespace {

double metric_value(const MetricReport& report, Metric metric) {
    switch (metric) {
        case Metric::accuracy: return report.accuracy;
        case Metric::precision: return report.precision;
        case Metric::recall: return report.recall;
        case Metric::f1: return report.f1;
    }
    return 0.0;
}

}  // namespace

GridResult grid_search_threshold(const PredictionMatrix& pm, Metric metric,
                                 const GridSpec& grid) {
    pm.validate();
    bool found = false;
    GridResult best;
    for (double tau : grid.points()) {
        const auto predicted = set_predictions(pm.probs, tau);
        MetricReport report;
        try {
            report = compute_metrics(predicted, pm.target_sets);
        } catch (const Error& e) {
            if (e.code() == "NoPredictions") continue;  // undefined at this grid point
            throw;
        }
        const double value = metric_value(report, metric);
        if (!found || value > best.value) {
            best = {tau, value};
            found = true;
        }
    }
    if (!found) {
        throw_data("AllUndefined", "metric undefined at every grid threshold");
    }
    return best;
}

ThresholdTable calibrate_per_language(const PredictionMatrix& pm, const GridSpec& grid) {
    pm.validate();

    // Languages in first-appearance order, pooled set under "overall".
    std::vector<Lang> present;
    for (Lang lang : pm.langs) {
        if (std::find(present.begin(), present.end(), lang) == present.end()) {
            present.push_back(lang);
        }
    }

    auto slice = [&pm](std::optional<Lang> lang) {
        PredictionMatrix out;
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < pm.langs.size(); ++i) {
            if (!lang || pm.langs[i] == *lang) rows.push_back(static_cast<Eigen::Index>(i));
        }
        out.probs.resize(static_cast<Eigen::Index>(rows.size()), pm.probs.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out.probs.row(static_cast<Eigen::Index>(r)) = pm.probs.row(rows[r]);
            out.target_sets.push_back(pm.target_sets[static_cast<std::size_t>(rows[r])]);
            out.langs.push_back(pm.langs[static_cast<std::size_t>(rows[r])]);
        }
        return out;
    };

    ThresholdTable table;
    auto fill = [&grid, &table](const std::string& key, const PredictionMatrix& sub) {
        for (Metric metric :
             {Metric::accuracy, Metric::f1, Metric::precision, Metric::recall}) {
            ThresholdCell cell;
            cell.n = sub.record_count();
            try {
                const GridResult result = grid_search_threshold(sub, metric, grid);
                cell.threshold = result.threshold;
                cell.value = result.value;
                cell.defined = true;
            } catch (const Error& e) {
                if (e.code() != "AllUndefined") throw;
            }
            table.cells[metric_name(metric)][key] = cell;
        }
    };

    for (Lang lang : present) fill(std::string(lang_name(lang)), slice(lang));
    fill("overall", slice(std::nullopt));
    return table;
}

nlohmann::json threshold_table_json(const ThresholdTable& table) {
    nlohmann::json out;
    for (const auto& [metric, langs] : table.cells) {
        for (const auto& [lang, cell] : langs) {
            nlohmann::json c;
            if (cell.defined) {
                c["threshold"] = cell.threshold;
                c["value"] = cell.value;
            } else {
                c["threshold"] = nullptr;
                c["value"] = nullptr;
            }
            c["n"] = cell.n;
            out[metric][lang] = c;
        }
    }
    return out;
}

ThresholdTable threshold_table_from_json(const nlohmann::json& j) {
    ThresholdTable table;
    for (auto it = j.begin(); it != j.end(); ++it) {
        for (auto lt = it.value().begin(); lt != it.value().end(); ++lt) {
            ThresholdCell cell;
            const auto& c = lt.value();
            cell.n = c.at("n").get<std::size_t>();
            if (!c.at("threshold").is_null()) {
                cell.threshold = c.at("threshold").get<double>();
                cell.value = c.at("value").get<double>();
                cell.defined = true;
            }
            table.cells[it.key()][lt.key()] = cell;
        }
    }
    return table;
}

std::string threshold_table_text(const ThresholdTable& table) {
    static const char* kStatistics[] = {"accuracy", "f1", "precision", "recall"};
    static const char* kLabels[] = {"Accuracy", "F1 score", "Precision", "Recall"};

    // Collect languages; pooled block is rendered last.
    std::vector<std::string> langs;
    for (const auto& [metric, cells] : table.cells) {
        for (const auto& [lang, cell] : cells) {
            if (lang != "overall" && std::find(langs.begin(), langs.end(), lang) == langs.end()) {
                langs.push_back(lang);
            }
        }
    }
    std::sort(langs.begin(), langs.end());
    langs.push_back("overall");

    std::ostringstream out;
    out << std::left << std::setw(10) << "Language" << std::right << std::setw(14)
        << "N. test obs." << "  " << std::left << std::setw(11) << "Statistic" << std::right
        << std::setw(10) << "Value" << std::setw(14) << "Optimal thr." << '\n';
    out << std::string(61, '-') << '\n';
    for (const auto& lang : langs) {
        for (std::size_t s = 0; s < 4; ++s) {
            auto metric_it = table.cells.find(kStatistics[s]);
            if (metric_it == table.cells.end()) continue;
            auto cell_it = metric_it->second.find(lang);
            if (cell_it == metric_it->second.end()) continue;
            const ThresholdCell& cell = cell_it->second;
            out << std::left << std::setw(10) << lang << std::right << std::setw(14) << cell.n
                << "  " << std::left << std::setw(11) << kLabels[s] << std::right;
            if (cell.defined) {
                out << std::setw(10) << std::fixed << std::setprecision(4) << cell.value
                    << std::setw(14) << std::setprecision(2) << cell.threshold;
                out.unsetf(std::ios::fixed);
            } else {
                out << std::setw(10) << "-" << std::setw(14) << "-";
            }
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace occ
