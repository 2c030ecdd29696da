#include "occ/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "occ/csv.hpp"
#include "occ/errors.hpp"
#include "occ/rng.hpp"

namespace occ {

namespace {

std::string fmt_double(double v, const char* spec = "%.9g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string join_space(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back(' ');
        out += parts[i];
    }
    return out;
}

double quantile(std::vector<double> sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - std::floor(pos);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

std::vector<PerCodeStats> per_code_performance(const PredictionMatrix& pm, const LabelSpace& space,
                                               double threshold,
                                               const std::map<std::string, std::size_t>& train_counts) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw_config("ThresholdOutOfRange", "threshold must lie strictly in (0,1)");
    }
    pm.validate();
    const auto predicted = set_predictions(pm.probs, threshold);
    const std::size_t n = pm.record_count();

    struct Counts {
        std::size_t tp = 0, fp = 0, fn = 0;
        std::size_t target_records = 0;  // records whose target contains the code
        std::size_t target_exact = 0;    // ... of which are exact set matches
    };
    std::map<int, Counts> by_code;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = predicted[i];
        const auto& t = pm.target_sets[i];
        const bool exact = p == t;
        for (int c : t) {
            Counts& counts = by_code[c];
            ++counts.target_records;
            if (exact) ++counts.target_exact;
            if (std::binary_search(p.begin(), p.end(), c)) {
                ++counts.tp;
            } else {
                ++counts.fn;
            }
        }
        for (int c : p) {
            if (!std::binary_search(t.begin(), t.end(), c)) ++by_code[c].fp;
        }
    }

    std::vector<PerCodeStats> out;
    out.reserve(by_code.size());
    for (const auto& [index, counts] : by_code) {
        PerCodeStats stats{space.code_at(static_cast<std::size_t>(index)), 0, {}, {}, {}, {}};
        auto it = train_counts.find(stats.code.digits());
        stats.n_train = it == train_counts.end() ? 0 : it->second;
        if (counts.target_records > 0) {
            stats.accuracy = static_cast<double>(counts.target_exact) /
                             static_cast<double>(counts.target_records);
            stats.recall = static_cast<double>(counts.tp) /
                           static_cast<double>(counts.tp + counts.fn);
        }
        if (counts.tp + counts.fp > 0) {
            stats.precision = static_cast<double>(counts.tp) /
                              static_cast<double>(counts.tp + counts.fp);
        }
        if (stats.precision && stats.recall) {
            const double pr = *stats.precision + *stats.recall;
            stats.f1 = pr > 0.0 ? 2.0 * *stats.precision * *stats.recall / pr : 0.0;
        }
        out.push_back(std::move(stats));
    }
    return out;
}

void write_per_code_csv(const std::filesystem::path& path, std::span<const PerCodeStats> stats) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(stats.size());
    auto cell = [](const std::optional<double>& v) {
        return v ? fmt_double(*v) : std::string();
    };
    for (const auto& s : stats) {
        rows.push_back({s.code.digits(), std::to_string(s.n_train), cell(s.accuracy),
                        cell(s.precision), cell(s.recall), cell(s.f1)});
    }
    write_csv(path, {"hisco", "n_train", "accuracy", "precision", "recall", "f1"}, rows);
}

TrendCurve kernel_trend(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw_numeric("ShapeMismatch", "x and y must have equal lengths");
    }
    const std::size_t n = x.size();
    if (n < 2) throw_data("InsufficientPoints", "kernel trend needs at least 2 points");

    // Silverman's rule over x.
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(n - 1));
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (spread <= 0.0) spread = std::max(sd, iqr / 1.34);
    double bandwidth = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
    if (bandwidth <= 0.0) bandwidth = 1.0;  // degenerate x spread

    const double lo = sorted.front();
    const double hi = sorted.back();
    TrendCurve curve;
    curve.x.resize(100);
    curve.y.resize(100);
    for (int i = 0; i < 100; ++i) {
        const double xi =
            lo + (hi - lo) * static_cast<double>(i) / 99.0;
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double u = (xi - x[j]) / bandwidth;
            const double w = std::exp(-0.5 * u * u);
            num += w * y[j];
            den += w;
        }
        curve.x[static_cast<std::size_t>(i)] = xi;
        curve.y[static_cast<std::size_t>(i)] = den > 0.0 ? num / den : 0.0;
    }

    // Cumulative-frequency marks, weighting each point by exp(x) = its
    // observation count.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&x](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    double total = 0.0;
    for (double v : x) total += std::exp(v);
    double cum = 0.0;
    bool low_set = false;
    curve.x_mark_low = sorted.front();
    curve.x_mark_high = sorted.back();
    for (std::size_t idx : order) {
        cum += std::exp(x[idx]);
        if (!low_set && cum >= 0.01 * total) {
            curve.x_mark_low = x[idx];
            low_set = true;
        }
        if (cum >= 0.99 * total) {
            curve.x_mark_high = x[idx];
            break;
        }
    }
    return curve;
}

RegressionResult ols_hc1(const Mat<double>& design, const std::vector<double>& y,
                         const std::vector<std::string>& names) {
    const auto n = design.rows();
    const auto k = design.cols();
    if (static_cast<std::size_t>(n) != y.size() || names.size() != static_cast<std::size_t>(k)) {
        throw_numeric("ShapeMismatch", "design matrix, outcomes and names disagree");
    }
    if (n <= k) {
        throw_data("TooFewObservations", "need more observations than regressors (n=" +
                                             std::to_string(n) + ", k=" + std::to_string(k) + ")");
    }

    const Mat<double> xtx = design.transpose() * design;
    Eigen::FullPivLU<Mat<double>> lu(xtx);
    if (lu.rank() < k) {
        throw_numeric("RankDeficient", "design matrix is rank deficient");
    }
    const Mat<double> xtx_inv = lu.inverse();
    Eigen::VectorXd yv(n);
    for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[static_cast<std::size_t>(i)];
    const Eigen::VectorXd beta = xtx_inv * (design.transpose() * yv);
    const Eigen::VectorXd resid = yv - design * beta;

    // HC1 sandwich with the n/(n-k) small-sample correction.
    Mat<double> meat = Mat<double>::Zero(k, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = design.row(i);
        meat += resid(i) * resid(i) * (row.transpose() * row);
    }
    const double correction = static_cast<double>(n) / static_cast<double>(n - k);
    const Mat<double> cov = correction * xtx_inv * meat * xtx_inv;

    RegressionResult result;
    result.n = static_cast<std::size_t>(n);
    for (Eigen::Index j = 0; j < k; ++j) {
        RegressionTerm term;
        term.name = names[static_cast<std::size_t>(j)];
        term.coefficient = beta(j);
        term.robust_se = std::sqrt(std::max(0.0, cov(j, j)));
        term.ci_low = term.coefficient - 1.96 * term.robust_se;
        term.ci_high = term.coefficient + 1.96 * term.robust_se;
        result.terms.push_back(std::move(term));
    }
    return result;
}

std::map<std::string, SesPanelPair> ses_regression(std::span<const PerCodeStats> stats,
                                                   const HiscamTable& hiscam) {
    struct MetricAccessor {
        const char* name;
        std::optional<double> PerCodeStats::*field;
    };
    static const MetricAccessor kMetrics[] = {
        {"accuracy", &PerCodeStats::accuracy},
        {"f1", &PerCodeStats::f1},
        {"precision", &PerCodeStats::precision},
        {"recall", &PerCodeStats::recall},
    };

    std::map<std::string, SesPanelPair> out;
    for (const auto& metric : kMetrics) {
        SesPanelPair pair;
        std::vector<double> ya, scores_a;
        std::vector<double> yb, scores_b, logn_b;
        for (const auto& s : stats) {
            const auto& value = s.*(metric.field);
            if (!value) {
                ++pair.dropped_undefined;
                continue;
            }
            const auto score = hiscam.lookup(s.code);
            if (!score) {
                ++pair.dropped_no_hiscam;
                continue;
            }
            ya.push_back(*value);
            scores_a.push_back(*score);
            if (s.n_train >= 1) {
                yb.push_back(*value);
                scores_b.push_back(*score);
                logn_b.push_back(std::log(static_cast<double>(s.n_train)));
            }
        }
        if (ya.size() < 3 || yb.size() < 4) {
            throw_data("TooFewObservations",
                       std::string("metric '") + metric.name +
                           "' has too few codes with HISCAM scores for the SES regressions");
        }

        Mat<double> xa(static_cast<Eigen::Index>(ya.size()), 2);
        for (std::size_t i = 0; i < ya.size(); ++i) {
            xa(static_cast<Eigen::Index>(i), 0) = 1.0;
            xa(static_cast<Eigen::Index>(i), 1) = scores_a[i];
        }
        pair.panel_a = ols_hc1(xa, ya, {"(Intercept)", "HISCAM score"});

        Mat<double> xb(static_cast<Eigen::Index>(yb.size()), 3);
        for (std::size_t i = 0; i < yb.size(); ++i) {
            xb(static_cast<Eigen::Index>(i), 0) = 1.0;
            xb(static_cast<Eigen::Index>(i), 1) = scores_b[i];
            xb(static_cast<Eigen::Index>(i), 2) = logn_b[i];
        }
        pair.panel_b = ols_hc1(xb, yb, {"(Intercept)", "HISCAM score", "log(n)"});
        out[metric.name] = std::move(pair);
    }
    return out;
}

std::string ses_report_text(const std::map<std::string, SesPanelPair>& results) {
    static const char* kOrder[] = {"accuracy", "f1", "precision", "recall"};
    static const char* kLabels[] = {"Accuracy", "F1 score", "Precision", "Recall"};

    auto col = [](const std::string& s) {
        std::string out = s;
        out.resize(20, ' ');
        return out;
    };
    auto coef_cells = [&](const char* term_name, bool panel_b) {
        std::pair<std::string, std::string> rows;  // coefficient line, CI line
        std::string coef_line, ci_line;
        for (const char* key : kOrder) {
            const auto& pair = results.at(key);
            const RegressionResult& reg = panel_b ? pair.panel_b : pair.panel_a;
            const RegressionTerm* term = nullptr;
            for (const auto& t : reg.terms) {
                if (t.name == term_name) term = &t;
            }
            coef_line += col(term ? fmt_double(term->coefficient, "%.4f") : "-");
            ci_line += col(term ? "[" + fmt_double(term->ci_low, "%.4f") + "; " +
                                      fmt_double(term->ci_high, "%.4f") + "]"
                                : "-");
        }
        rows.first = coef_line;
        rows.second = ci_line;
        return rows;
    };

    std::ostringstream out;
    out << "Performance metrics and socio-economic status\n";
    out << std::string(100, '=') << '\n';
    out << col("");
    for (const char* label : kLabels) out << col(label);
    out << '\n' << col("");
    for (int i = 1; i <= 4; ++i) out << col("(" + std::to_string(i) + ")");
    out << '\n' << std::string(100, '-') << '\n';

    out << "Panel A\n";
    auto [a_coef, a_ci] = coef_cells("HISCAM score", false);
    out << col("HISCAM score") << a_coef << '\n' << col("") << a_ci << '\n';
    out << col("Observations");
    for (const char* key : kOrder) out << col(std::to_string(results.at(key).panel_a.n));
    out << '\n' << std::string(100, '-') << '\n';

    out << "Panel B\n";
    auto [b_coef, b_ci] = coef_cells("HISCAM score", true);
    out << col("HISCAM score") << b_coef << '\n' << col("") << b_ci << '\n';
    auto [n_coef, n_ci] = coef_cells("log(n)", true);
    out << col("log(n)") << n_coef << '\n' << col("") << n_ci << '\n';
    out << col("Observations");
    for (const char* key : kOrder) out << col(std::to_string(results.at(key).panel_b.n));
    out << '\n' << std::string(100, '=') << '\n';
    out << "Notes: 95% confidence intervals in brackets, based on heteroskedasticity-robust\n"
           "(HC1) standard errors.\n";
    return out.str();
}

namespace {

const std::vector<std::string> kReviewHeader = {"id", "text", "lang", "pred_codes",
                                                "probs", "verdict"};

std::vector<std::string> review_row_fields(const ReviewRow& row) {
    std::vector<std::string> codes, probs;
    for (const auto& c : row.codes) codes.push_back(c.digits());
    for (double p : row.probs) probs.push_back(fmt_double(p, "%.6f"));
    return {row.id,           row.text,          std::string(lang_name(row.lang)),
            join_space(codes), join_space(probs), row.verdict};
}

}  // namespace

void draw_review_sample(std::span<const ReviewRow> population, std::size_t n, std::uint64_t seed,
                        const std::filesystem::path& out_path) {
    if (n > population.size()) {
        throw_data("SampleTooLarge", "requested " + std::to_string(n) + " rows from " +
                                         std::to_string(population.size()));
    }
    std::vector<std::size_t> indices(population.size());
    std::iota(indices.begin(), indices.end(), 0);
    std::mt19937_64 rng(mix64(seed));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + uniform_index(rng, indices.size() - i);
        std::swap(indices[i], indices[j]);
    }

    std::vector<std::vector<std::string>> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ReviewRow row = population[indices[i]];
        row.verdict.clear();
        rows.push_back(review_row_fields(row));
    }
    write_csv(out_path, kReviewHeader, rows);
}

std::vector<ReviewRow> review_rows_from_csv(const std::filesystem::path& path) {
    const CsvTable csv = read_csv(path);
    const std::size_t id_col = csv.column("id");
    const std::size_t text_col = csv.column("text");
    const std::size_t lang_col = csv.column("lang");
    const std::size_t codes_col = csv.column("pred_codes");
    const std::size_t probs_col = csv.column("probs");
    const std::size_t verdict_col = csv.column("verdict");

    std::vector<ReviewRow> rows;
    rows.reserve(csv.rows.size());
    for (const auto& fields : csv.rows) {
        ReviewRow row;
        row.id = fields[id_col];
        row.text = fields[text_col];
        const auto lang = try_parse_lang(fields[lang_col]);
        row.lang = lang.value_or(Lang::unk);
        std::istringstream codes(fields[codes_col]);
        std::string token;
        while (codes >> token) row.codes.push_back(HiscoCode::parse(token));
        std::istringstream probs(fields[probs_col]);
        double p = 0.0;
        while (probs >> p) row.probs.push_back(p);
        row.verdict = fields[verdict_col];
        rows.push_back(std::move(row));
    }
    return rows;
}

ReviewScore score_review(std::span<const ReviewRow> rows) {
    if (rows.empty()) throw_annotation("UnannotatedRows", "review file has no rows");
    std::vector<std::string> blank_ids, bad_ids;
    std::size_t correct = 0, exact = 0, substantial = 0;
    for (const auto& row : rows) {
        if (row.verdict.empty()) {
            blank_ids.push_back(row.id);
        } else if (row.verdict == "correct") {
            ++correct;
        } else if (row.verdict == "exact") {
            ++exact;
        } else if (row.verdict == "substantial") {
            ++substantial;
        } else if (row.verdict != "wrong") {
            bad_ids.push_back(row.id);
        }
    }
    auto list_ids = [](const std::vector<std::string>& ids) {
        std::string out;
        for (std::size_t i = 0; i < ids.size() && i < 20; ++i) {
            if (i) out += ", ";
            out += ids[i];
        }
        if (ids.size() > 20) out += ", ...";
        return out;
    };
    if (!blank_ids.empty()) {
        throw_annotation("UnannotatedRows", "rows without a verdict: " + list_ids(blank_ids));
    }
    if (!bad_ids.empty()) {
        throw_annotation("InvalidVerdict",
                         "verdict must be correct|exact|substantial|wrong; bad rows: " +
                             list_ids(bad_ids));
    }

    ReviewScore score;
    score.n_checked = rows.size();
    const auto n = static_cast<double>(rows.size());
    score.accuracy = static_cast<double>(correct + exact + substantial) / n;
    if (exact + substantial > 0) {
        score.exact_agreement = static_cast<double>(exact) / n;
        score.substantial_agreement = static_cast<double>(exact + substantial) / n;
    }
    return score;
}

ReviewScore score_review_file(const std::filesystem::path& annotated_csv) {
    const auto rows = review_rows_from_csv(annotated_csv);
    return score_review(rows);
}

Mat<float> pca_project_2d(const Mat<float>& rows) {
    const Eigen::Index n = rows.rows();
    const Eigen::Index d = rows.cols();
    Mat<double> x = rows.cast<double>();
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;

    auto top_component = [&](const Mat<double>& data) {
        Eigen::VectorXd v(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            v(i) = 1.0 + 0.01 * static_cast<double>(i % 7);
        }
        v.normalize();
        for (int iter = 0; iter < 300; ++iter) {
            Eigen::VectorXd w = data.transpose() * (data * v);
            const double norm = w.norm();
            if (norm < 1e-30) break;
            v = w / norm;
        }
        return v;
    };

    const Eigen::VectorXd v1 = top_component(x);
    const Eigen::VectorXd p1 = x * v1;
    const Mat<double> deflated = x - p1 * v1.transpose();
    const Eigen::VectorXd v2 = top_component(deflated);
    const Eigen::VectorXd p2 = deflated * v2;

    Mat<float> out(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i, 0) = static_cast<float>(p1(i));
        out(i, 1) = static_cast<float>(p2(i));
    }
    return out;
}

void export_embeddings(const Checkpoint& ckpt, const CleanDataset& records,
                       const std::filesystem::path& out_path, bool with_pca2d) {
    std::vector<LangText> inputs;
    inputs.reserve(records.records.size());
    for (const auto& rec : records.records) inputs.emplace_back(rec.lang, rec.text);
    const Mat<float> pooled = embed(ckpt, inputs);

    Mat<float> pca;
    if (with_pca2d) pca = pca_project_2d(pooled);

    std::vector<std::string> header = {"id", "sector"};
    for (Eigen::Index j = 0; j < pooled.cols(); ++j) header.push_back("e" + std::to_string(j));
    if (with_pca2d) {
        header.push_back("pc1");
        header.push_back("pc2");
    }

    std::vector<std::vector<std::string>> rows;
    rows.reserve(records.records.size());
    for (std::size_t i = 0; i < records.records.size(); ++i) {
        const auto& rec = records.records[i];
        std::vector<std::string> row;
        row.reserve(header.size());
        row.push_back(std::to_string(i));
        row.push_back(rec.targets.empty() ? std::string()
                                          : std::string(1, rec.targets.front().first_digit()));
        for (Eigen::Index j = 0; j < pooled.cols(); ++j) {
            row.push_back(fmt_double(pooled(static_cast<Eigen::Index>(i), j)));
        }
        if (with_pca2d) {
            row.push_back(fmt_double(pca(static_cast<Eigen::Index>(i), 0)));
            row.push_back(fmt_double(pca(static_cast<Eigen::Index>(i), 1)));
        }
        rows.push_back(std::move(row));
    }
    write_csv(out_path, header, rows);
}

}  // namespace occ
