#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "occ/calibrate.hpp"
#include "occ/hisco.hpp"
#include "occ/ingest.hpp"
#include "occ/model.hpp"

namespace occ {

/// Binary-presence confusion stats for one code, plus its training-set
/// frequency. Cells are absent when the code never appears on the relevant
/// side (never in targets -> recall/accuracy undefined; never predicted ->
/// precision undefined).
struct PerCodeStats {
    HiscoCode code;
    std::size_t n_train = 0;
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

std::vector<PerCodeStats> per_code_performance(const PredictionMatrix& pm, const LabelSpace& space,
                                               double threshold,
                                               const std::map<std::string, std::size_t>& train_counts);

void write_per_code_csv(const std::filesystem::path& path, std::span<const PerCodeStats> stats);

/// Nadaraya-Watson smooth with a Gaussian kernel and Silverman bandwidth,
/// sampled at 100 points across [min x, max x]. x is interpreted as log
/// observation counts; the marks are the x positions where exp(x)-weighted
/// cumulative frequency crosses 1% and 99%.
struct TrendCurve {
    std::vector<double> x;
    std::vector<double> y;
    double x_mark_low = 0.0;   // 1% cumulative frequency
    double x_mark_high = 0.0;  // 99% cumulative frequency
};

TrendCurve kernel_trend(std::span<const double> x, std::span<const double> y);

struct RegressionTerm {
    std::string name;
    double coefficient = 0.0;
    double robust_se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

/// OLS with intercept and HC1 heteroskedasticity-robust standard errors;
/// CI bounds are coefficient +/- 1.96 * SE.
struct RegressionResult {
    std::vector<RegressionTerm> terms;  // intercept first
    std::size_t n = 0;
};

RegressionResult ols_hc1(const Mat<double>& design, const std::vector<double>& y,
                         const std::vector<std::string>& names);

struct SesPanelPair {
    RegressionResult panel_a;  // metric ~ hiscam
    RegressionResult panel_b;  // metric ~ hiscam + log(n_train)
    std::size_t dropped_no_hiscam = 0;
    std::size_t dropped_undefined = 0;
};

/// One panel pair per metric ("accuracy", "f1", "precision", "recall").
/// Codes lacking a HISCAM score or with an undefined metric are dropped and
/// counted; Panel B additionally requires n_train >= 1.
std::map<std::string, SesPanelPair> ses_regression(std::span<const PerCodeStats> stats,
                                                   const HiscamTable& hiscam);

/// Two-panel text report with bracketed 95% confidence intervals and an
/// observation-count row.
std::string ses_report_text(const std::map<std::string, SesPanelPair>& results);

struct ReviewRow {
    std::string id;
    std::string text;
    Lang lang = Lang::unk;
    std::vector<HiscoCode> codes;
    std::vector<double> probs;
    std::string verdict;  // correct | exact | substantial | wrong | empty
};

/// Seeded uniform sample without replacement; writes the annotation CSV
/// with a blank verdict column.
void draw_review_sample(std::span<const ReviewRow> population, std::size_t n, std::uint64_t seed,
                        const std::filesystem::path& out_path);

struct ReviewScore {
    double accuracy = 0.0;  // share marked correct-or-better
    std::optional<double> exact_agreement;
    std::optional<double> substantial_agreement;
    std::size_t n_checked = 0;
};

/// Scores an annotated review file. Rows with blank or unknown verdicts are
/// an error listing the offending ids. The agreement statistics are absent
/// when no row used the exact/substantial categories.
ReviewScore score_review(std::span<const ReviewRow> rows);
ReviewScore score_review_file(const std::filesystem::path& annotated_csv);

std::vector<ReviewRow> review_rows_from_csv(const std::filesystem::path& path);

/// One row per record: id, sector (first digit of the first target code),
/// the d embedding values, and optionally two power-iteration PCA columns.
void export_embeddings(const Checkpoint& ckpt, const CleanDataset& records,
                       const std::filesystem::path& out_path, bool with_pca2d);

/// First two principal components of the centered rows.
Mat<float> pca_project_2d(const Mat<float>& rows);

}  // namespace occ
