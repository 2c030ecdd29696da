#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "occ/calibrate.hpp"
#include "occ/errors.hpp"
#include "support.hpp"

using namespace occ;
using occ::testing::oracle_metrics;
using occ::testing::random_prediction_matrix;

namespace {

/// Independent brute-force grid search used as the oracle.
GridResult oracle_grid_search(const PredictionMatrix& pm, Metric metric, const GridSpec& grid) {
    GridResult best{0.0, -1.0};
    bool found = false;
    for (double tau : grid.points()) {
        const auto preds = set_predictions(pm.probs, tau);
        const auto o = oracle_metrics(preds, pm.target_sets);
        if (!o.defined) continue;
        double value = 0.0;
        switch (metric) {
            case Metric::accuracy: value = o.accuracy; break;
            case Metric::precision: value = o.precision; break;
            case Metric::recall: value = o.recall; break;
            case Metric::f1: value = o.f1; break;
        }
        if (!found || value > best.value) {
            best = {tau, value};
            found = true;
        }
    }
    REQUIRE(found);
    return best;
}

}  // namespace

TEST_CASE("set_predictions applies the threshold rowwise") {
    Mat<float> probs(1, 3);
    probs << 0.9f, 0.4f, 0.6f;
    CHECK(set_predictions(probs, 0.5) == std::vector<std::vector<int>>{{0, 2}});
    CHECK(set_predictions(probs, 0.95) == std::vector<std::vector<int>>{{}});
    CHECK(set_predictions(probs, 1e-9) == std::vector<std::vector<int>>{{0, 1, 2}});
}

TEST_CASE("set monotonicity: larger thresholds shrink prediction sets") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const auto pm = random_prediction_matrix(rng, 30, 8);
        const auto loose = set_predictions(pm.probs, 0.2);
        const auto tight = set_predictions(pm.probs, 0.7);
        for (std::size_t i = 0; i < loose.size(); ++i) {
            for (int idx : tight[i]) {
                CHECK(std::find(loose[i].begin(), loose[i].end(), idx) != loose[i].end());
            }
        }
    }
}

TEST_CASE("compute_metrics reproduces the worked example") {
    // T = ({a},{a,b}), P = ({a},{a})
    const std::vector<std::vector<int>> targets = {{0}, {0, 1}};
    const std::vector<std::vector<int>> preds = {{0}, {0}};
    const MetricReport report = compute_metrics(preds, targets);
    CHECK(report.accuracy == doctest::Approx(0.5));
    CHECK(report.precision == doctest::Approx(1.0));
    CHECK(report.recall == doctest::Approx(2.0 / 3.0));
    CHECK(report.f1 == doctest::Approx(0.8));
    CHECK(report.n == 2);
}

TEST_CASE("perfect predictor scores one on every metric") {
    const std::vector<std::vector<int>> targets = {{0}, {1, 2}, {3}};
    const MetricReport report = compute_metrics(targets, targets);
    CHECK(report.accuracy == 1.0);
    CHECK(report.precision == 1.0);
    CHECK(report.recall == 1.0);
    CHECK(report.f1 == 1.0);
}

TEST_CASE("all-empty predictions raise NoPredictions") {
    const std::vector<std::vector<int>> targets = {{0}, {1}};
    const std::vector<std::vector<int>> preds = {{}, {}};
    CHECK_THROWS_WITH_AS(compute_metrics(preds, targets), doctest::Contains("NoPredictions"),
                         Error);
}

TEST_CASE("compute_metrics equals the counting oracle on random fixtures") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto pm = random_prediction_matrix(rng, 50, 10);
        std::uniform_real_distribution<double> tau_dist(0.05, 0.95);
        const auto preds = set_predictions(pm.probs, tau_dist(rng));
        const auto oracle = oracle_metrics(preds, pm.target_sets);
        if (!oracle.defined) {
            CHECK_THROWS_AS(compute_metrics(preds, pm.target_sets), Error);
            continue;
        }
        const MetricReport report = compute_metrics(preds, pm.target_sets);
        CHECK(report.accuracy == doctest::Approx(oracle.accuracy).epsilon(1e-12));
        CHECK(report.precision == doctest::Approx(oracle.precision).epsilon(1e-12));
        CHECK(report.recall == doctest::Approx(oracle.recall).epsilon(1e-12));
        CHECK(report.f1 == doctest::Approx(oracle.f1).epsilon(1e-12));
    }
}

TEST_CASE("grid search equals the exhaustive oracle") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const auto pm = random_prediction_matrix(rng, 50, 10);
        for (Metric metric :
             {Metric::accuracy, Metric::precision, Metric::recall, Metric::f1}) {
            const GridResult got = grid_search_threshold(pm, metric);
            const GridResult want = oracle_grid_search(pm, metric, GridSpec{});
            CHECK(got.threshold == want.threshold);
            CHECK(got.value == want.value);
        }
    }
}

TEST_CASE("recall is maximized at the smallest grid threshold") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const auto pm = random_prediction_matrix(rng, 40, 8);
        const GridResult result = grid_search_threshold(pm, Metric::recall);
        CHECK(result.threshold == doctest::Approx(0.01));

        // recall is non-increasing in tau
        double prev = 2.0;
        for (double tau : GridSpec{}.points()) {
            const auto preds = set_predictions(pm.probs, tau);
            double total_tp = 0, total_t = 0;
            for (std::size_t i = 0; i < preds.size(); ++i) {
                for (int t : pm.target_sets[i]) {
                    total_t += 1;
                    if (std::find(preds[i].begin(), preds[i].end(), t) != preds[i].end()) {
                        total_tp += 1;
                    }
                }
            }
            const double recall = total_tp / total_t;
            CHECK(recall <= prev + 1e-12);
            prev = recall;
        }
    }
}

TEST_CASE("ties break toward the smaller threshold") {
    PredictionMatrix pm;
    pm.probs = Mat<float>::Constant(3, 2, 0.5f);
    pm.target_sets = {{0, 1}, {0, 1}, {0, 1}};
    pm.langs = {Lang::en, Lang::en, Lang::en};
    const GridResult result = grid_search_threshold(pm, Metric::accuracy);
    CHECK(result.threshold == doctest::Approx(0.01));
    CHECK(result.value == 1.0);
}

TEST_CASE("undefined grid points are skipped, all-undefined raises") {
    // All probabilities sit below every grid point, so every threshold
    // yields empty prediction sets and the whole report is undefined.
    PredictionMatrix pm;
    pm.probs = Mat<float>::Constant(2, 2, 0.005f);
    pm.target_sets = {{0}, {1}};
    pm.langs = {Lang::en, Lang::en};
    for (Metric metric : {Metric::accuracy, Metric::precision, Metric::recall, Metric::f1}) {
        CHECK_THROWS_WITH_AS(grid_search_threshold(pm, metric),
                             doctest::Contains("AllUndefined"), Error);
    }
    // calibrate_per_language records those as undefined cells instead
    const ThresholdTable table = calibrate_per_language(pm);
    CHECK_FALSE(table.cells.at("recall").at("overall").defined);

    // A single above-threshold point at 0.5 keeps low grid points defined.
    pm.probs(0, 0) = 0.5f;
    const GridResult recall = grid_search_threshold(pm, Metric::recall);
    CHECK(recall.threshold == doctest::Approx(0.01));
    CHECK(recall.value == doctest::Approx(0.5));
}

TEST_CASE("metrics are invariant under record permutation") {
    std::mt19937_64 rng(21);
    const auto pm = random_prediction_matrix(rng, 30, 6);
    const auto preds = set_predictions(pm.probs, 0.4);
    const MetricReport base = compute_metrics(preds, pm.target_sets);

    std::vector<std::size_t> order(pm.record_count());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<int>> p2, t2;
    for (std::size_t i : order) {
        p2.push_back(preds[i]);
        t2.push_back(pm.target_sets[i]);
    }
    const MetricReport perm = compute_metrics(p2, t2);
    CHECK(perm.accuracy == doctest::Approx(base.accuracy));
    CHECK(perm.precision == doctest::Approx(base.precision));
    CHECK(perm.recall == doctest::Approx(base.recall));
    CHECK(perm.f1 == doctest::Approx(base.f1));
}

TEST_CASE("per-language calibration matches single-slice oracles") {
    std::mt19937_64 rng(31);
    // Two languages with disjoint behavior: en rows confident, da rows noisy.
    PredictionMatrix pm;
    const int n = 40, l = 5;
    pm.probs.resize(n, l);
    for (int i = 0; i < n; ++i) {
        const bool en = i % 2 == 0;
        pm.langs.push_back(en ? Lang::en : Lang::da);
        const int target = i % l;
        pm.target_sets.push_back({target});
        for (int j = 0; j < l; ++j) {
            const double base = j == target ? (en ? 0.9 : 0.55) : (en ? 0.05 : 0.45);
            pm.probs(i, j) = static_cast<float>(
                std::clamp(base + 0.02 * std::uniform_real_distribution<double>(-1, 1)(rng),
                           0.001, 0.999));
        }
    }

    const ThresholdTable table = calibrate_per_language(pm);
    // 4 metrics x (2 languages + overall)
    CHECK(table.cells.size() == 4);
    for (const auto& [metric, cells] : table.cells) {
        CHECK(cells.size() == 3);
        CHECK(cells.contains("overall"));
    }

    auto slice = [&pm](Lang lang) {
        PredictionMatrix out;
        std::vector<int> rows;
        for (int i = 0; i < static_cast<int>(pm.langs.size()); ++i) {
            if (pm.langs[static_cast<std::size_t>(i)] == lang) rows.push_back(i);
        }
        out.probs.resize(static_cast<Eigen::Index>(rows.size()), pm.probs.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out.probs.row(static_cast<Eigen::Index>(r)) = pm.probs.row(rows[r]);
            out.target_sets.push_back(pm.target_sets[static_cast<std::size_t>(rows[r])]);
            out.langs.push_back(lang);
        }
        return out;
    };
    for (Lang lang : {Lang::en, Lang::da}) {
        const auto sub = slice(lang);
        for (Metric metric :
             {Metric::accuracy, Metric::precision, Metric::recall, Metric::f1}) {
            const GridResult oracle = grid_search_threshold(sub, metric);
            const ThresholdCell& cell =
                table.cells.at(metric_name(metric)).at(std::string(lang_name(lang)));
            CHECK(cell.defined);
            CHECK(cell.threshold == oracle.threshold);
            CHECK(cell.value == oracle.value);
            CHECK(cell.n == sub.record_count());
        }
    }
}

TEST_CASE("single-language table equals pooled rows") {
    std::mt19937_64 rng(5);
    const auto pm = random_prediction_matrix(rng, 30, 6, 1);
    const ThresholdTable table = calibrate_per_language(pm);
    for (const auto& [metric, cells] : table.cells) {
        const auto& lang_cell = cells.at(std::string(lang_name(Lang::ca)));
        const auto& overall = cells.at("overall");
        CHECK(lang_cell.threshold == overall.threshold);
        CHECK(lang_cell.value == overall.value);
        CHECK(lang_cell.n == overall.n);
    }
}

TEST_CASE("threshold table serializes to json and text") {
    std::mt19937_64 rng(6);
    const auto pm = random_prediction_matrix(rng, 25, 5, 2);
    const ThresholdTable table = calibrate_per_language(pm);
    const auto j = threshold_table_json(table);
    const ThresholdTable back = threshold_table_from_json(j);
    for (const auto& [metric, cells] : table.cells) {
        for (const auto& [lang, cell] : cells) {
            const auto& restored = back.cells.at(metric).at(lang);
            CHECK(restored.defined == cell.defined);
            if (cell.defined) {
                CHECK(restored.threshold == cell.threshold);
                CHECK(restored.value == cell.value);
            }
            CHECK(restored.n == cell.n);
        }
    }
    const std::string text = threshold_table_text(table);
    CHECK(text.find("Language") != std::string::npos);
    CHECK(text.find("N. test obs.") != std::string::npos);
    CHECK(text.find("Optimal thr.") != std::string::npos);
    CHECK(text.find("overall") != std::string::npos);
}

TEST_CASE("grid spec validates and enumerates 99 default points") {
    const auto points = GridSpec{}.points();
    CHECK(points.size() == 99);
    CHECK(points.front() == doctest::Approx(0.01));
    CHECK(points.back() == doctest::Approx(0.99));
    GridSpec bad;
    bad.lo = 0.0;
    CHECK_THROWS_AS(bad.points(), Error);
}
