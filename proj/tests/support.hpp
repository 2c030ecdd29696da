#pragma once

// Shared fixtures and oracles for the test suites. Everything here is
// independent of the implementation paths it checks.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "occ/calibrate.hpp"
#include "occ/hisco.hpp"
#include "occ/ingest.hpp"
#include "occ/net.hpp"

namespace occ::testing {

inline LabelSpace tiny_space(int n) {
    std::vector<HiscoCode> codes;
    for (int i = 0; i < n; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "%05d", 10000 + i * 111);
        codes.push_back(HiscoCode::parse(buf));
    }
    return LabelSpace::from_codes(std::move(codes));
}

/// Deterministically separable fixture: each label has a distinctive word;
/// two-label records join two words with "and".
inline CleanDataset separable_dataset(const LabelSpace& space, int singles_per_label,
                                      int two_label_records) {
    const int labels = static_cast<int>(space.size());
    CleanDataset ds;
    auto word_for = [](int label) {
        std::string w;
        for (int j = 0; j < 3; ++j) w.push_back(static_cast<char>('a' + label % 26));
        w.push_back(static_cast<char>('a' + (label * 7 + 3) % 26));
        return w;
    };
    static const char* kPrefix[] = {"", "he is a ", "works as ", "lives of ", "old "};
    for (int label = 0; label < labels; ++label) {
        for (int v = 0; v < singles_per_label; ++v) {
            OccupationRecord rec;
            rec.text = std::string(kPrefix[v % 5]) + word_for(label);
            rec.lang = Lang::en;
            rec.targets = {space.code_at(static_cast<std::size_t>(label))};
            rec.source = "synthetic_fixture";
            ds.records.push_back(std::move(rec));
        }
    }
    for (int i = 0; i < two_label_records; ++i) {
        const int a = i % labels;
        const int b = (i * 5 + 1) % labels;
        if (a == b) continue;
        OccupationRecord rec;
        rec.text = word_for(a) + " and " + word_for(b);
        rec.lang = Lang::en;
        rec.targets = {space.code_at(static_cast<std::size_t>(a)),
                       space.code_at(static_cast<std::size_t>(b))};
        std::sort(rec.targets.begin(), rec.targets.end());
        rec.targets.erase(std::unique(rec.targets.begin(), rec.targets.end()), rec.targets.end());
        rec.source = "synthetic_fixture";
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

/// Random prediction matrix with non-empty targets, for calibration tests.
inline PredictionMatrix random_prediction_matrix(std::mt19937_64& rng, int max_n, int max_l,
                                                 int n_langs = 1) {
    std::uniform_int_distribution<int> n_dist(1, max_n), l_dist(2, max_l);
    std::uniform_real_distribution<double> p_dist(0.001, 0.999);
    const int n = n_dist(rng);
    const int l = l_dist(rng);
    PredictionMatrix pm;
    pm.probs.resize(n, l);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < l; ++j) {
            pm.probs(i, j) = static_cast<float>(p_dist(rng));
        }
        std::vector<int> targets;
        std::uniform_int_distribution<int> t_count(1, std::min(3, l));
        std::uniform_int_distribution<int> t_pick(0, l - 1);
        const int count = t_count(rng);
        for (int k = 0; k < count; ++k) targets.push_back(t_pick(rng));
        std::sort(targets.begin(), targets.end());
        targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
        pm.target_sets.push_back(std::move(targets));
        pm.langs.push_back(static_cast<Lang>(i % n_langs));
    }
    return pm;
}

/// Brute-force confusion-count oracle for compute_metrics.
struct OracleMetrics {
    double accuracy, precision, recall, f1;
    bool defined;
};

inline OracleMetrics oracle_metrics(const std::vector<std::vector<int>>& preds,
                                    const std::vector<std::vector<int>>& targets) {
    std::size_t exact = 0;
    double tp = 0, pred_total = 0, target_total = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (preds[i] == targets[i]) ++exact;
        for (int p : preds[i]) {
            ++pred_total;
            for (int t : targets[i]) {
                if (p == t) ++tp;
            }
        }
        target_total += static_cast<double>(targets[i].size());
    }
    OracleMetrics out{};
    out.defined = pred_total > 0;
    if (!out.defined) return out;
    out.accuracy = static_cast<double>(exact) / static_cast<double>(targets.size());
    out.precision = tp / pred_total;
    out.recall = tp / target_total;
    out.f1 = (out.precision + out.recall) > 0
                 ? 2 * out.precision * out.recall / (out.precision + out.recall)
                 : 0.0;
    return out;
}

}  // namespace occ::testing
