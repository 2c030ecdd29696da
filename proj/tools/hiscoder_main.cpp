// Command-line entry point wiring the full pipeline:
// prepare -> train -> calibrate -> predict -> evaluate -> embed -> finetune
// -> verify-draw / verify-score, driven by a JSON run configuration.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "occ/analysis.hpp"
#include "occ/calibrate.hpp"
#include "occ/config.hpp"
#include "occ/csv.hpp"
#include "occ/errors.hpp"
#include "occ/pipeline.hpp"
#include "occ/rng.hpp"

namespace {

using json = nlohmann::json;
using namespace occ;

/// Records every artifact a subcommand writes so partial outputs can be
/// removed when the command fails.
struct Artifacts {
    std::vector<std::filesystem::path> written;

    void write_text(const std::filesystem::path& path, std::string_view content) {
        occ::write_text_file(path, content);
        written.push_back(path);
    }
    void note(const std::filesystem::path& path) { written.push_back(path); }
    void discard_all() {
        for (const auto& path : written) {
            std::error_code ec;
            std::filesystem::remove(path, ec);
        }
    }
};

struct CommonFlags {
    std::string config_path;
    std::optional<double> threshold;
};

TranslitTable load_translit(const RunConfig& cfg) {
    if (cfg.paths.transliteration.empty()) return default_translit_table();
    return translit_table_from_file(cfg.paths.transliteration);
}

LabelSpace load_space(const RunConfig& cfg) {
    if (cfg.paths.label_space.empty()) {
        throw_config("InvalidConfig", "paths.label_space is required for this command");
    }
    return LabelSpace::from_file(cfg.paths.label_space);
}

void require_exists(const std::filesystem::path& path, const std::string& what) {
    if (path.empty()) throw_config("InvalidConfig", what + " path is not configured");
    if (!std::filesystem::exists(path)) {
        throw_config("InvalidConfig", what + " does not exist: " + path.string());
    }
}

std::string format_epoch_line(int epoch, double loss, double val_acc, bool saved) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "epoch=%d loss=%.6f val_acc=%.4f saved=%s", epoch, loss,
                  val_acc, saved ? "true" : "false");
    return buf;
}

json provenance_json(const CleanDataset& ds, std::size_t input_rows) {
    json dropped = json::object();
    for (const auto& [reason, count] : ds.dropped.by_reason) dropped[reason] = count;
    return json{{"input_rows", input_rows},
                {"kept", ds.records.size()},
                {"dropped", dropped}};
}

// ---------------------------------------------------------------- prepare

int cmd_prepare(const RunConfig& cfg, Artifacts& artifacts) {
    require_exists(cfg.paths.data, "paths.data");
    const LabelSpace space = load_space(cfg);
    const TranslitTable table = load_translit(cfg);

    const auto rows = raw_rows_from_csv(cfg.paths.data);
    CleanDataset cleaned = clean_dataset(rows, space, table);
    const std::size_t n_clean = cleaned.records.size();

    std::size_t synthetic_added = 0;
    if (!cfg.combine_sources.empty() && cfg.combine.draws_per_description > 0) {
        CleanDataset eligible;
        for (const auto& rec : cleaned.records) {
            for (const auto& src : cfg.combine_sources) {
                if (rec.source == src) {
                    eligible.records.push_back(rec);
                    break;
                }
            }
        }
        if (!eligible.records.empty()) {
            const CleanDataset combined = synthesize_combinations(eligible, cfg.combine);
            for (std::size_t i = eligible.records.size(); i < combined.records.size(); ++i) {
                cleaned.records.push_back(combined.records[i]);
                ++synthetic_added;
            }
        }
    }

    const SplitResult split = split_dataset(cleaned, cfg.split);
    const auto& out_dir = cfg.paths.output_dir;
    write_dataset_csv(out_dir / "train.csv", split.train);
    artifacts.note(out_dir / "train.csv");
    write_dataset_csv(out_dir / "val.csv", split.val);
    artifacts.note(out_dir / "val.csv");
    write_dataset_csv(out_dir / "test.csv", split.test);
    artifacts.note(out_dir / "test.csv");

    json prov = provenance_json(cleaned, rows.size());
    prov["synthetic_added"] = synthetic_added;
    prov["clean_before_synthesis"] = n_clean;
    prov["split"] = json{{"train", split.train.records.size()},
                         {"val", split.val.records.size()},
                         {"test", split.test.records.size()}};
    artifacts.write_text(out_dir / "provenance.json", prov.dump(2) + "\n");

    std::cout << "prepare: kept " << cleaned.records.size() << " records (" << synthetic_added
              << " synthetic), split " << split.train.records.size() << "/"
              << split.val.records.size() << "/" << split.test.records.size() << "\n";
    return 0;
}

// ------------------------------------------------------------------ train

int cmd_train(const RunConfig& cfg, Artifacts& artifacts, const std::string& train_csv,
              const std::string& val_csv) {
    const LabelSpace space = load_space(cfg);
    const TranslitTable table = load_translit(cfg);
    const std::filesystem::path train_path =
        train_csv.empty() ? cfg.paths.output_dir / "train.csv" : std::filesystem::path(train_csv);
    const std::filesystem::path val_path =
        val_csv.empty() ? cfg.paths.output_dir / "val.csv" : std::filesystem::path(val_csv);
    require_exists(train_path, "training data");
    require_exists(val_path, "validation data");
    if (cfg.paths.checkpoint.empty()) {
        throw_config("InvalidConfig", "paths.checkpoint is required for train");
    }

    const CleanDataset train_set = dataset_from_csv(train_path, space, table);
    const CleanDataset val_set = dataset_from_csv(val_path, space, table);

    std::ofstream log_file(cfg.paths.output_dir / "train_log.txt", std::ios::trunc);
    artifacts.note(cfg.paths.output_dir / "train_log.txt");
    artifacts.note(cfg.paths.checkpoint);
    const Checkpoint ckpt = train(train_set, val_set, space, cfg.model, cfg.train,
                                  [&log_file](int epoch, double loss, double acc, bool saved) {
                                      const std::string line =
                                          format_epoch_line(epoch, loss, acc, saved);
                                      log_file << line << '\n';
                                      std::cout << line << '\n';
                                  });
    log_file.close();
    std::cout << "train: best val_acc=" << ckpt.best_val_accuracy << " at epoch "
              << ckpt.meta.epochs_seen << ", checkpoint " << cfg.paths.checkpoint << "\n";
    return 0;
}

// -------------------------------------------------------------- calibrate

int cmd_calibrate(const RunConfig& cfg, Artifacts& artifacts, const std::string& data_csv) {
    const LabelSpace space = load_space(cfg);
    const TranslitTable table = load_translit(cfg);
    const std::filesystem::path data_path =
        data_csv.empty() ? cfg.paths.output_dir / "val.csv" : std::filesystem::path(data_csv);
    require_exists(data_path, "calibration data");
    require_exists(cfg.paths.checkpoint, "checkpoint");

    const Checkpoint ckpt = load_checkpoint(cfg.paths.checkpoint);
    const CleanDataset data = dataset_from_csv(data_path, space, table);
    if (data.records.empty()) throw_data("EmptyDataset", "no records in " + data_path.string());

    const OverallCalibration cal = calibrate_full(ckpt, space, data, cfg.grid);
    const auto& out_dir = cfg.paths.output_dir;
    artifacts.write_text(out_dir / "thresholds.json",
                         threshold_table_json(cal.with_lang).dump(2) + "\n");
    artifacts.write_text(out_dir / "thresholds.txt", threshold_table_text(cal.with_lang));
    artifacts.write_text(out_dir / "overall.json", overall_table_json(cal).dump(2) + "\n");
    artifacts.write_text(out_dir / "overall.txt", overall_table_text(cal));
    std::cout << overall_table_text(cal);
    return 0;
}

// ---------------------------------------------------------------- predict

int cmd_predict(const RunConfig& cfg, Artifacts& artifacts, const CommonFlags& flags,
                const std::string& input_csv, bool fallback_top1, const std::string& out_csv) {
    const LabelSpace space = load_space(cfg);
    const TranslitTable table = load_translit(cfg);
    require_exists(input_csv, "--input");
    require_exists(cfg.paths.checkpoint, "checkpoint");
    const double tau =
        resolve_threshold(flags.threshold, cfg.paths.output_dir / "thresholds.json");

    const Checkpoint ckpt = load_checkpoint(cfg.paths.checkpoint);
    const CsvTable csv = read_csv(input_csv);
    const std::size_t text_col = csv.column("occ_text");
    const std::size_t lang_col = csv.column("lang");
    const bool has_id = csv.has_column("id");
    const std::size_t id_col = has_id ? csv.column("id") : 0;

    std::vector<LangText> inputs;
    std::vector<std::string> ids;
    inputs.reserve(csv.rows.size());
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        const auto& row = csv.rows[i];
        const auto lang = try_parse_lang(row[lang_col]);
        inputs.emplace_back(lang.value_or(Lang::unk), normalize_text(row[text_col], table));
        ids.push_back(has_id ? row[id_col] : std::to_string(i));
    }

    const auto predictions = predict(ckpt, space, inputs, tau, fallback_top1);
    std::vector<std::vector<std::string>> rows;
    rows.reserve(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        std::string codes, probs;
        for (std::size_t k = 0; k < predictions[i].codes.size(); ++k) {
            if (k) {
                codes += ' ';
                probs += ' ';
            }
            codes += predictions[i].codes[k].digits();
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.6f", predictions[i].probs[k]);
            probs += buf;
        }
        rows.push_back({ids[i], inputs[i].second, std::string(lang_name(inputs[i].first)), codes,
                        probs});
    }
    const std::filesystem::path out_path =
        out_csv.empty() ? cfg.paths.output_dir / "predictions.csv"
                        : std::filesystem::path(out_csv);
    artifacts.write_text(out_path,
                         format_csv({"id", "text", "lang", "hisco_codes", "probs"}, rows));
    std::cout << "predict: " << predictions.size() << " rows at threshold " << tau << " -> "
              << out_path << "\n";
    return 0;
}

// --------------------------------------------------------------- evaluate

int cmd_evaluate(const RunConfig& cfg, Artifacts& artifacts, const CommonFlags& flags,
                 const std::string& data_csv, const std::string& train_csv) {
    const LabelSpace space = load_space(cfg);
    const TranslitTable table = load_translit(cfg);
    const std::filesystem::path data_path =
        data_csv.empty() ? cfg.paths.output_dir / "test.csv" : std::filesystem::path(data_csv);
    require_exists(data_path, "evaluation data");
    require_exists(cfg.paths.checkpoint, "checkpoint");
    const double tau =
        resolve_threshold(flags.threshold, cfg.paths.output_dir / "thresholds.json");

    const Checkpoint ckpt = load_checkpoint(cfg.paths.checkpoint);
    const CleanDataset data = dataset_from_csv(data_path, space, table);
    if (data.records.empty()) throw_data("EmptyDataset", "no records in " + data_path.string());

    std::map<std::string, std::size_t> counts;
    const std::filesystem::path train_path =
        train_csv.empty() ? cfg.paths.output_dir / "train.csv" : std::filesystem::path(train_csv);
    if (std::filesystem::exists(train_path)) {
        counts = target_code_counts(dataset_from_csv(train_path, space, table));
    }

    const PredictionMatrix pm = prediction_matrix(ckpt, space, data, true);
    const auto predicted = set_predictions(pm.probs, tau);
    const MetricReport report = compute_metrics(predicted, pm.target_sets);
    const auto& out_dir = cfg.paths.output_dir;

    json metrics{{"accuracy", report.accuracy}, {"precision", report.precision},
                 {"recall", report.recall},     {"f1", report.f1},
                 {"n", report.n},               {"threshold", tau}};
    artifacts.write_text(out_dir / "metrics.json", metrics.dump(2) + "\n");

    const auto stats = per_code_performance(pm, space, tau, counts);
    write_per_code_csv(out_dir / "per_code_stats.csv", stats);
    artifacts.note(out_dir / "per_code_stats.csv");

    // Trend over log training frequency, per metric.
    std::vector<std::vector<std::string>> trend_rows;
    json marks = json::object();
    for (const auto& [name, field] :
         std::vector<std::pair<std::string, std::optional<double> PerCodeStats::*>>{
             {"accuracy", &PerCodeStats::accuracy},
             {"precision", &PerCodeStats::precision},
             {"recall", &PerCodeStats::recall},
             {"f1", &PerCodeStats::f1}}) {
        std::vector<double> x, y;
        for (const auto& s : stats) {
            if (s.n_train >= 1 && (s.*field)) {
                x.push_back(std::log(static_cast<double>(s.n_train)));
                y.push_back(*(s.*field));
            }
        }
        if (x.size() < 2) continue;
        const TrendCurve curve = kernel_trend(x, y);
        for (std::size_t i = 0; i < curve.x.size(); ++i) {
            char xb[32], yb[32];
            std::snprintf(xb, sizeof(xb), "%.9g", curve.x[i]);
            std::snprintf(yb, sizeof(yb), "%.9g", curve.y[i]);
            trend_rows.push_back({name, xb, yb});
        }
        marks[name] = json{{"x_1pct", curve.x_mark_low}, {"x_99pct", curve.x_mark_high}};
    }
    artifacts.write_text(out_dir / "trend.csv", format_csv({"metric", "x", "y"}, trend_rows));
    artifacts.write_text(out_dir / "trend_marks.json", marks.dump(2) + "\n");

    if (!cfg.paths.hiscam.empty()) {
        require_exists(cfg.paths.hiscam, "paths.hiscam");
        const HiscamTable hiscam = HiscamTable::from_file(cfg.paths.hiscam);
        const auto ses = ses_regression(stats, hiscam);
        artifacts.write_text(out_dir / "ses_report.txt", ses_report_text(ses));
        json ses_json;
        for (const auto& [metric, pair] : ses) {
            auto reg_json = [](const RegressionResult& reg) {
                json terms = json::array();
                for (const auto& t : reg.terms) {
                    terms.push_back(json{{"name", t.name},
                                         {"coefficient", t.coefficient},
                                         {"robust_se", t.robust_se},
                                         {"ci_low", t.ci_low},
                                         {"ci_high", t.ci_high}});
                }
                return json{{"terms", terms}, {"n", reg.n}};
            };
            ses_json[metric] = json{{"panel_a", reg_json(pair.panel_a)},
                                    {"panel_b", reg_json(pair.panel_b)}};
        }
        artifacts.write_text(out_dir / "ses_report.json", ses_json.dump(2) + "\n");
    }

    char line[160];
    std::snprintf(line, sizeof(line),
                  "evaluate: n=%zu threshold=%.2f accuracy=%.4f precision=%.4f recall=%.4f "
                  "f1=%.4f\n",
                  report.n, tau, report.accuracy, report.precision, report.recall, report.f1);
    std::cout << line;
    return 0;
}

// ------------------------------------------------------------------ embed

int cmd_embed(const RunConfig& cfg, Artifacts& artifacts, const std::string& data_csv,
              bool with_pca) {
    const LabelSpace space = load_space(cfg);
    const TranslitTable table = load_translit(cfg);
    const std::filesystem::path data_path =
        data_csv.empty() ? cfg.paths.output_dir / "val.csv" : std::filesystem::path(data_csv);
    require_exists(data_path, "embedding data");
    require_exists(cfg.paths.checkpoint, "checkpoint");

    const Checkpoint ckpt = load_checkpoint(cfg.paths.checkpoint);
    const CleanDataset data = dataset_from_csv(data_path, space, table);
    if (data.records.empty()) throw_data("EmptyDataset", "no records in " + data_path.string());
    const auto out_path = cfg.paths.output_dir / "embeddings.csv";
    export_embeddings(ckpt, data, out_path, with_pca);
    artifacts.note(out_path);
    std::cout << "embed: " << data.records.size() << " rows -> " << out_path << "\n";
    return 0;
}

// --------------------------------------------------------------- finetune

int cmd_finetune(const RunConfig& cfg, Artifacts& artifacts, const std::string& data_csv,
                 const std::string& out_ckpt) {
    const LabelSpace space = load_space(cfg);
    const TranslitTable table = load_translit(cfg);
    require_exists(data_csv, "--data");
    require_exists(cfg.paths.checkpoint, "checkpoint");

    const Checkpoint base = load_checkpoint(cfg.paths.checkpoint);
    const CleanDataset data = dataset_from_csv(data_csv, space, table);

    TrainConfig tcfg = cfg.finetune;
    tcfg.checkpoint_path = out_ckpt.empty() ? cfg.paths.output_dir / "finetuned.ckpt"
                                            : std::filesystem::path(out_ckpt);
    std::ofstream log_file(cfg.paths.output_dir / "finetune_log.txt", std::ios::trunc);
    artifacts.note(cfg.paths.output_dir / "finetune_log.txt");
    artifacts.note(tcfg.checkpoint_path);
    const Checkpoint ckpt = finetune(base, data, space, tcfg, cfg.finetune_val_frac,
                                     [&log_file](int epoch, double loss, double acc, bool saved) {
                                         const std::string line =
                                             format_epoch_line(epoch, loss, acc, saved);
                                         log_file << line << '\n';
                                         std::cout << line << '\n';
                                     });
    std::cout << "finetune: best val_acc=" << ckpt.best_val_accuracy << " -> "
              << tcfg.checkpoint_path << "\n";
    return 0;
}

// ------------------------------------------------------------ verify-draw

int cmd_verify_draw(const RunConfig& cfg, Artifacts& artifacts, const std::string& predictions_csv,
                    std::size_t n) {
    const std::filesystem::path pred_path = predictions_csv.empty()
                                                ? cfg.paths.output_dir / "predictions.csv"
                                                : std::filesystem::path(predictions_csv);
    require_exists(pred_path, "--predictions");

    const CsvTable csv = read_csv(pred_path);
    const std::size_t id_col = csv.column("id");
    const std::size_t text_col = csv.column("text");
    const std::size_t lang_col = csv.column("lang");
    const std::size_t codes_col = csv.column("hisco_codes");
    const std::size_t probs_col = csv.column("probs");

    std::vector<ReviewRow> population;
    population.reserve(csv.rows.size());
    for (const auto& fields : csv.rows) {
        ReviewRow row;
        row.id = fields[id_col];
        row.text = fields[text_col];
        row.lang = try_parse_lang(fields[lang_col]).value_or(Lang::unk);
        std::istringstream codes(fields[codes_col]);
        std::string token;
        while (codes >> token) row.codes.push_back(HiscoCode::parse(token));
        std::istringstream probs(fields[probs_col]);
        double p = 0.0;
        while (probs >> p) row.probs.push_back(p);
        population.push_back(std::move(row));
    }

    const auto out_path = cfg.paths.output_dir / "review_sample.csv";
    draw_review_sample(population, n, component_seed(cfg.seed, SeedStream::review), out_path);
    artifacts.note(out_path);
    std::cout << "verify-draw: sampled " << n << " of " << population.size() << " -> " << out_path
              << "\n";
    return 0;
}

// ----------------------------------------------------------- verify-score

int cmd_verify_score(const RunConfig& cfg, Artifacts& artifacts, const std::string& annotated_csv) {
    require_exists(annotated_csv, "--annotated");
    const ReviewScore score = score_review_file(annotated_csv);

    json out{{"accuracy", score.accuracy}, {"n_checked", score.n_checked}};
    out["exact_agreement"] =
        score.exact_agreement ? json(*score.exact_agreement) : json(nullptr);
    out["substantial_agreement"] =
        score.substantial_agreement ? json(*score.substantial_agreement) : json(nullptr);
    artifacts.write_text(cfg.paths.output_dir / "review_score.json", out.dump(2) + "\n");

    std::cout << "verify-score: n=" << score.n_checked << " accuracy=" << score.accuracy;
    if (score.exact_agreement) std::cout << " exact=" << *score.exact_agreement;
    if (score.substantial_agreement) std::cout << " substantial=" << *score.substantial_agreement;
    std::cout << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hiscoder: train, calibrate and apply a character-level HISCO classifier"};
    app.require_subcommand(1);

    CommonFlags flags;
    double threshold_flag = -1.0;

    std::string train_csv, val_csv, data_csv, input_csv, out_csv, predictions_csv, annotated_csv,
        out_ckpt;
    bool fallback_top1 = false;
    bool with_pca = false;
    std::size_t sample_n = 100;

    auto add_config = [&flags](CLI::App* cmd) {
        cmd->add_option("-c,--config", flags.config_path, "run configuration JSON")->required();
    };

    auto* prepare = app.add_subcommand("prepare", "clean, synthesize and split the raw data");
    add_config(prepare);

    auto* train_cmd = app.add_subcommand("train", "train from random initialization");
    add_config(train_cmd);
    train_cmd->add_option("--train-data", train_csv, "training CSV (default: <output_dir>/train.csv)");
    train_cmd->add_option("--val-data", val_csv, "validation CSV (default: <output_dir>/val.csv)");

    auto* calibrate_cmd = app.add_subcommand("calibrate", "grid-search optimal thresholds");
    add_config(calibrate_cmd);
    calibrate_cmd->add_option("--data", data_csv, "labelled CSV (default: <output_dir>/val.csv)");

    auto* predict_cmd = app.add_subcommand("predict", "predict code sets for descriptions");
    add_config(predict_cmd);
    predict_cmd->add_option("--input", input_csv, "CSV with occ_text,lang[,id]")->required();
    predict_cmd->add_option("--threshold", threshold_flag,
                            "classification threshold (default: F1-optimal from calibration)");
    predict_cmd->add_flag("--fallback-top1", fallback_top1,
                          "return the argmax code when no probability clears the threshold");
    predict_cmd->add_option("--output", out_csv, "output CSV (default: <output_dir>/predictions.csv)");

    auto* evaluate_cmd = app.add_subcommand("evaluate", "metrics, per-code stats, trend and SES report");
    add_config(evaluate_cmd);
    evaluate_cmd->add_option("--data", data_csv, "labelled CSV (default: <output_dir>/test.csv)");
    evaluate_cmd->add_option("--train-data", train_csv,
                             "training CSV for per-code frequencies (default: <output_dir>/train.csv)");
    evaluate_cmd->add_option("--threshold", threshold_flag,
                             "classification threshold (default: F1-optimal from calibration)");

    auto* embed_cmd = app.add_subcommand("embed", "export pooled embeddings");
    add_config(embed_cmd);
    embed_cmd->add_option("--data", data_csv, "labelled CSV (default: <output_dir>/val.csv)");
    embed_cmd->add_flag("--pca2d", with_pca, "append a 2D PCA projection");

    auto* finetune_cmd = app.add_subcommand("finetune", "continue training on new data");
    add_config(finetune_cmd);
    finetune_cmd->add_option("--data", data_csv, "new labelled CSV")->required();
    finetune_cmd->add_option("--output", out_ckpt,
                             "output checkpoint (default: <output_dir>/finetuned.ckpt)");

    auto* draw_cmd = app.add_subcommand("verify-draw", "draw a manual-review sample");
    add_config(draw_cmd);
    draw_cmd->add_option("--predictions", predictions_csv,
                         "predictions CSV (default: <output_dir>/predictions.csv)");
    draw_cmd->add_option("-n,--sample-size", sample_n, "rows to sample")->required();

    auto* score_cmd = app.add_subcommand("verify-score", "score an annotated review sample");
    add_config(score_cmd);
    score_cmd->add_option("--annotated", annotated_csv, "annotated review CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // config errors exit with 2
    }

    Artifacts artifacts;
    try {
        const RunConfig cfg = RunConfig::from_file(flags.config_path);
        std::error_code ec;
        std::filesystem::create_directories(cfg.paths.output_dir, ec);
        if (threshold_flag >= 0.0) flags.threshold = threshold_flag;

        if (prepare->parsed()) return cmd_prepare(cfg, artifacts);
        if (train_cmd->parsed()) return cmd_train(cfg, artifacts, train_csv, val_csv);
        if (calibrate_cmd->parsed()) return cmd_calibrate(cfg, artifacts, data_csv);
        if (predict_cmd->parsed())
            return cmd_predict(cfg, artifacts, flags, input_csv, fallback_top1, out_csv);
        if (evaluate_cmd->parsed()) return cmd_evaluate(cfg, artifacts, flags, data_csv, train_csv);
        if (embed_cmd->parsed()) return cmd_embed(cfg, artifacts, data_csv, with_pca);
        if (finetune_cmd->parsed()) return cmd_finetune(cfg, artifacts, data_csv, out_ckpt);
        if (draw_cmd->parsed()) return cmd_verify_draw(cfg, artifacts, predictions_csv, sample_n);
        if (score_cmd->parsed()) return cmd_verify_score(cfg, artifacts, annotated_csv);
        return 2;
    } catch (const Error& e) {
        artifacts.discard_all();
        std::cerr << "error: category=" << static_cast<int>(e.category()) << " code=" << e.code()
                  << " " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        artifacts.discard_all();
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
