#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "occ/csv.hpp"
#include "occ/errors.hpp"
#include "occ/model.hpp"
#include "support.hpp"

using namespace occ;
using occ::testing::separable_dataset;
using occ::testing::tiny_space;

namespace {

ModelConfig desk_config(int labels) {
    ModelConfig cfg;
    cfg.hidden_dim = 32;
    cfg.num_hashes = 4;
    cfg.hash_buckets = 64;
    cfg.downsample_rate = 2;
    cfg.num_layers = 1;
    cfg.num_heads = 4;
    cfg.max_len = 48;
    cfg.label_count = labels;
    cfg.dropout_p = 0.05;
    return cfg;
}

TrainConfig quick_train(std::uint64_t seed) {
    TrainConfig tcfg;
    tcfg.batch_size = 16;
    tcfg.max_epochs = 4;
    tcfg.learning_rate = 2e-3;
    tcfg.rng_seed = seed;
    tcfg.augment.rng_seed = seed + 1;
    tcfg.augment.p_word_insert = 0.05;
    tcfg.augment.p_char_pass = 0.05;
    tcfg.p_lang_unknown = 0.25;
    return tcfg;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("hiscoder_model_" + name);
}

std::string file_bytes(const std::filesystem::path& path) { return read_text_file(path); }

}  // namespace

TEST_CASE("training learns the separable fixture and logs epochs") {
    const LabelSpace space = tiny_space(8);
    const CleanDataset train_set = separable_dataset(space, 4, 6);
    const CleanDataset val_set = separable_dataset(space, 1, 2);

    TrainConfig tcfg = quick_train(11);
    tcfg.max_epochs = 25;
    std::vector<double> losses;
    const Checkpoint ckpt =
        train(train_set, val_set, space, desk_config(8), tcfg,
              [&losses](int, double loss, double, bool) { losses.push_back(loss); });

    REQUIRE(losses.size() == 25);
    CHECK(losses.front() > losses.back());
    const double train_acc =
        exact_match_accuracy(ckpt.params, ckpt.config, space, train_set, 0.5);
    CHECK(train_acc >= 0.95);
    CHECK(ckpt.label_space_digest == space.digest());
}

TEST_CASE("training loss decreases across the first three epochs") {
    const LabelSpace space = tiny_space(8);
    const CleanDataset train_set = separable_dataset(space, 4, 6);
    const CleanDataset val_set = separable_dataset(space, 1, 2);
    TrainConfig tcfg = quick_train(3);
    tcfg.max_epochs = 3;
    std::vector<double> losses;
    train(train_set, val_set, space, desk_config(8), tcfg,
          [&losses](int, double loss, double, bool) { losses.push_back(loss); });
    REQUIRE(losses.size() == 3);
    CHECK(losses[1] < losses[0]);
    CHECK(losses[2] < losses[1]);
}

TEST_CASE("same seed reproduces the loss trajectory exactly") {
    const LabelSpace space = tiny_space(6);
    const CleanDataset train_set = separable_dataset(space, 3, 4);
    const CleanDataset val_set = separable_dataset(space, 1, 0);
    const TrainConfig tcfg = quick_train(21);

    std::vector<double> first, second;
    train(train_set, val_set, space, desk_config(6), tcfg,
          [&first](int, double loss, double, bool) { first.push_back(loss); });
    train(train_set, val_set, space, desk_config(6), tcfg,
          [&second](int, double loss, double, bool) { second.push_back(loss); });
    CHECK(first == second);
}

TEST_CASE("checkpoint is only rewritten on strict validation improvement") {
    const LabelSpace space = tiny_space(6);
    const CleanDataset train_set = separable_dataset(space, 3, 0);
    const CleanDataset val_set = separable_dataset(space, 1, 0);

    // A vanishing learning rate freezes validation accuracy after epoch 1,
    // so later epochs must not overwrite the checkpoint.
    TrainConfig tcfg = quick_train(5);
    tcfg.learning_rate = 1e-12;
    tcfg.checkpoint_path = temp_path("improve_a.ckpt");
    tcfg.max_epochs = 1;
    train(train_set, val_set, space, desk_config(6), tcfg);
    const std::string after_one = file_bytes(tcfg.checkpoint_path);

    tcfg.checkpoint_path = temp_path("improve_b.ckpt");
    tcfg.max_epochs = 3;
    std::vector<bool> saved;
    train(train_set, val_set, space, desk_config(6), tcfg,
          [&saved](int, double, double, bool s) { saved.push_back(s); });
    CHECK(saved == std::vector<bool>{true, false, false});
    CHECK(file_bytes(tcfg.checkpoint_path) == after_one);
}

TEST_CASE("exploding learning rate reports NonFiniteLoss") {
    const LabelSpace space = tiny_space(4);
    const CleanDataset train_set = separable_dataset(space, 3, 0);
    const CleanDataset val_set = separable_dataset(space, 1, 0);
    TrainConfig tcfg = quick_train(1);
    tcfg.learning_rate = 1e18;
    tcfg.max_epochs = 8;
    CHECK_THROWS_WITH_AS(train(train_set, val_set, space, desk_config(4), tcfg),
                         doctest::Contains("NonFiniteLoss"), Error);
}

TEST_CASE("empty datasets are rejected") {
    const LabelSpace space = tiny_space(4);
    const CleanDataset empty;
    const CleanDataset data = separable_dataset(space, 1, 0);
    CHECK_THROWS_AS(train(empty, data, space, desk_config(4), quick_train(1)), Error);
    CHECK_THROWS_AS(train(data, empty, space, desk_config(4), quick_train(1)), Error);
}

TEST_CASE("checkpoint round trip is bit exact") {
    const LabelSpace space = tiny_space(5);
    const ModelConfig cfg = desk_config(5);
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.params = init_params<float>(cfg, 123);
    ckpt.label_space_digest = space.digest();
    ckpt.best_val_accuracy = 0.75;
    ckpt.meta.epochs_seen = 7;
    ckpt.meta.seed = 99;

    const auto path = temp_path("roundtrip.ckpt");
    save_checkpoint(ckpt, path);
    const Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.label_space_digest == ckpt.label_space_digest);
    CHECK(loaded.best_val_accuracy == ckpt.best_val_accuracy);
    CHECK(loaded.meta.epochs_seen == 7);
    CHECK(loaded.meta.seed == 99);

    std::vector<LangText> inputs;
    for (int i = 0; i < 10; ++i) {
        inputs.emplace_back(Lang::en, "worker number " + std::to_string(i));
    }
    const Mat<float> before = predict_proba(ckpt, space, inputs);
    const Mat<float> after = predict_proba(loaded, space, inputs);
    CHECK(before == after);

    // save -> load -> save produces identical bytes
    const auto path2 = temp_path("roundtrip2.ckpt");
    save_checkpoint(loaded, path2);
    CHECK(file_bytes(path) == file_bytes(path2));
}

TEST_CASE("corrupt checkpoints are rejected") {
    const ModelConfig cfg = desk_config(5);
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.params = init_params<float>(cfg, 1);
    ckpt.label_space_digest = "0123456789abcdef";

    const auto path = temp_path("corrupt.ckpt");
    save_checkpoint(ckpt, path);
    const std::string bytes = file_bytes(path);

    SUBCASE("truncation") {
        write_text_file(path, bytes.substr(0, bytes.size() / 2));
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("CorruptCheckpoint"), Error);
    }
    SUBCASE("bad magic") {
        std::string mutated = bytes;
        mutated[0] = 'X';
        write_text_file(path, mutated);
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("CorruptCheckpoint"), Error);
    }
    SUBCASE("unsupported version") {
        std::string mutated = bytes;
        mutated[4] = 9;  // version u32 LE
        write_text_file(path, mutated);
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), Error);
    }
    SUBCASE("trailing junk") {
        write_text_file(path, bytes + "extra");
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("CorruptCheckpoint"), Error);
    }
}

TEST_CASE("predict applies threshold and fallback") {
    const LabelSpace space = tiny_space(4);
    const ModelConfig cfg = desk_config(4);
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.params = init_params<float>(cfg, 3);
    ckpt.label_space_digest = space.digest();

    const std::vector<LangText> inputs = {{Lang::en, "farmer"}};

    SUBCASE("threshold just above zero returns every code") {
        const auto preds = predict(ckpt, space, inputs, 1e-9, false);
        CHECK(preds[0].codes.size() == space.size());
    }
    SUBCASE("threshold near one with fallback returns the argmax singleton") {
        const auto preds = predict(ckpt, space, inputs, 0.999999, true);
        REQUIRE(preds[0].codes.size() == 1);
        const Mat<float> probs = predict_proba(ckpt, space, inputs);
        Eigen::Index best = 0;
        probs.row(0).maxCoeff(&best);
        CHECK(preds[0].codes[0] == space.code_at(static_cast<std::size_t>(best)));
        CHECK(preds[0].probs[0] == doctest::Approx(probs(0, best)));
    }
    SUBCASE("threshold near one without fallback returns empty") {
        const auto preds = predict(ckpt, space, inputs, 0.999999, false);
        CHECK(preds[0].codes.empty());
    }
    SUBCASE("out of range threshold throws") {
        CHECK_THROWS_AS(predict(ckpt, space, inputs, 0.0, false), Error);
        CHECK_THROWS_AS(predict(ckpt, space, inputs, 1.0, false), Error);
    }
    SUBCASE("digest mismatch is rejected") {
        const LabelSpace other = tiny_space(5);
        CHECK_THROWS_WITH_AS(predict(ckpt, other, inputs, 0.5, false),
                             doctest::Contains("LabelSpaceMismatch"), Error);
    }
}

TEST_CASE("embed returns the pooled pre-head representation") {
    const LabelSpace space = tiny_space(4);
    const ModelConfig cfg = desk_config(4);
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.params = init_params<float>(cfg, 4);
    ckpt.label_space_digest = space.digest();

    const std::vector<LangText> inputs = {{Lang::en, "farmer"},
                                          {Lang::en, "farmer"},
                                          {Lang::da, "farmer"}};
    const Mat<float> e = embed(ckpt, inputs);
    CHECK(e.rows() == 3);
    CHECK(e.cols() == cfg.hidden_dim);
    CHECK(e.row(0) == e.row(1));  // identical inputs -> identical embeddings
    // different language tags are not required to be equal (and in general differ)
}

TEST_CASE("finetune respects the label-space contract") {
    const LabelSpace space = tiny_space(6);
    const CleanDataset train_set = separable_dataset(space, 3, 4);
    const CleanDataset val_set = separable_dataset(space, 1, 0);
    TrainConfig tcfg = quick_train(31);
    tcfg.max_epochs = 6;
    const Checkpoint base = train(train_set, val_set, space, desk_config(6), tcfg);

    SUBCASE("zero epochs returns identical parameters") {
        TrainConfig ft = quick_train(32);
        ft.max_epochs = 0;
        const Checkpoint out = finetune(base, train_set, space, ft);
        bool identical = true;
        std::vector<const Mat<float>*> a, b;
        visit_tensors(const_cast<Parameters&>(base.params),
                      [&a](const std::string&, Mat<float>& m) { a.push_back(&m); });
        visit_tensors(const_cast<Parameters&>(out.params),
                      [&b](const std::string&, Mat<float>& m) { b.push_back(&m); });
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (*a[i] != *b[i]) identical = false;
        }
        CHECK(identical);
    }

    SUBCASE("codes outside the space are rejected") {
        const LabelSpace wide = tiny_space(7);
        CleanDataset bad = separable_dataset(wide, 1, 0);
        CHECK_THROWS_WITH_AS(finetune(base, bad, space, quick_train(33)),
                             doctest::Contains("LabelSpaceMismatch"), Error);
    }

    SUBCASE("digest mismatch is rejected up front") {
        const LabelSpace other = tiny_space(9);
        const CleanDataset data = separable_dataset(other, 1, 0);
        CHECK_THROWS_AS(finetune(base, data, other, quick_train(34)), Error);
    }

    SUBCASE("finetuning on a shifted style improves its training accuracy") {
        // Style shift: the same label words wrapped in new phrasing.
        CleanDataset shifted;
        for (const auto& rec : separable_dataset(space, 3, 0).records) {
            OccupationRecord moved = rec;
            moved.text = "station of " + rec.text + " here";
            shifted.records.push_back(std::move(moved));
        }
        const double before =
            exact_match_accuracy(base.params, base.config, space, shifted, 0.5);
        TrainConfig ft = quick_train(35);
        ft.max_epochs = 12;
        ft.learning_rate = 1e-3;
        const Checkpoint tuned = finetune(base, shifted, space, ft, 0.2);
        const double after =
            exact_match_accuracy(tuned.params, tuned.config, space, shifted, 0.5);
        CHECK(after > before);
    }
}
