#include "occ/config.hpp"

#include <set>

#include "occ/csv.hpp"
#include "occ/errors.hpp"
#include "occ/rng.hpp"

namespace occ {

namespace {

using json = nlohmann::json;

void expect_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw_config("InvalidConfig", where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.contains(it.key())) {
            throw_config("InvalidConfig", "unknown key '" + it.key() + "' in " + where);
        }
    }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception&) {
            throw_config("InvalidConfig", std::string("bad value for '") + key + "'");
        }
    }
}

void maybe_path(const json& j, const char* key, std::filesystem::path& out) {
    std::string s;
    maybe(j, key, s);
    if (!s.empty()) out = s;
}

}  // namespace

std::uint64_t component_seed(std::uint64_t global_seed, SeedStream stream) {
    return derive_seed(global_seed, {static_cast<std::uint64_t>(stream)});
}

RunConfig RunConfig::from_json(const json& j) {
    expect_keys(j, "config", {"seed", "paths", "model", "train", "combine", "split",
                              "calibration", "finetune"});
    RunConfig cfg;
    maybe(j, "seed", cfg.seed);

    if (j.contains("paths")) {
        const json& p = j.at("paths");
        expect_keys(p, "paths", {"data", "label_space", "transliteration", "hiscam",
                                 "checkpoint", "output_dir"});
        maybe_path(p, "data", cfg.paths.data);
        maybe_path(p, "label_space", cfg.paths.label_space);
        maybe_path(p, "transliteration", cfg.paths.transliteration);
        maybe_path(p, "hiscam", cfg.paths.hiscam);
        maybe_path(p, "checkpoint", cfg.paths.checkpoint);
        maybe_path(p, "output_dir", cfg.paths.output_dir);
    }

    if (j.contains("model")) {
        const json& m = j.at("model");
        expect_keys(m, "model", {"hidden_dim", "num_hashes", "hash_buckets", "downsample_rate",
                                 "num_layers", "num_heads", "max_len", "dropout_p"});
        maybe(m, "hidden_dim", cfg.model.hidden_dim);
        maybe(m, "num_hashes", cfg.model.num_hashes);
        maybe(m, "hash_buckets", cfg.model.hash_buckets);
        maybe(m, "downsample_rate", cfg.model.downsample_rate);
        maybe(m, "num_layers", cfg.model.num_layers);
        maybe(m, "num_heads", cfg.model.num_heads);
        maybe(m, "max_len", cfg.model.max_len);
        maybe(m, "dropout_p", cfg.model.dropout_p);
    }

    auto read_train = [](const json& t, const char* where, TrainConfig& out) {
        expect_keys(t, where,
                    {"batch_size", "max_epochs", "learning_rate", "adam_beta1", "adam_beta2",
                     "adam_epsilon", "p_lang_unknown", "augment"});
        maybe(t, "batch_size", out.batch_size);
        maybe(t, "max_epochs", out.max_epochs);
        maybe(t, "learning_rate", out.learning_rate);
        maybe(t, "adam_beta1", out.adam_beta1);
        maybe(t, "adam_beta2", out.adam_beta2);
        maybe(t, "adam_epsilon", out.adam_epsilon);
        maybe(t, "p_lang_unknown", out.p_lang_unknown);
        if (t.contains("augment")) {
            const json& a = t.at("augment");
            expect_keys(a, "augment",
                        {"p_word_insert", "p_char_pass", "p_char_replace", "alphabet"});
            maybe(a, "p_word_insert", out.augment.p_word_insert);
            maybe(a, "p_char_pass", out.augment.p_char_pass);
            maybe(a, "p_char_replace", out.augment.p_char_replace);
            maybe(a, "alphabet", out.augment.alphabet);
        }
    };
    if (j.contains("train")) read_train(j.at("train"), "train", cfg.train);

    // Finetune inherits the training block, then applies its own overrides.
    cfg.finetune = cfg.train;
    cfg.finetune.learning_rate = cfg.train.learning_rate * 0.1;
    cfg.finetune.max_epochs = 3;
    if (j.contains("finetune")) {
        const json& f = j.at("finetune");
        expect_keys(f, "finetune",
                    {"batch_size", "max_epochs", "learning_rate", "adam_beta1", "adam_beta2",
                     "adam_epsilon", "p_lang_unknown", "augment", "val_frac"});
        json train_part = f;
        train_part.erase("val_frac");
        read_train(train_part, "finetune", cfg.finetune);
        maybe(f, "val_frac", cfg.finetune_val_frac);
    }

    if (j.contains("combine")) {
        const json& c = j.at("combine");
        expect_keys(c, "combine", {"and_words", "draws_per_description", "sources"});
        if (c.contains("and_words")) {
            for (auto it = c.at("and_words").begin(); it != c.at("and_words").end(); ++it) {
                const auto lang = try_parse_lang(it.key());
                if (!lang) {
                    throw_config("InvalidConfig",
                                 "combine.and_words has unknown language '" + it.key() + "'");
                }
                cfg.combine.and_word[*lang] = it.value().get<std::string>();
            }
        }
        maybe(c, "draws_per_description", cfg.combine.draws_per_description);
        maybe(c, "sources", cfg.combine_sources);
    }

    if (j.contains("split")) {
        const json& s = j.at("split");
        expect_keys(s, "split", {"train", "val", "test"});
        maybe(s, "train", cfg.split.train_frac);
        maybe(s, "val", cfg.split.val_frac);
        maybe(s, "test", cfg.split.test_frac);
    }

    if (j.contains("calibration")) {
        const json& g = j.at("calibration");
        expect_keys(g, "calibration", {"lo", "hi", "step"});
        maybe(g, "lo", cfg.grid.lo);
        maybe(g, "hi", cfg.grid.hi);
        maybe(g, "step", cfg.grid.step);
    }

    // One global seed fans out to every seeded component.
    cfg.split.rng_seed = component_seed(cfg.seed, SeedStream::split);
    cfg.combine.rng_seed = component_seed(cfg.seed, SeedStream::combine);
    cfg.train.rng_seed = component_seed(cfg.seed, SeedStream::train);
    cfg.train.augment.rng_seed = component_seed(cfg.seed, SeedStream::augment);
    cfg.finetune.rng_seed = component_seed(cfg.seed, SeedStream::finetune);
    cfg.finetune.augment.rng_seed = component_seed(cfg.seed, SeedStream::augment);
    cfg.train.checkpoint_path = cfg.paths.checkpoint;
    return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw_config("InvalidConfig", "cannot parse " + path.string() + ": " + e.what());
    } catch (const Error&) {
        throw_config("InvalidConfig", "cannot open config file " + path.string());
    }
    return from_json(j);
}

}  // namespace occ
