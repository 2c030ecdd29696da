#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "occ/errors.hpp"
#include "occ/rng.hpp"
#include "occ/textenc.hpp"

using namespace occ;

TEST_CASE("encode lays out [CLS] lang [SEP] text with padding") {
    const EncodedInput enc = encode(Lang::en, "farmer", 16);
    const std::vector<std::int32_t> expected = {0xE000, 'e', 'n', 0xE001, 'f', 'a', 'r', 'm',
                                                'e',    'r', 0,   0,      0,   0,   0,   0};
    CHECK(enc.token_ids == expected);
    for (std::size_t i = 0; i < 16; ++i) {
        CHECK(enc.attention_mask[i] == (i < 10 ? 1 : 0));
    }
    CHECK(enc.content_length() == 10);
}

TEST_CASE("encode handles unk tag and truncation") {
    const EncodedInput unk = encode(Lang::unk, "x", 8);
    CHECK(unk.token_ids[0] == 0xE000);
    CHECK(unk.token_ids[1] == 'u');
    CHECK(unk.token_ids[2] == 'n');
    CHECK(unk.token_ids[3] == 'k');
    CHECK(unk.token_ids[4] == 0xE001);
    CHECK(unk.token_ids[5] == 'x');
    CHECK(unk.content_length() == 6);

    const EncodedInput truncated = encode(Lang::en, "a very long occupational text", 12);
    CHECK(truncated.token_ids.size() == 12);
    CHECK(truncated.content_length() == 12);  // mask all ones

    CHECK_THROWS_AS(encode(Lang::unk, "x", 5), Error);  // cannot hold prefix + 1 char
}

TEST_CASE("decode inverts encode up to truncation") {
    for (Lang lang : {Lang::en, Lang::da, Lang::unk, Lang::pt}) {
        for (const std::string text : {"farmer", "gaardmand og fisker", "x"}) {
            const auto enc = encode(lang, text, 64);
            const auto dec = decode(enc);
            CHECK(dec.lang == lang);
            CHECK(dec.text == text);
        }
    }
    // truncated text comes back as the prefix that survived
    const auto enc = encode(Lang::en, "abcdefghij", 9);
    const auto dec = decode(enc);
    CHECK(dec.lang == Lang::en);
    CHECK(dec.text == "abcde");
}

TEST_CASE("encode is deterministic and distinct per language tag") {
    const auto a = encode(Lang::en, "farmer", 32);
    const auto b = encode(Lang::en, "farmer", 32);
    const auto c = encode(Lang::da, "farmer", 32);
    CHECK(a.token_ids == b.token_ids);
    CHECK(a.token_ids != c.token_ids);
}

TEST_CASE("augment with zero probabilities is the identity") {
    AugmentConfig cfg;
    cfg.p_word_insert = 0.0;
    cfg.p_char_pass = 0.0;
    std::mt19937_64 rng(1);
    CHECK(augment("he is a farmer", cfg, rng) == "he is a farmer");
}

TEST_CASE("forced character replacement rewrites every character") {
    AugmentConfig cfg;
    cfg.p_word_insert = 0.0;
    cfg.p_char_pass = 1.0;
    cfg.p_char_replace = 1.0;
    cfg.alphabet = "z";
    std::mt19937_64 rng(1);
    CHECK(augment("abc", cfg, rng) == "zzz");
}

TEST_CASE("augment is reproducible for a fixed seed") {
    AugmentConfig cfg;  // defaults
    std::mt19937_64 a(42), b(42);
    for (int i = 0; i < 50; ++i) {
        CHECK(augment("he is a farmer and he fishes", cfg, a) ==
              augment("he is a farmer and he fishes", cfg, b));
    }
}

TEST_CASE("word insertion adds one of the input's own words") {
    AugmentConfig cfg;
    cfg.p_word_insert = 1.0;
    cfg.p_char_pass = 0.0;
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        AugmentTrace trace;
        const std::string out = augment("one two three", cfg, rng, trace);
        CHECK(trace.word_inserted);
        // exactly one extra word, and it is drawn from the input
        std::istringstream iss(out);
        std::vector<std::string> words;
        std::string w;
        while (iss >> w) words.push_back(w);
        CHECK(words.size() == 4);
        for (const auto& word : words) {
            CHECK((word == "one" || word == "two" || word == "three"));
        }
    }
}

TEST_CASE("alteration rate matches the closed-form binomial probability") {
    // Alphabet disjoint from the input characters, so any replacement is
    // visible: P(altered) = 1 - (1-pw) * ((1-pp) + pp * (1-pr)^len).
    AugmentConfig cfg;
    cfg.p_word_insert = 0.10;
    cfg.p_char_pass = 0.10;
    cfg.p_char_replace = 0.10;
    cfg.alphabet = "xyz";
    const std::string input = "abc def";  // 7 chars, none in alphabet
    const double p_altered =
        1.0 - (1.0 - cfg.p_word_insert) *
                  ((1.0 - cfg.p_char_pass) +
                   cfg.p_char_pass * std::pow(1.0 - cfg.p_char_replace, 7));

    const int trials = 100000;
    int altered = 0;
    for (int i = 0; i < trials; ++i) {
        auto rng = keyed_rng(1234, {static_cast<std::uint64_t>(i)});
        if (augment(input, cfg, rng) != input) ++altered;
    }
    const double observed = static_cast<double>(altered) / trials;
    const double half_width = 2.5758 * std::sqrt(p_altered * (1 - p_altered) / trials);
    CHECK(observed > p_altered - half_width);
    CHECK(observed < p_altered + half_width);
}

TEST_CASE("language dropout hits the configured rate") {
    std::mt19937_64 rng(9);
    SUBCASE("p = 0 never substitutes") {
        for (int i = 0; i < 1000; ++i) CHECK(apply_language_dropout(Lang::da, 0.0, rng) == Lang::da);
    }
    SUBCASE("p = 1 always substitutes") {
        for (int i = 0; i < 1000; ++i) {
            CHECK(apply_language_dropout(Lang::da, 1.0, rng) == Lang::unk);
        }
    }
    SUBCASE("p = 0.25 lands inside the 99% binomial interval") {
        const int trials = 100000;
        int unk = 0;
        for (int i = 0; i < trials; ++i) {
            if (apply_language_dropout(Lang::da, 0.25, rng) == Lang::unk) ++unk;
        }
        const double observed = static_cast<double>(unk) / trials;
        const double half_width = 2.5758 * std::sqrt(0.25 * 0.75 / trials);
        CHECK(observed > 0.25 - half_width);
        CHECK(observed < 0.25 + half_width);
    }
}

TEST_CASE("augment only changes length via word insertion") {
    AugmentConfig cfg;
    cfg.p_word_insert = 0.0;
    cfg.p_char_pass = 1.0;
    cfg.p_char_replace = 0.5;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        const std::string out = augment("some occupational text", cfg, rng);
        CHECK(out.size() == std::string("some occupational text").size());
    }
}
