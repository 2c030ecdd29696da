#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "occ/language.hpp"

namespace occ {

// Sentinels live in the Unicode private-use area so they can never collide
// with natural text; PAD doubles as the padding token id.
inline constexpr char32_t kClsToken = 0xE000;
inline constexpr char32_t kSepToken = 0xE001;
inline constexpr std::int32_t kPadId = 0;

/// Fixed-length model input: codepoint ids plus an attention mask.
/// Positions past the content carry kPadId and mask 0.
struct EncodedInput {
    std::vector<std::int32_t> token_ids;
    std::vector<std::uint8_t> attention_mask;

    std::size_t content_length() const;
};

/// Serializes `[CLS] lang [SEP] text` as codepoints, truncating to max_len
/// and right-padding. Throws MaxLenTooSmall when max_len cannot hold the
/// prefix plus one text character.
EncodedInput encode(Lang lang, std::string_view text, std::size_t max_len);

struct DecodedInput {
    Lang lang;
    std::string text;
};

/// Inverse of encode up to truncation; used by round-trip tests and debug
/// tooling.
DecodedInput decode(const EncodedInput& input);

struct AugmentConfig {
    double p_word_insert = 0.10;
    double p_char_pass = 0.10;
    double p_char_replace = 0.10;
    std::string alphabet = "abcdefghijklmnopqrstuvwxyz ";
    std::uint64_t rng_seed = 0;

    void validate() const;
};

/// Which branches fired during one augment call; lets tests measure the
/// configured rates exactly instead of inferring them from string diffs.
struct AugmentTrace {
    bool word_inserted = false;
    bool char_pass = false;
    int chars_seen = 0;
    int chars_replaced = 0;
};

/// Training-time string augmentation: with p_word_insert one of the input's
/// own words is inserted at a random word boundary; independently, with
/// p_char_pass every character is replaced with probability p_char_replace
/// by a uniform draw from the alphabet.
std::string augment(std::string_view text, const AugmentConfig& cfg, std::mt19937_64& rng,
                    AugmentTrace& trace);
std::string augment(std::string_view text, const AugmentConfig& cfg, std::mt19937_64& rng);

/// Returns Lang::unk with probability p_unknown, the input tag otherwise.
Lang apply_language_dropout(Lang lang, double p_unknown, std::mt19937_64& rng);

}  // namespace occ
