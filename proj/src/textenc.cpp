#include "occ/textenc.hpp"

#include <algorithm>

#include "occ/errors.hpp"
#include "occ/rng.hpp"
#include "occ/unicode.hpp"

namespace occ {

std::size_t EncodedInput::content_length() const {
    std::size_t n = 0;
    for (auto m : attention_mask) n += m;
    return n;
}

EncodedInput encode(Lang lang, std::string_view text, std::size_t max_len) {
    const std::string_view tag = lang_name(lang);
    // [CLS] + tag + [SEP] + at least one text position must fit.
    if (max_len < tag.size() + 3) {
        throw_config("MaxLenTooSmall", "max_len " + std::to_string(max_len) +
                                           " cannot hold the language prefix");
    }

    std::vector<std::int32_t> ids;
    ids.reserve(max_len);
    ids.push_back(static_cast<std::int32_t>(kClsToken));
    for (char c : tag) ids.push_back(static_cast<std::int32_t>(c));
    ids.push_back(static_cast<std::int32_t>(kSepToken));
    for (char32_t cp : decode_utf8(text)) {
        if (ids.size() == max_len) break;
        ids.push_back(static_cast<std::int32_t>(cp));
    }
    if (ids.size() > max_len) ids.resize(max_len);

    EncodedInput out;
    out.attention_mask.assign(max_len, 0);
    std::fill(out.attention_mask.begin(), out.attention_mask.begin() + ids.size(), 1);
    ids.resize(max_len, kPadId);
    out.token_ids = std::move(ids);
    return out;
}

DecodedInput decode(const EncodedInput& input) {
    const std::size_t content = input.content_length();
    if (content == 0 || input.token_ids[0] != static_cast<std::int32_t>(kClsToken)) {
        throw_data("MalformedInput", "encoded input does not start with [CLS]");
    }
    std::string tag;
    std::size_t i = 1;
    while (i < content && input.token_ids[i] != static_cast<std::int32_t>(kSepToken)) {
        tag.push_back(static_cast<char>(input.token_ids[i]));
        ++i;
    }
    if (i == content) throw_data("MalformedInput", "encoded input has no [SEP]");
    const auto lang = try_parse_lang(tag);
    if (!lang) throw_data("MalformedInput", "unknown language tag '" + tag + "'");

    std::string text;
    for (++i; i < content; ++i) {
        append_utf8(text, static_cast<char32_t>(input.token_ids[i]));
    }
    return {*lang, std::move(text)};
}

void AugmentConfig::validate() const {
    for (double p : {p_word_insert, p_char_pass, p_char_replace}) {
        if (p < 0.0 || p > 1.0) {
            throw_config("InvalidConfig", "augmentation probabilities must lie in [0,1]");
        }
    }
}

namespace {

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string word;
    for (char c : text) {
        if (c == ' ') {
            if (!word.empty()) words.push_back(std::move(word));
            word.clear();
        } else {
            word.push_back(c);
        }
    }
    if (!word.empty()) words.push_back(std::move(word));
    return words;
}

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out.push_back(' ');
        out += words[i];
    }
    return out;
}

}  // namespace

std::string augment(std::string_view text, const AugmentConfig& cfg, std::mt19937_64& rng,
                    AugmentTrace& trace) {
    cfg.validate();
    std::string current(text);

    // Word insertion draws from the input's own words.
    if (uniform01(rng) < cfg.p_word_insert) {
        std::vector<std::string> words = split_words(current);
        if (!words.empty()) {
            const std::string word = words[uniform_index(rng, words.size())];
            const std::size_t boundary = uniform_index(rng, words.size() + 1);
            words.insert(words.begin() + static_cast<std::ptrdiff_t>(boundary), word);
            current = join_words(words);
            trace.word_inserted = true;
        }
    }

    if (uniform01(rng) < cfg.p_char_pass) {
        trace.char_pass = true;
        const std::vector<char32_t> alphabet = decode_utf8(cfg.alphabet);
        std::vector<char32_t> chars = decode_utf8(current);
        trace.chars_seen = static_cast<int>(chars.size());
        if (!alphabet.empty()) {
            for (auto& cp : chars) {
                if (uniform01(rng) < cfg.p_char_replace) {
                    cp = alphabet[uniform_index(rng, alphabet.size())];
                    ++trace.chars_replaced;
                }
            }
        }
        current = encode_utf8(chars);
    }
    return current;
}

std::string augment(std::string_view text, const AugmentConfig& cfg, std::mt19937_64& rng) {
    AugmentTrace trace;
    return augment(text, cfg, rng, trace);
}

Lang apply_language_dropout(Lang lang, double p_unknown, std::mt19937_64& rng) {
    if (p_unknown < 0.0 || p_unknown > 1.0) {
        throw_config("InvalidConfig", "p_unknown must lie in [0,1]");
    }
    return uniform01(rng) < p_unknown ? Lang::unk : lang;
}

}  // namespace occ
