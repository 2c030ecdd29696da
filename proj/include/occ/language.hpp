#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace occ {

/// Closed set of language context tags. "unk" is the designated
/// unknown-language marker used both for missing metadata and for
/// training-time language dropout.
enum class Lang : unsigned char {
    ca, da, de, en, es, fr, gr, is, it, nl, no, pt, se, unk,
};

inline constexpr std::array<std::string_view, 14> kLangNames = {
    "ca", "da", "de", "en", "es", "fr", "gr", "is", "it", "nl", "no", "pt", "se", "unk",
};

inline std::string_view lang_name(Lang lang) {
    return kLangNames[static_cast<std::size_t>(lang)];
}

inline std::optional<Lang> try_parse_lang(std::string_view text) {
    for (std::size_t i = 0; i < kLangNames.size(); ++i) {
        if (kLangNames[i] == text) return static_cast<Lang>(i);
    }
    return std::nullopt;
}

}  // namespace occ
