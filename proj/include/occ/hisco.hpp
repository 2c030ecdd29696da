#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "occ/language.hpp"

namespace occ {

/// A validated 5-digit HISCO occupation code.
class HiscoCode {
public:
    /// Parses after stripping surrounding whitespace. Throws
    /// Error("MalformedCode") on wrong length or non-digit characters.
    static HiscoCode parse(std::string_view text);

    const std::string& digits() const noexcept { return digits_; }
    /// Major-group digit, used as the sector key in embedding exports.
    char first_digit() const noexcept { return digits_[0]; }

    friend bool operator==(const HiscoCode&, const HiscoCode&) = default;
    friend auto operator<=>(const HiscoCode&, const HiscoCode&) = default;

private:
    explicit HiscoCode(std::string digits) : digits_(std::move(digits)) {}
    std::string digits_;
};

/// The ordered label universe: a bijection between codes and classifier
/// output indices. Immutable after construction and shareable across
/// threads.
class LabelSpace {
public:
    /// Loads a newline-separated code list; index = 0-based line number.
    /// Throws EmptyFile, MalformedCode or DuplicateCode.
    static LabelSpace from_file(const std::filesystem::path& path);
    static LabelSpace from_codes(std::vector<HiscoCode> codes);

    std::size_t size() const noexcept { return codes_.size(); }
    const HiscoCode& code_at(std::size_t index) const { return codes_.at(index); }
    const std::vector<HiscoCode>& codes() const noexcept { return codes_; }

    std::optional<std::size_t> find(const HiscoCode& code) const;
    bool contains(const HiscoCode& code) const { return find(code).has_value(); }
    /// Throws Error("UnknownCode") when absent.
    std::size_t index_of(const HiscoCode& code) const;

    /// FNV-1a 64 over the code list, hex-encoded. Stored in checkpoints so
    /// a model can refuse a mismatched label universe.
    const std::string& digest() const noexcept { return digest_; }

private:
    std::vector<HiscoCode> codes_;
    std::unordered_map<std::string, std::size_t> index_;
    std::string digest_;
};

/// One description + language context + target code set. The unit of
/// training and evaluation. Targets are kept sorted and unique (1..5 codes).
struct OccupationRecord {
    std::string text;
    Lang lang = Lang::unk;
    std::vector<HiscoCode> targets;
    std::string source;
    bool synthetic = false;
};

/// Multi-hot target vector over the label space. Throws UnknownCode for
/// targets outside the space and InvalidTargets for an empty set.
std::vector<std::uint8_t> to_multihot(const std::vector<HiscoCode>& targets,
                                      const LabelSpace& space);

/// Indices of the 1-entries, i.e. the inverse view of to_multihot.
std::vector<int> target_indices(const std::vector<HiscoCode>& targets, const LabelSpace& space);

/// HISCAM social-status score lookup. Codes without a score are simply
/// absent; absence is a value, not an error.
class HiscamTable {
public:
    /// CSV with header `hisco,hiscam`.
    static HiscamTable from_file(const std::filesystem::path& path);
    static HiscamTable from_entries(std::map<std::string, double> entries);

    std::optional<double> lookup(const HiscoCode& code) const;
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::map<std::string, double> entries_;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string to_hex(std::uint64_t value);

}  // namespace occ
