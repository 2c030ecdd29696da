#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "occ/hisco.hpp"
#include "occ/language.hpp"

namespace occ {

/// One row of the raw input CSV
/// (`occ_text,hisco_1,...,hisco_5,lang,source`, empty string = absent code).
struct RawRow {
    std::string occ_text;
    std::array<std::string, 5> hisco;
    std::string lang;
    std::string source;
    bool synthetic = false;
};

struct DropCounts {
    std::map<std::string, std::size_t> by_reason;

    void bump(const std::string& reason) { ++by_reason[reason]; }
    std::size_t total() const;
};

struct CleanDataset {
    std::vector<OccupationRecord> records;
    DropCounts dropped;
};

/// Codepoint -> ASCII replacement sequence, applied after lowercasing.
using TranslitTable = std::map<char32_t, std::string>;

/// Transliterations for the characters that occur across the supported
/// languages (aa/ae/oe/ue/ss and accent stripping).
TranslitTable default_translit_table();

/// CSV with header `from,to`; `from` must be a single codepoint.
TranslitTable translit_table_from_file(const std::filesystem::path& path);

/// Lowercase, transliterate, collapse whitespace runs, strip ends.
std::string normalize_text(std::string_view text, const TranslitTable& table);

std::vector<RawRow> raw_rows_from_csv(const std::filesystem::path& path);

/// The cleaning step: normalizes text, validates codes against the label
/// space and drops anything that fails, counting drops per reason.
CleanDataset clean_dataset(const std::vector<RawRow>& rows, const LabelSpace& space,
                           const TranslitTable& table);

/// Combined-occupation synthesis: for each unique description, draw partner
/// descriptions from the same (source, language) group and join them with
/// the language's word for "and".
struct CombinationPolicy {
    std::map<Lang, std::string> and_word;
    int draws_per_description = 10;
    std::uint64_t rng_seed = 0;
};

CleanDataset synthesize_combinations(const CleanDataset& ds, const CombinationPolicy& policy);

struct SplitSpec {
    double train_frac = 0.85;
    double val_frac = 0.10;
    double test_frac = 0.05;
    std::uint64_t rng_seed = 0;

    /// Fractions must be positive and sum to 1 within 1e-9.
    void validate() const;
};

struct SplitResult {
    CleanDataset train;
    CleanDataset val;
    CleanDataset test;
};

/// Deterministic partition via one seeded uniform draw per record, in input
/// order. Same (seed, input order) -> identical split.
SplitResult split_dataset(const CleanDataset& ds, const SplitSpec& spec);

/// Serializes records in the input schema plus a `synthetic` column.
void write_dataset_csv(const std::filesystem::path& path, const CleanDataset& ds);

std::map<std::string, std::size_t> target_code_counts(const CleanDataset& ds);

}  // namespace occ
