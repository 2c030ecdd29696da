#include "occ/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "occ/csv.hpp"
#include "occ/errors.hpp"
#include "occ/rng.hpp"
#include "occ/unicode.hpp"

namespace occ {

namespace {

constexpr int kMaxTargets = 5;
constexpr int kCombineRetries = 10;

std::vector<HiscoCode> sorted_unique(std::vector<HiscoCode> codes) {
    std::sort(codes.begin(), codes.end());
    codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
    return codes;
}

}  // namespace

std::size_t DropCounts::total() const {
    std::size_t sum = 0;
    for (const auto& [reason, count] : by_reason) sum += count;
    return sum;
}

TranslitTable default_translit_table() {
    return {
        {U'å', "aa"}, {U'æ', "ae"}, {U'ø', "oe"}, {U'ä', "ae"}, {U'ö', "oe"},
        {U'ü', "ue"}, {U'ß', "ss"}, {U'é', "e"},  {U'è', "e"},  {U'ê', "e"},
        {U'à', "a"},  {U'â', "a"},  {U'ç', "c"},  {U'ñ', "n"},  {U'í', "i"},
        {U'ì', "i"},  {U'ó', "o"},  {U'ò', "o"},  {U'ú', "u"},  {U'ù', "u"},
    };
}

TranslitTable translit_table_from_file(const std::filesystem::path& path) {
    const CsvTable csv = read_csv(path);
    const std::size_t from_col = csv.column("from");
    const std::size_t to_col = csv.column("to");
    TranslitTable table;
    for (const auto& row : csv.rows) {
        const auto codepoints = decode_utf8(row[from_col]);
        if (codepoints.size() != 1) {
            throw_data("MalformedTranslit",
                       "'from' must be a single character, got '" + row[from_col] + "'");
        }
        table[codepoints[0]] = row[to_col];
    }
    return table;
}

std::string normalize_text(std::string_view text, const TranslitTable& table) {
    const auto codepoints = decode_utf8(text);
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    bool any_content = false;
    for (char32_t raw : codepoints) {
        const char32_t cp = simple_lower(raw);
        if (is_space(cp)) {
            pending_space = any_content;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        auto it = table.find(cp);
        if (it != table.end()) {
            out += it->second;
        } else {
            append_utf8(out, cp);
        }
        any_content = true;
    }
    return out;
}

std::vector<RawRow> raw_rows_from_csv(const std::filesystem::path& path) {
    const CsvTable csv = read_csv(path);
    const std::size_t text_col = csv.column("occ_text");
    std::array<std::size_t, 5> code_cols{};
    for (int k = 0; k < 5; ++k) {
        code_cols[static_cast<std::size_t>(k)] = csv.column("hisco_" + std::to_string(k + 1));
    }
    const std::size_t lang_col = csv.column("lang");
    const std::size_t source_col = csv.column("source");
    const bool has_synth = csv.has_column("synthetic");
    const std::size_t synth_col = has_synth ? csv.column("synthetic") : 0;

    std::vector<RawRow> rows;
    rows.reserve(csv.rows.size());
    for (const auto& fields : csv.rows) {
        RawRow row;
        row.occ_text = fields[text_col];
        for (std::size_t k = 0; k < 5; ++k) row.hisco[k] = fields[code_cols[k]];
        row.lang = fields[lang_col];
        row.source = fields[source_col];
        if (has_synth) row.synthetic = fields[synth_col] == "true" || fields[synth_col] == "1";
        rows.push_back(std::move(row));
    }
    return rows;
}

CleanDataset clean_dataset(const std::vector<RawRow>& rows, const LabelSpace& space,
                           const TranslitTable& table) {
    CleanDataset out;
    out.records.reserve(rows.size());
    for (const auto& row : rows) {
        const std::string text = normalize_text(row.occ_text, table);
        if (text.empty()) {
            out.dropped.bump("empty_text");
            continue;
        }
        const auto lang = try_parse_lang(row.lang);
        if (!lang) {
            out.dropped.bump("bad_language");
            continue;
        }

        std::vector<HiscoCode> targets;
        bool malformed = false;
        bool unknown = false;
        for (const auto& cell : row.hisco) {
            if (cell.empty()) continue;
            try {
                HiscoCode code = HiscoCode::parse(cell);
                if (!space.contains(code)) {
                    unknown = true;
                    break;
                }
                targets.push_back(std::move(code));
            } catch (const Error&) {
                malformed = true;
                break;
            }
        }
        if (malformed) {
            out.dropped.bump("malformed_code");
            continue;
        }
        if (unknown) {
            out.dropped.bump("unknown_code");
            continue;
        }
        if (targets.empty()) {
            out.dropped.bump("no_codes");
            continue;
        }

        OccupationRecord record;
        record.text = text;
        record.lang = *lang;
        record.targets = sorted_unique(std::move(targets));
        record.source = row.source;
        record.synthetic = row.synthetic;
        out.records.push_back(std::move(record));
    }
    return out;
}

CleanDataset synthesize_combinations(const CleanDataset& ds, const CombinationPolicy& policy) {
    if (policy.draws_per_description < 0) {
        throw_config("InvalidPolicy", "draws_per_description must be >= 0");
    }
    CleanDataset out;
    out.records = ds.records;
    out.dropped = ds.dropped;
    if (policy.draws_per_description == 0 || ds.records.empty()) return out;

    // Group unique descriptions by (source, language), first occurrence wins.
    struct Group {
        std::vector<std::size_t> unique_record_idx;
        std::set<std::string> seen_texts;
    };
    std::vector<std::pair<std::pair<std::string, Lang>, Group>> groups;
    auto group_of = [&groups](const OccupationRecord& rec) -> Group& {
        const std::pair<std::string, Lang> key{rec.source, rec.lang};
        for (auto& [k, g] : groups) {
            if (k == key) return g;
        }
        groups.emplace_back(key, Group{});
        return groups.back().second;
    };
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        Group& g = group_of(ds.records[i]);
        if (g.seen_texts.insert(ds.records[i].text).second) g.unique_record_idx.push_back(i);
    }

    std::mt19937_64 rng(policy.rng_seed);
    for (const auto& [key, group] : groups) {
        const Lang lang = key.second;
        auto word_it = policy.and_word.find(lang);
        if (word_it == policy.and_word.end()) {
            throw_data("MissingAndWord",
                       "no 'and' word configured for language '" + std::string(lang_name(lang)) + "'");
        }
        const std::string& and_word = word_it->second;
        if (group.unique_record_idx.size() < 2) continue;

        for (std::size_t pos = 0; pos < group.unique_record_idx.size(); ++pos) {
            const std::size_t a = group.unique_record_idx[pos];
            const OccupationRecord& first = ds.records[a];
            for (int draw = 0; draw < policy.draws_per_description; ++draw) {
                for (int attempt = 0; attempt < kCombineRetries; ++attempt) {
                    // Uniform over the other unique descriptions in the group.
                    std::size_t pick = uniform_index(rng, group.unique_record_idx.size() - 1);
                    if (pick >= pos) ++pick;
                    const std::size_t b = group.unique_record_idx[pick];
                    const OccupationRecord& second = ds.records[b];

                    std::vector<HiscoCode> combined = first.targets;
                    combined.insert(combined.end(), second.targets.begin(),
                                    second.targets.end());
                    combined = sorted_unique(std::move(combined));
                    if (combined.size() > kMaxTargets) continue;

                    OccupationRecord rec;
                    rec.text = first.text + " " + and_word + " " + second.text;
                    rec.lang = lang;
                    rec.targets = std::move(combined);
                    rec.source = first.source;
                    rec.synthetic = true;
                    out.records.push_back(std::move(rec));
                    break;
                }
            }
        }
    }
    return out;
}

void SplitSpec::validate() const {
    if (!(train_frac > 0.0) || !(val_frac > 0.0) || !(test_frac > 0.0)) {
        throw_config("InvalidSplit", "split fractions must all be positive");
    }
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
        throw_config("InvalidSplit", "split fractions must sum to 1");
    }
}

SplitResult split_dataset(const CleanDataset& ds, const SplitSpec& spec) {
    spec.validate();
    SplitResult out;
    std::mt19937_64 rng(spec.rng_seed);
    for (const auto& record : ds.records) {
        const double u = uniform01(rng);
        if (u < spec.train_frac) {
            out.train.records.push_back(record);
        } else if (u < spec.train_frac + spec.val_frac) {
            out.val.records.push_back(record);
        } else {
            out.test.records.push_back(record);
        }
    }
    return out;
}

void write_dataset_csv(const std::filesystem::path& path, const CleanDataset& ds) {
    std::vector<std::string> header = {"occ_text", "hisco_1", "hisco_2", "hisco_3",
                                       "hisco_4", "hisco_5", "lang",    "source",
                                       "synthetic"};
    std::vector<std::vector<std::string>> rows;
    rows.reserve(ds.records.size());
    for (const auto& rec : ds.records) {
        std::vector<std::string> row(9);
        row[0] = rec.text;
        for (std::size_t k = 0; k < rec.targets.size() && k < 5; ++k) {
            row[1 + k] = rec.targets[k].digits();
        }
        row[6] = std::string(lang_name(rec.lang));
        row[7] = rec.source;
        row[8] = rec.synthetic ? "true" : "false";
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

std::map<std::string, std::size_t> target_code_counts(const CleanDataset& ds) {
    std::map<std::string, std::size_t> counts;
    for (const auto& rec : ds.records) {
        for (const auto& code : rec.targets) ++counts[code.digits()];
    }
    return counts;
}

}  // namespace occ
