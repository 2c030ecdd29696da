#include "occ/hisco.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "occ/csv.hpp"
#include "occ/errors.hpp"

namespace occ {

HiscoCode HiscoCode::parse(std::string_view text) {
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    const std::string_view trimmed = text.substr(begin, end - begin);

    if (trimmed.size() != 5) {
        throw_data("MalformedCode",
                   "HISCO code must have exactly 5 digits, got '" + std::string(trimmed) + "'");
    }
    for (char c : trimmed) {
        if (c < '0' || c > '9') {
            throw_data("MalformedCode",
                       "HISCO code must be numeric, got '" + std::string(trimmed) + "'");
        }
    }
    return HiscoCode(std::string(trimmed));
}

LabelSpace LabelSpace::from_file(const std::filesystem::path& path) {
    const std::string content = read_text_file(path);
    std::vector<HiscoCode> codes;
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        codes.push_back(HiscoCode::parse(line));
    }
    if (codes.empty()) throw_data("EmptyFile", "label-space file has no codes: " + path.string());
    return from_codes(std::move(codes));
}

LabelSpace LabelSpace::from_codes(std::vector<HiscoCode> codes) {
    if (codes.empty()) throw_data("EmptyFile", "label space must contain at least one code");
    LabelSpace space;
    space.codes_ = std::move(codes);
    std::string joined;
    for (std::size_t i = 0; i < space.codes_.size(); ++i) {
        const auto& code = space.codes_[i];
        auto [it, inserted] = space.index_.emplace(code.digits(), i);
        if (!inserted) {
            throw_data("DuplicateCode", "code '" + code.digits() + "' appears more than once");
        }
        if (i) joined.push_back('\n');
        joined += code.digits();
    }
    space.digest_ = to_hex(fnv1a64(joined));
    return space;
}

std::optional<std::size_t> LabelSpace::find(const HiscoCode& code) const {
    auto it = index_.find(code.digits());
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t LabelSpace::index_of(const HiscoCode& code) const {
    auto idx = find(code);
    if (!idx) throw_data("UnknownCode", "code '" + code.digits() + "' is not in the label space");
    return *idx;
}

std::vector<std::uint8_t> to_multihot(const std::vector<HiscoCode>& targets,
                                      const LabelSpace& space) {
    if (targets.empty()) throw_data("InvalidTargets", "target set must be non-empty");
    std::vector<std::uint8_t> hot(space.size(), 0);
    for (const auto& code : targets) hot[space.index_of(code)] = 1;
    return hot;
}

std::vector<int> target_indices(const std::vector<HiscoCode>& targets, const LabelSpace& space) {
    std::vector<int> out;
    out.reserve(targets.size());
    for (const auto& code : targets) out.push_back(static_cast<int>(space.index_of(code)));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

HiscamTable HiscamTable::from_file(const std::filesystem::path& path) {
    const CsvTable csv = read_csv(path);
    const std::size_t code_col = csv.column("hisco");
    const std::size_t score_col = csv.column("hiscam");
    std::map<std::string, double> entries;
    for (const auto& row : csv.rows) {
        const HiscoCode code = HiscoCode::parse(row[code_col]);
        double score = 0.0;
        try {
            score = std::stod(row[score_col]);
        } catch (const std::exception&) {
            throw_data("MalformedScore", "bad HISCAM value '" + row[score_col] + "'");
        }
        if (!std::isfinite(score)) {
            throw_data("MalformedScore", "HISCAM score must be finite for " + code.digits());
        }
        entries[code.digits()] = score;
    }
    return from_entries(std::move(entries));
}

HiscamTable HiscamTable::from_entries(std::map<std::string, double> entries) {
    HiscamTable table;
    table.entries_ = std::move(entries);
    return table;
}

std::optional<double> HiscamTable::lookup(const HiscoCode& code) const {
    auto it = entries_.find(code.digits());
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string to_hex(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

}  // namespace occ
