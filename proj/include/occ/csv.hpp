#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace occ {

/// Minimal RFC-4180 CSV: comma delimiter, double-quote escaping, quoted
/// fields may contain commas, quotes and newlines. CRLF input is accepted;
/// output always uses LF.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column, or throws Error("MissingColumn").
    std::size_t column(std::string_view name) const;
    bool has_column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view content);
CsvTable read_csv(const std::filesystem::path& path);

std::string csv_field(std::string_view value);
std::string format_csv(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace occ
