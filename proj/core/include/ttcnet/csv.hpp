#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ttcnet {

// Deterministic CSV emission: every result table in the project goes through
// these helpers so that identical data always produces identical bytes.

/// Shortest decimal string that parses back to exactly the same double
/// (std::to_chars round-trip form). NaN renders as "nan", infinities as
/// "inf"/"-inf".
std::string format_double(double v);

/// Parse a full string as a double; throws InputError on leftovers/garbage.
double parse_double(const std::string& s, const std::string& what);
std::uint64_t parse_u64(const std::string& s, const std::string& what);
std::size_t parse_size(const std::string& s, const std::string& what);

/// Minimal CSV writing: fields joined by commas, rows by '\n'. Fields
/// containing commas, quotes, or newlines are double-quoted. All project
/// tables start with a header row.
std::string csv_join(const std::vector<std::string>& fields);
void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);

/// Split one CSV line written by write_csv_row (handles quoted fields).
std::vector<std::string> split_csv_line(const std::string& line);

/// Read an entire CSV file: first row is the header, the rest are data rows.
/// Throws IoError on unreadable files, InputError on ragged rows.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::string& path);

}  // namespace ttcnet
