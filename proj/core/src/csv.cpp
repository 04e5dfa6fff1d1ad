#include "ttcnet/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <system_error>

#include "ttcnet/errors.hpp"

namespace ttcnet {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::string_view trimmed(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return std::string_view(s).substr(b, e - b + 1);
}

}  // namespace

double parse_double(const std::string& s, const std::string& what) {
    std::string_view t = trimmed(s);
    if (t == "nan") return std::nan("");
    double v = 0.0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw InputError(what + ": expected a number, got '" + s + "'");
    }
    return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
    std::string_view t = trimmed(s);
    std::uint64_t v = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw InputError(what + ": expected a non-negative integer, got '" + s + "'");
    }
    return v;
}

std::size_t parse_size(const std::string& s, const std::string& what) {
    return static_cast<std::size_t>(parse_u64(s, what));
}

namespace {

bool needs_quoting(const std::string& f) {
    return f.find_first_of(",\"\n\r") != std::string::npos;
}

std::string quoted(const std::string& f) {
    std::string out = "\"";
    for (char c : f) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::string csv_join(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += needs_quoting(fields[i]) ? quoted(fields[i]) : fields[i];
    }
    return line;
}

void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
    os << csv_join(fields) << '\n';
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV file: " + path);
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            if (fields.size() != table.header.size()) {
                throw InputError("CSV row width " + std::to_string(fields.size()) +
                                 " does not match header width " +
                                 std::to_string(table.header.size()) + " in " + path);
            }
            table.rows.push_back(std::move(fields));
        }
    }
    if (first) throw InputError("CSV file has no header row: " + path);
    return table;
}

}  // namespace ttcnet
