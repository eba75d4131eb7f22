#pragma once
#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>
#include <Eigen/Dense>
#include <dpam/error.hpp>

namespace dpam {

/// Numeric table with a header row: comma separated, '.' decimal point.
struct Table
{
    std::vector<std::string> header;
    Eigen::MatrixXd values;

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }

    std::size_t column(const std::string& name) const
    {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (header[j] == name) return j;
        }
        throw ValidationError("missing column '" + name + "'");
    }
};

namespace detail {

// Splits one record; double quotes may wrap a field ("" is a literal quote).
inline std::vector<std::string> split_csv_line(std::string_view line, std::size_t lineno)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false, was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty() && !was_quoted) {
            quoted = was_quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
            was_quoted = false;
        } else {
            cur += c;
        }
    }
    if (quoted) throw ValidationError("line " + std::to_string(lineno) + ": unterminated quote");
    out.push_back(std::move(cur));
    return out;
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

inline double parse_number(std::string_view field, std::size_t lineno, std::size_t col)
{
    const std::string_view t = trim(field);
    double v = 0.0;
    const char* first = t.data();
    if (!t.empty() && t.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
        throw ValidationError("line " + std::to_string(lineno) + ", column " + std::to_string(col + 1) +
                              ": '" + std::string(field) + "' is not a number");
    }
    return v;
}

} // namespace detail

inline Table read_csv(std::istream& in)
{
    Table t;
    std::string line;
    std::size_t lineno = 0;
    std::vector<double> data;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line, lineno);
        if (!have_header) {
            for (auto& f : fields) {
                const std::string name(detail::trim(f));
                if (name.empty()) throw ValidationError("header has an empty column name");
                for (const auto& h : t.header) {
                    if (h == name) throw ValidationError("duplicate column '" + name + "'");
                }
                t.header.push_back(name);
            }
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw ValidationError("line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                                  " fields, found " + std::to_string(fields.size()));
        }
        for (std::size_t j = 0; j < fields.size(); ++j) data.push_back(detail::parse_number(fields[j], lineno, j));
    }
    if (!have_header) throw ValidationError("input has no header row");
    const auto cols = static_cast<Eigen::Index>(t.header.size());
    const auto rows = static_cast<Eigen::Index>(data.size() / t.header.size());
    t.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(data.data(), rows, cols);
    return t;
}

inline Table read_csv_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    try {
        return read_csv(in);
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v)
{
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

} // namespace dpam
