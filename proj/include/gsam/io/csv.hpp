#pragma once
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>
#include <gsam/core.hpp>
#include <gsam/error.hpp>

namespace gsam::io {

/// Malformed CSV input; the message carries the line number.
class CsvError : public ArgumentError
{
public:
    CsvError(std::size_t line, const std::string& what)
        : ArgumentError("line " + std::to_string(line) + ": " + what), line_(line)
    {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct CsvTable
{
    std::vector<std::string> header;
    Matrix values;

    Index column(const std::string& name) const
    {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (header[j] == name) return static_cast<Index>(j);
        }
        throw ArgumentError("no column named '" + name + "'");
    }
};

namespace detail {

/// Splits one record. Quoted fields may contain commas and doubled quotes; embedded newlines are not supported.
inline std::vector<std::string> split_record(std::string_view line, std::size_t lineno)
{
    std::vector<std::string> out;
    std::string cur;
    std::size_t i = 0;
    for (;;) {
        cur.clear();
        if (i < line.size() && line[i] == '"') {
            ++i;
            for (;;) {
                if (i >= line.size()) throw CsvError(lineno, "unterminated quoted field");
                if (line[i] == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        cur += '"';
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                cur += line[i++];
            }
            if (i < line.size() && line[i] != ',') throw CsvError(lineno, "unexpected character after closing quote");
        } else {
            while (i < line.size() && line[i] != ',') {
                if (line[i] == '"') throw CsvError(lineno, "quote inside an unquoted field");
                cur += line[i++];
            }
        }
        out.push_back(cur);
        if (i >= line.size()) break;
        ++i;  // comma
    }
    return out;
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

inline double parse_number(std::string_view field, std::size_t lineno, const std::string& column)
{
    std::string_view s = trim(field);
    if (s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null") {
        throw CsvError(lineno, "missing value in column '" + column + "'");
    }
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw CsvError(lineno, "column '" + column + "': '" + std::string(field) + "' is not a number");
    }
    if (!std::isfinite(v)) throw CsvError(lineno, "column '" + column + "': non-finite value");
    return v;
}

} // namespace detail

/// Reads a header row followed by numeric rows. Blank lines are skipped; a UTF-8 BOM is ignored.
inline CsvTable read_csv(std::istream& in)
{
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::vector<double>> rows;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_record(line, lineno);
        if (!have_header) {
            for (auto& f : fields) {
                std::string name(detail::trim(f));
                if (name.empty()) throw CsvError(lineno, "empty column name");
                for (const auto& h : t.header) {
                    if (h == name) throw CsvError(lineno, "duplicate column name '" + name + "'");
                }
                t.header.push_back(std::move(name));
            }
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw CsvError(lineno, "expected " + std::to_string(t.header.size()) + " fields, found "
                                       + std::to_string(fields.size()));
        }
        std::vector<double> row(fields.size());
        for (std::size_t j = 0; j < fields.size(); ++j) row[j] = detail::parse_number(fields[j], lineno, t.header[j]);
        rows.push_back(std::move(row));
    }
    if (!have_header) throw CsvError(lineno, "input has no header row");
    t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(t.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) t.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
    return t;
}

inline CsvTable read_csv_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open '" + path + "'");
    return read_csv(in);
}

/// Response column by name; every other column becomes a feature in file order.
inline Dataset to_dataset(const CsvTable& t, const std::string& response)
{
    const Index r = t.column(response);
    std::vector<std::string> names;
    Matrix x(t.values.rows(), t.values.cols() - 1);
    Index c = 0;
    for (Index j = 0; j < t.values.cols(); ++j) {
        if (j == r) continue;
        names.push_back(t.header[j]);
        x.col(c++) = t.values.col(j);
    }
    if (names.empty()) throw ArgumentError("no feature columns besides the response");
    return Dataset::create(t.values.col(r), std::move(x), std::move(names));
}

/// Columns in the order of `names`, for scoring a model on new data.
inline Matrix select_columns(const CsvTable& t, const std::vector<std::string>& names)
{
    Matrix x(t.values.rows(), static_cast<Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) x.col(static_cast<Index>(j)) = t.values.col(t.column(names[j]));
    return x;
}

inline std::string quote_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix& values)
{
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << quote_field(header[j]);
    out << '\n';
    for (Index i = 0; i < values.rows(); ++i) {
        for (Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << format_double(values(i, j));
        out << '\n';
    }
}

} // namespace gsam::io
