#pragma once

// Matrix serialization: row-major CSV and JSON {dim, entries}.

#include <winfree/core.hpp>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace winfree {

using Json = nlohmann::json;

/// Shortest round-trippable decimal form of a double.
inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string matrix_to_csv(const Matrix& m)
{
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
    {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
        {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

namespace detail {

inline std::vector<double> parse_number_list(const std::string& text, char sep)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, sep))
    {
        const auto first = cell.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = cell.find_last_not_of(" \t\r");
        cell = cell.substr(first, last - first + 1);
        try
        {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        }
        catch (const std::exception&)
        {
            throw DomainError("not a number: '" + cell + "'");
        }
    }
    return out;
}

}  // namespace detail

inline Matrix matrix_from_csv(const std::string& text)
{
    std::vector<std::vector<double>> rows;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line))
    {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        rows.push_back(detail::parse_number_list(line, ','));
    }
    if (rows.empty()) throw DomainError("matrix CSV: no rows");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        if (rows[i].size() != rows.front().size()) throw DomainError("matrix CSV: ragged rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

inline Json matrix_to_json(const Matrix& m)
{
    if (m.rows() != m.cols()) throw DomainError("matrix_to_json: matrix is not square");
    std::vector<double> entries;
    entries.reserve(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) entries.push_back(m(i, j));
    return Json{{"dim", m.rows()}, {"entries", entries}};
}

inline Matrix matrix_from_json(const Json& j)
{
    const int n = j.at("dim").get<int>();
    const auto entries = j.at("entries").get<std::vector<double>>();
    if (n < 1 || entries.size() != static_cast<std::size_t>(n) * n)
    {
        throw DomainError("matrix JSON: entries do not match dim");
    }
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) m(i, k) = entries[static_cast<std::size_t>(i) * n + k];
    return m;
}

/// Row-major flat list -> square matrix.
inline Matrix matrix_from_flat(const std::vector<double>& v)
{
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
    if (n < 1 || static_cast<std::size_t>(n * n) != v.size())
    {
        throw DomainError("flat matrix: " + std::to_string(v.size()) + " entries is not a square count");
    }
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < n; ++k) m(i, k) = v[static_cast<std::size_t>(i * n + k)];
    return m;
}

inline std::string read_text_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("cannot write '" + path + "'");
    out << text;
}

}  // namespace winfree
