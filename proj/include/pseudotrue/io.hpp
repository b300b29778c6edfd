/*
 * Copyright 2026 The pseudotrue Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// File formats
//
//   markers   CSV, header `id,<marker_id>,...`, one row per sample, decimal
//             dosages, `NA` for a missing call.
//   kernel    TSV, first row `id` then sample ids, each following row a
//             sample id then its entries. Also used for any dense
//             covariance. Values are written with 12 significant digits.
//   phenotype TSV, header of observation ids `<genotype_id>_<replicate>`,
//             one row per simulated trait.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pseudotrue/error.hpp"
#include "pseudotrue/kernel.hpp"

namespace pseudotrue::io
{

/// %.12g, with non-finite values as `NA`.
inline std::string format_number(double v)
{
    if (!std::isfinite(v))
    {
        return "NA";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// Rounds to 12 significant digits (for JSON output).
inline double round12(double v)
{
    if (!std::isfinite(v))
    {
        return v;
    }
    return std::stod(format_number(v));
}

namespace detail
{

inline std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true)
    {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos)
        {
            break;
        }
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    {
        s.remove_suffix(1);
    }
    return s;
}

inline double parse_double(std::string_view token, const std::string& where)
{
    token = trim(token);
    if (!token.empty() && token.front() == '+')
    {
        token.remove_prefix(1);
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size())
    {
        throw Error("cannot parse number '" + std::string(token) + "' in " + where);
    }
    return v;
}

inline std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw Error("cannot open '" + path + "' for reading");
    }
    return in;
}

inline std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path);
    if (!out)
    {
        throw Error("cannot open '" + path + "' for writing");
    }
    return out;
}

// Next non-empty line; false at EOF.
inline bool next_line(std::istream& in, std::string& line)
{
    while (std::getline(in, line))
    {
        if (!trim(line).empty())
        {
            return true;
        }
    }
    return false;
}

}  // namespace detail

inline MarkerMatrix read_markers(std::istream& in, const std::string& name = "marker file")
{
    std::string line;
    if (!detail::next_line(in, line))
    {
        throw Error(name + " is empty");
    }
    const auto header = detail::split(line, ',');
    if (header.size() < 2 || detail::trim(header[0]) != "id")
    {
        throw Error(name + ": header must start with `id` followed by marker ids");
    }
    MarkerMatrix m;
    for (std::size_t j = 1; j < header.size(); ++j)
    {
        m.marker_ids.emplace_back(detail::trim(header[j]));
    }
    const auto n_markers = static_cast<Index>(m.marker_ids.size());

    std::vector<double> values;
    std::vector<bool> missing;
    bool any_missing = false;
    std::size_t row = 1;
    while (detail::next_line(in, line))
    {
        ++row;
        const auto fields = detail::split(line, ',');
        if (static_cast<Index>(fields.size()) != n_markers + 1)
        {
            throw Error(name + ": row " + std::to_string(row) + " has the wrong number of fields");
        }
        m.sample_ids.emplace_back(detail::trim(fields[0]));
        for (std::size_t j = 1; j < fields.size(); ++j)
        {
            const auto token = detail::trim(fields[j]);
            if (token == "NA")
            {
                values.push_back(0.0);
                missing.push_back(true);
                any_missing = true;
            }
            else
            {
                const double v = detail::parse_double(token, name + " row " + std::to_string(row));
                if (!std::isfinite(v))
                {
                    throw Error(name + ": non-finite value in row " + std::to_string(row));
                }
                values.push_back(v);
                missing.push_back(false);
            }
        }
    }
    const auto n = static_cast<Index>(m.sample_ids.size());
    m.values.resize(n, n_markers);
    if (any_missing)
    {
        m.missing.resize(n, n_markers);
    }
    for (Index i = 0; i < n; ++i)
    {
        for (Index j = 0; j < n_markers; ++j)
        {
            const auto idx = static_cast<std::size_t>(i * n_markers + j);
            m.values(i, j) = values[idx];
            if (any_missing)
            {
                m.missing(i, j) = missing[idx];
            }
        }
    }
    m.validate();
    return m;
}

inline MarkerMatrix read_markers(const std::string& path)
{
    auto in = detail::open_in(path);
    return read_markers(in, path);
}

inline void write_markers(std::ostream& out, const MarkerMatrix& m)
{
    out << "id";
    for (const auto& id : m.marker_ids)
    {
        out << ',' << id;
    }
    out << '\n';
    for (Index i = 0; i < m.n_samples(); ++i)
    {
        out << m.sample_ids[static_cast<std::size_t>(i)];
        for (Index j = 0; j < m.n_markers(); ++j)
        {
            out << ',' << (m.is_missing(i, j) ? std::string("NA") : format_number(m.values(i, j)));
        }
        out << '\n';
    }
}

inline void write_markers(const std::string& path, const MarkerMatrix& m)
{
    auto out = detail::open_out(path);
    write_markers(out, m);
}

inline void write_matrix_tsv(
    std::ostream& out,
    const Eigen::MatrixXd& matrix,
    const std::vector<std::string>& ids)
{
    if (static_cast<Index>(ids.size()) != matrix.rows() || matrix.rows() != matrix.cols())
    {
        throw Error("matrix TSV needs a square matrix with one id per row");
    }
    out << "id";
    for (const auto& id : ids)
    {
        out << '\t' << id;
    }
    out << '\n';
    for (Index i = 0; i < matrix.rows(); ++i)
    {
        out << ids[static_cast<std::size_t>(i)];
        for (Index j = 0; j < matrix.cols(); ++j)
        {
            out << '\t' << format_number(matrix(i, j));
        }
        out << '\n';
    }
}

inline void write_kernel(std::ostream& out, const Kernel& k)
{
    write_matrix_tsv(out, k.matrix, k.sample_ids);
}

inline void write_kernel(const std::string& path, const Kernel& k)
{
    auto out = detail::open_out(path);
    write_kernel(out, k);
}

/// Reads a square labeled matrix; row labels must repeat the header order.
inline Kernel read_kernel(std::istream& in, const std::string& name = "kernel file")
{
    std::string line;
    if (!detail::next_line(in, line))
    {
        throw Error(name + " is empty");
    }
    const auto header = detail::split(line, '\t');
    Kernel k;
    for (std::size_t j = 1; j < header.size(); ++j)
    {
        k.sample_ids.emplace_back(detail::trim(header[j]));
    }
    const auto n = static_cast<Index>(k.sample_ids.size());
    if (n == 0)
    {
        throw Error(name + ": header has no sample ids");
    }
    k.matrix.resize(n, n);
    Index row = 0;
    while (detail::next_line(in, line))
    {
        const auto fields = detail::split(line, '\t');
        if (row >= n || static_cast<Index>(fields.size()) != n + 1)
        {
            throw Error(name + ": row " + std::to_string(row + 2) + " has the wrong shape");
        }
        if (detail::trim(fields[0]) != k.sample_ids[static_cast<std::size_t>(row)])
        {
            throw Error(name + ": row ids must follow the header order");
        }
        for (Index j = 0; j < n; ++j)
        {
            k.matrix(row, j) = detail::parse_double(
                fields[static_cast<std::size_t>(j + 1)], name + " row " + std::to_string(row + 2));
        }
        ++row;
    }
    if (row != n)
    {
        throw Error(name + ": expected " + std::to_string(n) + " rows");
    }
    ::pseudotrue::detail::require_unique(k.sample_ids, "sample");
    k.kind = KernelKind::custom;
    return k;
}

inline Kernel read_kernel(const std::string& path)
{
    auto in = detail::open_in(path);
    return read_kernel(in, path);
}

struct PhenotypeTable
{
    std::vector<std::string> observation_ids;
    Eigen::MatrixXd values;  // traits x observations
};

inline void write_phenotypes(std::ostream& out, const PhenotypeTable& table)
{
    if (static_cast<Index>(table.observation_ids.size()) != table.values.cols())
    {
        throw Error("phenotype ids do not match the number of columns");
    }
    for (std::size_t j = 0; j < table.observation_ids.size(); ++j)
    {
        out << (j == 0 ? "" : "\t") << table.observation_ids[j];
    }
    out << '\n';
    for (Index i = 0; i < table.values.rows(); ++i)
    {
        for (Index j = 0; j < table.values.cols(); ++j)
        {
            out << (j == 0 ? "" : "\t") << format_number(table.values(i, j));
        }
        out << '\n';
    }
}

inline void write_phenotypes(const std::string& path, const PhenotypeTable& table)
{
    auto out = detail::open_out(path);
    write_phenotypes(out, table);
}

inline PhenotypeTable read_phenotypes(std::istream& in, const std::string& name = "phenotype file")
{
    std::string line;
    if (!detail::next_line(in, line))
    {
        throw Error(name + " is empty");
    }
    PhenotypeTable t;
    for (auto id : detail::split(line, '\t'))
    {
        t.observation_ids.emplace_back(detail::trim(id));
    }
    const auto d = static_cast<Index>(t.observation_ids.size());
    std::vector<double> values;
    Index rows = 0;
    while (detail::next_line(in, line))
    {
        const auto fields = detail::split(line, '\t');
        if (static_cast<Index>(fields.size()) != d)
        {
            throw Error(name + ": row " + std::to_string(rows + 2) + " has the wrong number of fields");
        }
        for (auto f : fields)
        {
            const auto token = detail::trim(f);
            values.push_back(
                token == "NA" ? std::numeric_limits<double>::quiet_NaN()
                              : detail::parse_double(token, name));
        }
        ++rows;
    }
    t.values.resize(rows, d);
    for (Index i = 0; i < rows; ++i)
    {
        for (Index j = 0; j < d; ++j)
        {
            t.values(i, j) = values[static_cast<std::size_t>(i * d + j)];
        }
    }
    return t;
}

inline PhenotypeTable read_phenotypes(const std::string& path)
{
    auto in = detail::open_in(path);
    return read_phenotypes(in, path);
}

}  // namespace pseudotrue::io
