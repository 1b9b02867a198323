#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "ebm/crbm.hpp"
#include "ebm/model.hpp"

namespace ebm {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(trim(current));
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    fields.push_back(trim(current));
    return fields;
}

inline bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    const auto result = std::from_chars(begin, end, out);
    return result.ec == std::errc() && result.ptr == end && !s.empty();
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, result.ptr);
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open CSV file '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) lines.push_back(line);
    }
    return lines;
}

} // namespace detail

// Comma-separated values with an optional header line; the header is detected
// by the first line failing to parse as numbers.
inline Dataset read_csv(const std::string& path, UnitFamily family) {
    const std::vector<std::string> lines = detail::read_lines(path);
    if (lines.empty()) throw ValidationError("CSV file '" + path + "' is empty");

    Dataset data;
    data.family = family;
    std::size_t start = 0;
    {
        const auto fields = detail::split_csv_line(lines[0]);
        double probe;
        bool numeric = true;
        for (const auto& f : fields)
            if (!detail::parse_double(f, probe)) numeric = false;
        if (!numeric) {
            start = 1;
            // A header alone is a valid empty dataset; the header fixes the
            // dimension.
            data.dim = fields.size();
        }
    }

    for (std::size_t r = start; r < lines.size(); ++r) {
        const auto fields = detail::split_csv_line(lines[r]);
        Vector row(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (!detail::parse_double(fields[c], row[c]))
                throw ValidationError("CSV row " + std::to_string(r + 1) + ", column " +
                                      std::to_string(c + 1) + ": cannot parse '" + fields[c] +
                                      "' as a number");
        }
        if (data.dim == 0) {
            data.dim = row.size();
        } else if (row.size() != data.dim) {
            throw ValidationError("CSV row " + std::to_string(r + 1) + " has " +
                                  std::to_string(row.size()) + " columns, expected " +
                                  std::to_string(data.dim));
        }
        data.rows.push_back(std::move(row));
    }
    validate(data);
    return data;
}

// Sequence CSV: leading seq_id column, remaining columns are the frame.
// Sequences keep first-appearance order; frames keep file order.
inline SequenceDataset read_sequence_csv(const std::string& path, UnitFamily family) {
    const std::vector<std::string> lines = detail::read_lines(path);
    if (lines.empty()) throw ValidationError("CSV file '" + path + "' is empty");

    std::size_t start = 0;
    {
        const auto fields = detail::split_csv_line(lines[0]);
        double probe;
        bool numeric = fields.size() >= 2;
        for (std::size_t c = 1; c < fields.size() && numeric; ++c)
            if (!detail::parse_double(fields[c], probe)) numeric = false;
        if (!numeric) start = 1;
    }

    SequenceDataset data;
    data.family = family;
    std::vector<std::string> order;
    std::map<std::string, std::size_t> index;
    for (std::size_t r = start; r < lines.size(); ++r) {
        const auto fields = detail::split_csv_line(lines[r]);
        if (fields.size() < 2)
            throw ValidationError("CSV row " + std::to_string(r + 1) +
                                  ": sequence rows need a seq_id plus at least one value");
        const std::string& id = fields[0];
        Vector frame(fields.size() - 1);
        for (std::size_t c = 1; c < fields.size(); ++c) {
            if (!detail::parse_double(fields[c], frame[c - 1]))
                throw ValidationError("CSV row " + std::to_string(r + 1) + ", column " +
                                      std::to_string(c + 1) + ": cannot parse '" + fields[c] +
                                      "' as a number");
        }
        if (data.dim == 0) {
            data.dim = frame.size();
        } else if (frame.size() != data.dim) {
            throw ValidationError("CSV row " + std::to_string(r + 1) + " has " +
                                  std::to_string(frame.size()) + " values, expected " +
                                  std::to_string(data.dim));
        }
        auto it = index.find(id);
        if (it == index.end()) {
            index.emplace(id, data.sequences.size());
            data.sequences.emplace_back();
            it = index.find(id);
        }
        data.sequences[it->second].push_back(std::move(frame));
    }
    if (data.sequences.empty())
        throw ValidationError("CSV file '" + path + "' contains no sequence rows");
    validate(data);
    return data;
}

inline void write_csv(const std::vector<Vector>& rows, std::size_t dim, const std::string& path,
                      const std::string& column_prefix) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    for (std::size_t c = 0; c < dim; ++c) {
        if (c) out << ',';
        out << column_prefix << c;
    }
    out << '\n';
    for (const Vector& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << ',';
            out << detail::format_double(row[c]);
        }
        out << '\n';
    }
    if (!out) throw Error("failed writing '" + path + "'");
}

inline void write_csv(const Dataset& data, const std::string& path,
                      const std::string& column_prefix = "v") {
    write_csv(data.rows, data.dim, path, column_prefix);
}

} // namespace ebm
