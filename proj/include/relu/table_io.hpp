#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "relu/core.hpp"
#include "relu/matrix.hpp"
#include "relu/npy.hpp"

namespace relu {

// Loading and saving the numeric tables the CLI exchanges: CSV (optional
// header row, decimal values) or NPY v1.0. All floats are widened to 64-bit
// on load; CSV output uses 17 significant digits, which round-trips doubles.

namespace io {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

inline bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
    if (begin == end) return false;
    const auto result = std::from_chars(begin, end, out);
    return result.ec == std::errc() && result.ptr == end;
}

inline bool parse_int(const std::string& s, long long& out) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
    if (begin == end) return false;
    const auto result = std::from_chars(begin, end, out);
    return result.ec == std::errc() && result.ptr == end;
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

} // namespace detail

inline Matrix load_matrix_csv(const std::string& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) throw InputError(path + ": empty dataset");

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    for (const auto& line : lines) {
        ++line_no;
        const auto fields = detail::split_fields(line);
        std::vector<double> row(fields.size());
        bool numeric = true;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (!detail::parse_double(fields[i], row[i])) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (line_no == 1) continue; // optional header row
            throw InputError(path + ": non-numeric value at row " + std::to_string(line_no));
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw InputError(path + ": ragged row at row " + std::to_string(line_no) + " (" +
                             std::to_string(row.size()) + " fields, expected " +
                             std::to_string(rows.front().size()) + ")");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InputError(path + ": empty dataset (header only)");

    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    return m;
}

// Dispatch on the magic bytes: NPY or CSV.
inline Matrix load_matrix(const std::string& path) {
    if (npy::looks_like_npy(path)) return npy::load_matrix(path);
    return load_matrix_csv(path);
}

inline std::vector<int> load_labels(const std::string& path, int num_classes = -1) {
    std::vector<long long> raw;
    if (npy::looks_like_npy(path)) {
        raw = npy::load_int_vector(path);
    } else {
        const auto lines = detail::read_lines(path);
        if (lines.empty()) throw InputError(path + ": empty dataset");
        std::size_t line_no = 0;
        for (const auto& line : lines) {
            ++line_no;
            long long v = 0;
            if (!detail::parse_int(line, v)) {
                if (line_no == 1) continue; // optional header row
                throw InputError(path + ": non-integer label at row " + std::to_string(line_no));
            }
            raw.push_back(v);
        }
        if (raw.empty()) throw InputError(path + ": empty dataset (header only)");
    }

    std::vector<int> labels(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (num_classes >= 0 && (raw[i] < 0 || raw[i] >= num_classes))
            throw InputError(path + ": label " + std::to_string(raw[i]) + " out of range [0, " +
                             std::to_string(num_classes) + ") at row " + std::to_string(i + 1));
        labels[i] = static_cast<int>(raw[i]);
    }
    return labels;
}

inline void save_matrix_csv(const std::string& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path);
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            if (c) out << ',';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
    if (!out) throw InputError("write failed: " + path);
}

inline void save_labels_csv(const std::string& path, const std::vector<int>& labels) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path);
    for (int v : labels) out << v << '\n';
    if (!out) throw InputError("write failed: " + path);
}

inline std::vector<double> load_scores(const std::string& path) {
    const Matrix m = load_matrix(path);
    if (m.cols != 1)
        throw InputError(path + ": expected a single score column, got " + std::to_string(m.cols));
    return m.data;
}

inline void save_scores_csv(const std::string& path, const std::vector<double>& scores) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path);
    for (double s : scores) out << format_double(s) << '\n';
    if (!out) throw InputError("write failed: " + path);
}

// Assembles the in-memory dataset from a logits (or probabilities) table and
// a label vector.
inline EvalDataset dataset_from_tables(const Matrix& table, const std::vector<int>& labels,
                                       bool rows_are_probs, const std::string& tag) {
    if (table.rows != labels.size())
        throw InputError("dataset: logits rows (" + std::to_string(table.rows) +
                         ") and label count (" + std::to_string(labels.size()) + ") differ");
    if (table.cols < 2) throw InputError("dataset: need at least 2 classes");

    EvalDataset ds;
    ds.num_classes = static_cast<int>(table.cols);
    ds.logits_are_probs = rows_are_probs;
    ds.source_tag = tag;
    ds.samples.reserve(table.rows);
    for (std::size_t r = 0; r < table.rows; ++r) {
        std::vector<double> row(table.row(r), table.row(r) + table.cols);
        if (rows_are_probs) {
            // Validate and renormalize each row up front; scoring then treats
            // the stored values as probabilities.
            row = ProbVector::renormalized(std::move(row)).values();
        }
        if (labels[r] < 0 || labels[r] >= ds.num_classes)
            throw InputError("dataset: label " + std::to_string(labels[r]) + " out of range at row " +
                             std::to_string(r + 1));
        ds.samples.emplace_back(std::vector<double>{}, LogitVector(std::move(row)), labels[r]);
    }
    ds.validate();
    return ds;
}

} // namespace io

} // namespace relu
