#pragma once

// Minimal RFC-4180 style CSV reading and writing: comma separated, double
// quotes around fields that need them, "" as an escaped quote, CRLF or LF.

#include "qenc/core.hpp"

#include <charconv>
#include <fstream>
#include <iterator>

namespace qenc::csv {

using Record = std::vector<std::string>;

inline std::vector<Record> parse(std::string_view text) {
  std::vector<Record> out;
  Record rec;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  bool any = false;

  auto end_field = [&] {
    rec.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // a lone empty field is a blank line
    if (!(rec.size() == 1 && rec[0].empty()))
      out.push_back(std::move(rec));
    rec.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    any = true;
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
    case '"':
      if (!field_started && field.empty())
        quoted = true;
      else
        field.push_back(c);
      field_started = true;
      break;
    case ',': end_field(); break;
    case '\r':
      if (i + 1 < text.size() && text[i + 1] == '\n')
        ++i;
      end_record();
      any = false;
      break;
    case '\n':
      end_record();
      any = false;
      break;
    default:
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted)
    throw ValidationError("unterminated quoted field at end of CSV input");
  if (any || !field.empty() || !rec.empty())
    end_record();
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos)
    return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"')
      out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string format_record(const Record& rec) {
  std::string line;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    if (i)
      line.push_back(',');
    line += quote(rec[i]);
  }
  line.push_back('\n');
  return line;
}

/// Shortest representation that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  if (s.empty())
    return std::nullopt;
  if (s.front() == '+')
    s.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

inline bool is_blank(std::string_view s) { return s.find_first_not_of(" \t") == std::string_view::npos; }

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out)
    throw IoError("failed writing '" + path + "'");
}

/// Header = column names plus `__label__` when labels are present.
inline std::string format_matrix(const FeatureMatrix& m) {
  std::string out;
  Record header = m.column_names;
  if (m.labels)
    header.push_back("__label__");
  out += format_record(header);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Record rec;
    for (double v : m.row(i))
      rec.push_back(format_number(v));
    if (m.labels)
      rec.push_back(std::to_string((*m.labels)[i]));
    out += format_record(rec);
  }
  return out;
}

/// Reads an all-numeric CSV; a `__label__` column (if any) becomes the labels.
inline FeatureMatrix parse_matrix(std::string_view text) {
  auto records = parse(text);
  if (records.empty())
    throw ValidationError("matrix CSV has no header");
  const Record& header = records.front();
  std::optional<std::size_t> label_col;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == "__label__")
      label_col = j;
    else
      names.push_back(header[j]);
  }
  Matrix values(static_cast<Eigen::Index>(records.size() - 1), static_cast<Eigen::Index>(names.size()));
  std::optional<Labels> labels;
  if (label_col)
    labels.emplace();
  for (std::size_t r = 1; r < records.size(); ++r) {
    const Record& rec = records[r];
    if (rec.size() != header.size())
      throw ValidationError("matrix CSV line " + std::to_string(r + 1) + " has " + std::to_string(rec.size()) +
                            " fields, expected " + std::to_string(header.size()));
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < rec.size(); ++j) {
      auto v = parse_number(rec[j]);
      if (!v)
        throw ValidationError("matrix CSV line " + std::to_string(r + 1) + ", column '" + header[j] +
                              "': not a finite number: '" + rec[j] + "'");
      if (label_col && j == *label_col) {
        if (*v < 0 || *v != std::floor(*v))
          throw ValidationError("matrix CSV line " + std::to_string(r + 1) +
                                ": label must be a non-negative integer");
        labels->push_back(static_cast<int>(*v));
      } else {
        values(static_cast<Eigen::Index>(r - 1), c++) = *v;
      }
    }
  }
  FeatureMatrix m(std::move(values), std::move(labels), std::move(names));
  m.validate();
  return m;
}

} // namespace qenc::csv
