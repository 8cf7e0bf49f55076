#include "ctxshap/csv.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include "ctxshap/errors.hpp"

namespace ctxshap {

namespace {

std::vector<std::string> split_record(const std::string& line, size_t line_no) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"' && cell.empty()) {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  if (quoted)
    throw ValueError("csv line " + std::to_string(line_no) + ": unterminated quote");
  cells.push_back(std::move(cell));
  return cells;
}

double parse_cell(const std::string& cell, size_t line_no, size_t col) {
  size_t begin = cell.find_first_not_of(" \t");
  size_t end = cell.find_last_not_of(" \t");
  if (begin == std::string::npos)
    throw ValueError("csv line " + std::to_string(line_no) + ", column " +
                     std::to_string(col + 1) + ": empty cell (missing values are rejected)");
  double value = 0.0;
  auto res = std::from_chars(cell.data() + begin, cell.data() + end + 1, value);
  if (res.ec != std::errc{} || res.ptr != cell.data() + end + 1)
    throw ValueError("csv line " + std::to_string(line_no) + ", column " +
                     std::to_string(col + 1) + ": not a number: \"" + cell + "\"");
  if (!std::isfinite(value))
    throw ValueError("csv line " + std::to_string(line_no) + ", column " +
                     std::to_string(col + 1) + ": non-finite value");
  return value;
}

}  // namespace

Dataset parse_csv(const std::string& text) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : text) {
    if (c == '\n') {
      if (!current.empty() && current.back() == '\r') current.pop_back();
      lines.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!current.empty()) lines.push_back(std::move(current));
  if (lines.empty()) throw ValueError("csv: empty document");

  Dataset data;
  std::set<std::string> seen;
  for (std::string& name : split_record(lines[0], 1)) {
    if (name.empty()) throw ValueError("csv header: empty column name");
    if (!seen.insert(name).second)
      throw ValueError("csv header: duplicate column \"" + name + "\"");
    data.features.names.push_back(std::move(name));
  }

  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;  // tolerate trailing blank lines
    std::vector<std::string> cells = split_record(lines[i], i + 1);
    if (cells.size() != data.features.count())
      throw ValueError("csv line " + std::to_string(i + 1) + ": expected " +
                       std::to_string(data.features.count()) + " cells, got " +
                       std::to_string(cells.size()));
    Instance row;
    row.values.reserve(cells.size());
    for (size_t c = 0; c < cells.size(); ++c)
      row.values.push_back(parse_cell(cells[c], i + 1, c));
    data.rows.push_back(std::move(row));
  }
  if (data.rows.empty()) throw ValueError("csv: no data rows");
  return data;
}

Dataset align_columns(const Dataset& data, const FeatureSet& features) {
  if (data.features.count() != features.count())
    throw WidthError("csv has " + std::to_string(data.features.count()) +
                     " columns but the model has " + std::to_string(features.count()) +
                     " features");
  std::vector<size_t> source(features.count());
  for (size_t i = 0; i < features.count(); ++i) {
    const int idx = data.features.index_of(features.names[i]);
    if (idx < 0)
      throw WidthError("csv is missing model feature \"" + features.names[i] + "\"");
    source[i] = size_t(idx);
  }
  Dataset aligned;
  aligned.features = features;
  aligned.rows.reserve(data.rows.size());
  for (const Instance& row : data.rows) {
    Instance out;
    out.values.reserve(features.count());
    for (size_t i = 0; i < features.count(); ++i) out.values.push_back(row.values[source[i]]);
    aligned.rows.push_back(std::move(out));
  }
  return aligned;
}

}  // namespace ctxshap
