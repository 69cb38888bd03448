#include "comboplat/result_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "comboplat/errors.hpp"

namespace comboplat {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void ResultTable::add_row(std::vector<Cell> row) {
  if (row.size() != columns_.size()) throw DomainError("ResultTable: row width does not match the column list");
  rows_.push_back(std::move(row));
}

void ResultTable::append(const ResultTable& other) {
  if (other.columns_ != columns_) throw DomainError("ResultTable: cannot append a table with other columns");
  rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
}

std::size_t ResultTable::column(const std::string& name) const {
  auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) throw DomainError("ResultTable: no column '" + name + "'");
  return static_cast<std::size_t>(it - columns_.begin());
}

double ResultTable::number(std::size_t row, const std::string& name) const {
  const Cell& c = rows_.at(row).at(column(name));
  if (auto d = std::get_if<double>(&c)) return *d;
  if (auto i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  throw DomainError("ResultTable: column '" + name + "' is not numeric");
}

const std::string& ResultTable::text(std::size_t row, const std::string& name) const {
  const Cell& c = rows_.at(row).at(column(name));
  if (auto s = std::get_if<std::string>(&c)) return *s;
  throw DomainError("ResultTable: column '" + name + "' is not text");
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

void ResultTable::write_csv(std::ostream& out) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) out << (j ? "," : "") << csv_field(columns_[j]);
  out << '\n';
  for (const auto& row : rows_) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>)
              out << format_double(v);
            else if constexpr (std::is_same_v<T, std::int64_t>)
              out << v;
            else
              out << csv_field(v);
          },
          row[j]);
    }
    out << '\n';
  }
}

void ResultTable::write_jsonl(std::ostream& out) const {
  for (const auto& row : rows_) {
    nlohmann::ordered_json obj;
    for (std::size_t j = 0; j < row.size(); ++j)
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>)
              obj[columns_[j]] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
            else
              obj[columns_[j]] = v;
          },
          row[j]);
    out << obj.dump() << '\n';
  }
}

}  // namespace comboplat
