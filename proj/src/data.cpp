#include "dml/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace dml {

std::size_t Table::index_of(std::string_view name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end())
    throw DataError(DataErrc::unknown_label, "unknown column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names.begin());
}

void Table::add_column(std::string name, std::vector<double> values) {
  names.push_back(std::move(name));
  columns.push_back(std::move(values));
}

namespace {

Eigen::MatrixXd gather(const Table& table, const std::vector<std::size_t>& idx) {
  const auto n = static_cast<Eigen::Index>(table.n_rows());
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto& col = table.columns[idx[j]];
    out.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(col.data(), n);
  }
  return out;
}

}  // namespace

DmlData DmlData::from_columns(const Table& table, std::string_view y_col,
                              const std::vector<std::string>& d_cols,
                              const std::optional<std::vector<std::string>>& x_cols,
                              const std::vector<std::string>& z_cols) {
  if (table.names.size() != table.columns.size())
    throw DataError(DataErrc::ragged_table, "table has mismatched names and columns");
  const std::size_t n = table.n_rows();
  for (std::size_t j = 0; j < table.n_cols(); ++j) {
    if (table.columns[j].size() != n)
      throw DataError(DataErrc::ragged_table,
                      "column '" + table.names[j] + "' has " +
                          std::to_string(table.columns[j].size()) + " rows, expected " +
                          std::to_string(n));
  }
  {
    std::set<std::string> seen;
    for (const auto& name : table.names)
      if (!seen.insert(name).second)
        throw DataError(DataErrc::overlapping_roles, "duplicate column name '" + name + "'");
  }
  if (d_cols.empty()) throw DataError(DataErrc::empty_role, "at least one treatment column required");

  // Role labels must be known and pairwise distinct.
  std::set<std::string> assigned;
  auto claim = [&](const std::string& label, const char* role) {
    table.index_of(label);
    if (!assigned.insert(label).second)
      throw DataError(DataErrc::overlapping_roles,
                      "column '" + label + "' assigned to more than one role (" + role + ")");
  };
  claim(std::string(y_col), "y");
  for (const auto& c : d_cols) claim(c, "d");
  for (const auto& c : z_cols) claim(c, "z");
  std::vector<std::string> x_list;
  if (x_cols) {
    for (const auto& c : *x_cols) claim(c, "x");
    x_list = *x_cols;
  } else {
    for (const auto& name : table.names)
      if (!assigned.count(name)) x_list.push_back(name);
  }
  if (x_list.empty()) throw DataError(DataErrc::empty_role, "at least one covariate column required");

  auto indices = [&](const std::vector<std::string>& labels) {
    std::vector<std::size_t> idx;
    for (const auto& l : labels) idx.push_back(table.index_of(l));
    return idx;
  };
  std::vector<std::size_t> used = {table.index_of(y_col)};
  for (const std::vector<std::string>* role : std::initializer_list<const std::vector<std::string>*>{&d_cols, &x_list, &z_cols})
    for (auto i : indices(*role)) used.push_back(i);
  for (std::size_t j : used) {
    const auto& col = table.columns[j];
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite(col[i]))
        throw DataError(DataErrc::non_finite, "non-finite value in column '" + table.names[j] +
                                                  "' at row " + std::to_string(i + 1));
  }
  if (n < 2)
    throw DataError(DataErrc::too_few_rows,
                    "at least 2 observations required, got " + std::to_string(n));

  DmlData data;
  data.y_ = gather(table, {table.index_of(y_col)}).col(0);
  data.d_ = gather(table, indices(d_cols));
  data.x_ = gather(table, indices(x_list));
  data.z_ = gather(table, indices(z_cols));
  data.y_name_ = std::string(y_col);
  data.d_names_ = d_cols;
  data.x_names_ = x_list;
  data.z_names_ = z_cols;
  return data;
}

Eigen::MatrixXd DmlData::covariates_for(Eigen::Index j) const {
  if (j < 0 || j >= d_.cols()) throw ValidationError("treatment index out of range");
  Eigen::MatrixXd out(n_obs(), x_.cols() + d_.cols() - 1);
  out.leftCols(x_.cols()) = x_;
  Eigen::Index c = x_.cols();
  for (Eigen::Index k = 0; k < d_.cols(); ++k)
    if (k != j) out.col(c++) = d_.col(k);
  return out;
}

Table DmlData::to_table() const {
  Table t;
  auto push = [&](const std::string& name, const Eigen::VectorXd& col) {
    t.add_column(name, std::vector<double>(col.data(), col.data() + col.size()));
  };
  push(y_name_, y_);
  for (Eigen::Index j = 0; j < d_.cols(); ++j) push(d_names_[static_cast<std::size_t>(j)], d_.col(j));
  for (Eigen::Index j = 0; j < x_.cols(); ++j) push(x_names_[static_cast<std::size_t>(j)], x_.col(j));
  for (Eigen::Index j = 0; j < z_.cols(); ++j) push(z_names_[static_cast<std::size_t>(j)], z_.col(j));
  return t;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                    : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

Table read_csv(std::istream& in) {
  Table table;
  std::string line;
  if (!std::getline(in, line)) throw DataError(DataErrc::parse_failure, "empty CSV: header row required");
  for (auto f : split_fields(line)) {
    std::string_view name = trim(f);
    if (name.size() >= 2 && name.front() == '"' && name.back() == '"') name = name.substr(1, name.size() - 2);
    table.names.emplace_back(name);
  }
  table.columns.resize(table.names.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line);
    if (fields.size() != table.names.size())
      throw DataError(DataErrc::parse_failure, "row " + std::to_string(row) + ": expected " +
                                                   std::to_string(table.names.size()) +
                                                   " fields, got " + std::to_string(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v;
      if (!parse_double(trim(fields[j]), v))
        throw DataError(DataErrc::parse_failure, "cannot parse '" + std::string(trim(fields[j])) +
                                                     "' as a number at row " + std::to_string(row) +
                                                     ", column " + table.names[j]);
      table.columns[j].push_back(v);
    }
  }
  return table;
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrc::io_failure, "cannot open '" + path.string() + "'");
  return read_csv(in);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream& out, const Table& table) {
  for (std::size_t j = 0; j < table.names.size(); ++j) out << (j ? "," : "") << table.names[j];
  out << '\n';
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    for (std::size_t j = 0; j < table.n_cols(); ++j)
      out << (j ? "," : "") << format_double(table.columns[j][i]);
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw DataError(DataErrc::io_failure, "cannot write '" + path.string() + "'");
  write_csv(out, table);
  if (!out) throw DataError(DataErrc::io_failure, "write to '" + path.string() + "' failed");
}

DmlData from_csv(const std::filesystem::path& path, std::string_view y_col,
                 const std::vector<std::string>& d_cols,
                 const std::optional<std::vector<std::string>>& x_cols,
                 const std::vector<std::string>& z_cols) {
  return DmlData::from_columns(read_csv(path), y_col, d_cols, x_cols, z_cols);
}

bool is_binary(const Eigen::Ref<const Eigen::VectorXd>& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] != 0.0 && v[i] != 1.0) return false;
  return true;
}

std::vector<bool> check_binary_treatment(const DmlData& data) {
  std::vector<bool> out;
  for (Eigen::Index j = 0; j < data.n_treatments(); ++j) out.push_back(is_binary(data.d().col(j)));
  return out;
}

}  // namespace dml
