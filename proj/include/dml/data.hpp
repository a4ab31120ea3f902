#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dml/errors.hpp"

namespace dml {

// Named numeric columns of equal length; the raw form data arrives in.
struct Table {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  std::size_t n_rows() const { return columns.empty() ? 0 : columns.front().size(); }
  std::size_t n_cols() const { return columns.size(); }
  // Throws DataError(unknown_label) when absent.
  std::size_t index_of(std::string_view name) const;
  void add_column(std::string name, std::vector<double> values);
};

enum class DataErrc {
  unknown_label,
  overlapping_roles,
  non_finite,
  too_few_rows,
  ragged_table,
  empty_role,
  io_failure,
  parse_failure,
};

class DataError : public ValidationError {
 public:
  DataError(DataErrc code, const std::string& what) : ValidationError(what), code_(code) {}
  DataErrc code() const { return code_; }

 private:
  DataErrc code_;
};

// Column roles: outcome y, treatments d, covariates x, optional instruments z.
// Immutable after construction; all blocks are column-major doubles.
class DmlData {
 public:
  // When x_cols is omitted every column not assigned another role becomes a
  // covariate.
  static DmlData from_columns(const Table& table, std::string_view y_col,
                              const std::vector<std::string>& d_cols,
                              const std::optional<std::vector<std::string>>& x_cols = std::nullopt,
                              const std::vector<std::string>& z_cols = {});

  Eigen::Index n_obs() const { return y_.size(); }
  Eigen::Index n_treatments() const { return d_.cols(); }
  Eigen::Index n_covariates() const { return x_.cols(); }
  Eigen::Index n_instruments() const { return z_.cols(); }
  bool has_instrument() const { return z_.cols() > 0; }

  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::MatrixXd& d() const { return d_; }
  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::MatrixXd& z() const { return z_; }

  const std::string& y_name() const { return y_name_; }
  const std::vector<std::string>& d_names() const { return d_names_; }
  const std::vector<std::string>& x_names() const { return x_names_; }
  const std::vector<std::string>& z_names() const { return z_names_; }

  // Covariates for estimating the effect of treatment `j`: x followed by the
  // remaining treatment columns.
  Eigen::MatrixXd covariates_for(Eigen::Index j) const;

  // Columns in role order y, d..., x..., z...
  Table to_table() const;

 private:
  DmlData() = default;

  Eigen::VectorXd y_;
  Eigen::MatrixXd d_, x_, z_;
  std::string y_name_;
  std::vector<std::string> d_names_, x_names_, z_names_;
};

// Header row required, '.' decimal separator, unquoted numeric cells.
Table read_csv(std::istream& in);
Table read_csv(const std::filesystem::path& path);
// Values are written in shortest round-trip form, so read_csv(write_csv(t))
// reproduces t bit for bit.
void write_csv(std::ostream& out, const Table& table);
void write_csv(const std::filesystem::path& path, const Table& table);

DmlData from_csv(const std::filesystem::path& path, std::string_view y_col,
                 const std::vector<std::string>& d_cols,
                 const std::optional<std::vector<std::string>>& x_cols = std::nullopt,
                 const std::vector<std::string>& z_cols = {});

bool is_binary(const Eigen::Ref<const Eigen::VectorXd>& v);

// One flag per treatment column: every entry exactly 0.0 or 1.0.
std::vector<bool> check_binary_treatment(const DmlData& data);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace dml
