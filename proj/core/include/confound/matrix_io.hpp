#pragma once

#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "confound/model.hpp"

namespace confound {

/// Shortest-exact text form of a double (17 significant digits).
std::string format_double(double v);

/// Row-major CSV, optionally preceded by one "# ..." header line.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, const std::string& header = {});
/// Reads a CSV matrix, skipping lines that start with '#'. Ragged rows or
/// unparsable cells raise InvalidInput.
Eigen::MatrixXd read_matrix_csv(std::istream& in, std::string* header = nullptr);

Eigen::MatrixXd read_matrix_file(const std::string& path, std::string* header = nullptr);
void write_matrix_file(const std::string& path, const Eigen::MatrixXd& m,
                       const std::string& header = {});

/// X (d x n) and Y (n, one value per line), both with the header "# d=<d> n=<n>".
void write_dataset(const std::string& x_path, const std::string& y_path,
                   const ObservationalData& data);
ObservationalData read_dataset(const std::string& x_path, const std::string& y_path);

/// <prefix>.mixing.csv, <prefix>.alpha.csv, <prefix>.beta.csv and
/// <prefix>.model.txt (key = value scalars).
void write_model(const std::string& prefix, const CausalModel& model);
CausalModel read_model(const std::string& prefix);

}  // namespace confound
