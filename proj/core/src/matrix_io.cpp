#include "confound/matrix_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "confound/errors.hpp"

namespace confound {
namespace {

std::string dataset_header(Eigen::Index d, Eigen::Index n) {
  return "d=" + std::to_string(d) + " n=" + std::to_string(n);
}

double parse_cell(const std::string& cell, std::size_t line) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
  if (end == begin || (end && *end != '\0')) {
    fail(ErrorKind::InvalidInput, "bad number '" + cell + "' on line " + std::to_string(line));
  }
  return v;
}

void check_header(const std::string& header, Eigen::Index d, Eigen::Index n,
                  const std::string& path) {
  if (header.empty()) return;
  if (header != dataset_header(d, n)) {
    fail(ErrorKind::InvalidInput, path + ": header '# " + header + "' does not match contents (" +
                                      dataset_header(d, n) + ")");
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::InvalidInput, "cannot write " + path);
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, const std::string& header) {
  if (!header.empty()) out << "# " << header << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(std::istream& in, std::string* header) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (header && header->empty()) {
        const auto start = line.find_first_not_of("# ");
        *header = start == std::string::npos ? "" : line.substr(start);
      }
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(parse_cell(cell, lineno));
    if (!rows.empty() && row.size() != rows.front().size()) {
      fail(ErrorKind::InvalidInput, "ragged CSV row on line " + std::to_string(lineno));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Eigen::MatrixXd read_matrix_file(const std::string& path, std::string* header) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidInput, "cannot read " + path);
  return read_matrix_csv(in, header);
}

void write_matrix_file(const std::string& path, const Eigen::MatrixXd& m,
                       const std::string& header) {
  std::ofstream out = open_out(path);
  write_matrix_csv(out, m, header);
}

void write_dataset(const std::string& x_path, const std::string& y_path,
                   const ObservationalData& data) {
  const std::string header = dataset_header(data.dim(), data.samples());
  write_matrix_file(x_path, data.x(), header);
  write_matrix_file(y_path, data.y(), header);
}

ObservationalData read_dataset(const std::string& x_path, const std::string& y_path) {
  std::string xh, yh;
  Eigen::MatrixXd x = read_matrix_file(x_path, &xh);
  Eigen::MatrixXd y = read_matrix_file(y_path, &yh);
  if (y.cols() != 1 && y.rows() == 1) y.transposeInPlace();
  if (y.cols() != 1) fail(ErrorKind::InvalidInput, y_path + ": expected one value per line");
  check_header(xh, x.rows(), x.cols(), x_path);
  check_header(yh, x.rows(), y.rows(), y_path);
  return ObservationalData(std::move(x), y.col(0));
}

void write_model(const std::string& prefix, const CausalModel& model) {
  write_matrix_file(prefix + ".mixing.csv", model.mixing());
  write_matrix_file(prefix + ".alpha.csv", model.alpha());
  write_matrix_file(prefix + ".beta.csv", model.beta());
  std::ofstream out = open_out(prefix + ".model.txt");
  out << "d = " << model.dim() << '\n'
      << "l = " << model.latent_dim() << '\n'
      << "sigma_eps2 = " << format_double(model.sigma_eps2()) << '\n'
      << "sigma_alpha2 = " << format_double(model.sigma_alpha2()) << '\n'
      << "sigma_beta2 = " << format_double(model.sigma_beta2()) << '\n';
}

CausalModel read_model(const std::string& prefix) {
  std::ifstream in(prefix + ".model.txt");
  if (!in) fail(ErrorKind::InvalidInput, "cannot read " + prefix + ".model.txt");
  std::map<std::string, double> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto eq = line.find('=');
    if (line.empty() || line[0] == '#') continue;
    if (eq == std::string::npos) fail(ErrorKind::InvalidInput, "model.txt: missing '='");
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    kv[key] = parse_cell(line.substr(eq + 1), lineno);
  }
  for (const char* k : {"sigma_eps2", "sigma_alpha2", "sigma_beta2"}) {
    if (!kv.count(k)) fail(ErrorKind::InvalidInput, std::string("model.txt: missing ") + k);
  }
  Eigen::MatrixXd alpha = read_matrix_file(prefix + ".alpha.csv");
  Eigen::MatrixXd beta = read_matrix_file(prefix + ".beta.csv");
  if (alpha.cols() != 1 || beta.cols() != 1) {
    fail(ErrorKind::InvalidInput, "alpha and beta files need one value per line");
  }
  return CausalModel(read_matrix_file(prefix + ".mixing.csv"), alpha.col(0), beta.col(0),
                     kv["sigma_eps2"], kv["sigma_alpha2"], kv["sigma_beta2"]);
}

}  // namespace confound
