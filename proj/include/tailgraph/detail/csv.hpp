#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tailgraph::detail {

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

// Numeric CSV with a mandatory header row, comma separated, '.' decimal.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t next = line.find(',', pos);
      std::string cell = line.substr(pos, next == std::string::npos ? next : next - pos);
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc())
        throw std::runtime_error("read_csv: non-numeric cell '" + cell + "' in " + path);
      row.push_back(v);
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    if (row.size() != t.header.size())
      throw std::runtime_error("read_csv: ragged row in " + path);
    rows.push_back(std::move(row));
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return t;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// temp-file-plus-rename so readers never observe a partial artifact
inline void atomic_write(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("atomic_write: cannot open " + tmp);
    out << content;
    if (!out) throw std::runtime_error("atomic_write: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("atomic_write: rename failed for " + path);
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const Eigen::MatrixXd& values) {
  std::ostringstream out;
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << "\n";
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j)
      out << (j ? "," : "") << format_double(values(i, j));
    out << "\n";
  }
  atomic_write(path, out.str());
}

}  // namespace tailgraph::detail
