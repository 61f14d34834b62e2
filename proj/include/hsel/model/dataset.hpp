#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsel/common/error.hpp"

namespace hsel {

inline constexpr const char* kDatasetSchema = "hsel.dataset/1";

struct Dataset {
  std::vector<std::string> labels;
  std::vector<int> levels;
  bool discrete = false;
  std::uint64_t seed = 0;
  Eigen::MatrixXd values;  // rows = samples

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }

  int column(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == label) return static_cast<int>(i);
    throw DomainError("unknown column '" + label + "'");
  }

  void validate() const {
    if (labels.size() != static_cast<std::size_t>(values.cols()))
      throw ValidationError("column count differs from label count");
    if (levels.size() != labels.size()) throw ValidationError("level annotation count differs from label count");
    std::set<std::string> u(labels.begin(), labels.end());
    if (u.size() != labels.size()) throw ValidationError("dataset labels are not unique");
  }

  Dataset select(const std::vector<int>& cols) const {
    Dataset d;
    d.discrete = discrete;
    d.seed = seed;
    d.values.resize(values.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      d.labels.push_back(labels.at(cols[j]));
      d.levels.push_back(levels.at(cols[j]));
      d.values.col(static_cast<Eigen::Index>(j)) = values.col(cols[j]);
    }
    return d;
  }
};

inline Dataset make_dataset(Eigen::MatrixXd values, std::vector<std::string> labels, std::vector<int> levels,
                            std::uint64_t seed, bool discrete = false) {
  Dataset d{std::move(labels), std::move(levels), discrete, seed, std::move(values)};
  d.validate();
  return d;
}

inline std::string sidecar_path(const std::string& csv_path) { return csv_path + ".meta.json"; }

inline std::string format_real(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline void write_dataset(const Dataset& d, const std::string& csv_path) {
  d.validate();
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot write " + csv_path);
  for (std::size_t j = 0; j < d.labels.size(); ++j) out << (j ? "," : "") << d.labels[j];
  out << '\n';
  for (Eigen::Index i = 0; i < d.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.values.cols(); ++j) {
      if (j) out << ',';
      if (d.discrete)
        out << static_cast<long long>(d.values(i, j));
      else
        out << format_real(d.values(i, j));
    }
    out << '\n';
  }
  nlohmann::json meta = {{"schema", kDatasetSchema},
                         {"labels", d.labels},
                         {"levels", d.levels},
                         {"kind", d.discrete ? "discrete" : "continuous"},
                         {"seed", d.seed}};
  std::ofstream side(sidecar_path(csv_path));
  if (!side) throw IoError("cannot write " + sidecar_path(csv_path));
  side << meta.dump(2) << '\n';
}

inline Dataset read_dataset(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot read " + csv_path);
  Dataset d;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file " + csv_path);
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) d.labels.push_back(tok);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        r.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw IoError("non-numeric cell '" + tok + "' in " + csv_path);
      }
    }
    if (r.size() != d.labels.size()) throw IoError("ragged row in " + csv_path);
    rows.push_back(std::move(r));
  }
  d.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d.labels.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) d.values(i, j) = rows[i][j];

  std::ifstream side(sidecar_path(csv_path));
  if (side) {
    auto meta = nlohmann::json::parse(side);
    d.levels = meta.at("levels").get<std::vector<int>>();
    d.seed = meta.value("seed", std::uint64_t{0});
    d.discrete = meta.value("kind", std::string("continuous")) == "discrete";
  } else {
    d.levels.assign(d.labels.size(), 0);
  }
  d.validate();
  return d;
}

}  // namespace hsel
