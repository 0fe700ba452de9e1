#include "upiv/io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace upiv {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& c : out) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
    while (!c.empty() && c.front() == ' ') c.erase(c.begin());
  }
  return out;
}

double to_double(const std::string& s, int line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("line " + std::to_string(line) + ": invalid number '" + s + "'");
  }
  return v;
}

void write_number(std::ostream& out, double v) { out << std::setprecision(17) << v; }

}  // namespace

void write_dataset_csv(std::ostream& out, const UnpairedDataset& data) {
  data.validate();
  const bool one_hot = data.kind() == InstrumentKind::OneHot;
  const int m = data.m();
  const int d = data.d();
  if (one_hot) out << "# m=" << m << "\n";
  out << "role";
  if (one_hot) {
    out << ",env";
  } else {
    for (int l = 1; l <= m; ++l) out << ",i" << l;
  }
  out << ",y";
  for (int j = 1; j <= d; ++j) out << ",x" << j;
  out << "\n";

  auto write_instrument = [&](const InstrumentBlock& block, Index i) {
    if (one_hot) {
      out << "," << block.labels()[i];
    } else {
      for (int l = 0; l < m; ++l) {
        out << ",";
        write_number(out, block.values()(i, l));
      }
    }
  };
  for (Index i = 0; i < data.n(); ++i) {
    out << "y";
    write_instrument(data.y_instruments, i);
    out << ",";
    write_number(out, data.y(i));
    for (int j = 0; j < d; ++j) out << ",";
    out << "\n";
  }
  for (Index i = 0; i < data.n_tilde(); ++i) {
    out << "x";
    write_instrument(data.x_instruments, i);
    out << ",";
    for (int j = 0; j < d; ++j) {
      out << ",";
      write_number(out, data.x(i, j));
    }
    out << "\n";
  }
}

void write_dataset_csv(const std::filesystem::path& path, const UnpairedDataset& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_dataset_csv(out, data);
}

UnpairedDataset read_dataset_csv(std::istream& in) {
  std::string line;
  int line_no = 0;
  int m_declared = -1;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("#", 0) == 0) {
      const auto pos = line.find("m=");
      if (pos != std::string::npos) m_declared = static_cast<int>(to_double(split_csv(line.substr(pos + 2))[0], line_no));
      continue;
    }
    if (!line.empty()) {
      header = split_csv(line);
      break;
    }
  }
  if (header.empty() || header[0] != "role") throw ConfigError("dataset: missing header starting with 'role'");
  const bool one_hot = header.size() > 1 && header[1] == "env";
  std::size_t y_col = 0;
  while (y_col < header.size() && header[y_col] != "y") ++y_col;
  if (y_col == header.size()) throw ConfigError("dataset: missing 'y' column");
  const int m_cols = static_cast<int>(y_col) - 1;
  const int d = static_cast<int>(header.size() - y_col - 1);
  if (d < 1 || m_cols < 1) throw ConfigError("dataset: need instrument and covariate columns");

  std::vector<int> y_labels, x_labels;
  std::vector<std::vector<double>> y_inst, x_inst, x_rows;
  std::vector<double> y_vals;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw ConfigError("line " + std::to_string(line_no) + ": wrong column count");
    std::vector<double> inst;
    int label = -1;
    if (one_hot) {
      label = static_cast<int>(to_double(cells[1], line_no));
      if (label < 0) throw ConfigError("line " + std::to_string(line_no) + ": negative environment");
      max_label = std::max(max_label, label);
    } else {
      for (int l = 0; l < m_cols; ++l) inst.push_back(to_double(cells[1 + l], line_no));
    }
    if (cells[0] == "y") {
      y_vals.push_back(to_double(cells[y_col], line_no));
      if (one_hot) y_labels.push_back(label); else y_inst.push_back(std::move(inst));
    } else if (cells[0] == "x") {
      std::vector<double> xr;
      for (int j = 0; j < d; ++j) xr.push_back(to_double(cells[y_col + 1 + j], line_no));
      x_rows.push_back(std::move(xr));
      if (one_hot) x_labels.push_back(label); else x_inst.push_back(std::move(inst));
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": role must be 'y' or 'x'");
    }
  }

  UnpairedDataset data;
  data.y = Eigen::Map<const Vector>(y_vals.data(), static_cast<Index>(y_vals.size()));
  data.x.resize(static_cast<Index>(x_rows.size()), d);
  for (std::size_t i = 0; i < x_rows.size(); ++i) {
    for (int j = 0; j < d; ++j) data.x(static_cast<Index>(i), j) = x_rows[i][j];
  }
  if (one_hot) {
    const int m = m_declared > 0 ? m_declared : max_label + 1;
    if (max_label >= m) throw ConfigError("dataset: environment label exceeds declared m");
    data.y_instruments = InstrumentBlock::one_hot(std::move(y_labels), m);
    data.x_instruments = InstrumentBlock::one_hot(std::move(x_labels), m);
  } else {
    auto to_matrix = [m_cols](const std::vector<std::vector<double>>& rows) {
      Matrix out(static_cast<Index>(rows.size()), m_cols);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int l = 0; l < m_cols; ++l) out(static_cast<Index>(i), l) = rows[i][l];
      }
      return out;
    };
    data.y_instruments = InstrumentBlock::dense(to_matrix(y_inst));
    data.x_instruments = InstrumentBlock::dense(to_matrix(x_inst));
  }
  data.validate();
  return data;
}

UnpairedDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset " + path.string());
  return read_dataset_csv(in);
}

std::string estimate_to_json(const Estimate& est, int indent) {
  nlohmann::ordered_json j;
  j["beta"] = std::vector<double>(est.beta.data(), est.beta.data() + est.beta.size());
  if (est.support) j["support"] = *est.support;
  if (est.ci) {
    auto arr = nlohmann::json::array();
    for (const auto& iv : *est.ci) arr.push_back({iv.lower, iv.upper});
    j["ci"] = arr;
    j["ci_level"] = est.ci->empty() ? 0.0 : est.ci->front().level;
  }
  j["weight"] = to_string(est.weight_used);
  j["diagnostics"] = {{"condition_number", est.diagnostics.condition_number},
                      {"objective", est.diagnostics.objective},
                      {"lambda", est.diagnostics.lambda},
                      {"l1_sweeps", est.diagnostics.l1_sweeps},
                      {"selected_path_index", est.diagnostics.selected_path_index}};
  return j.dump(indent);
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open matrix " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    for (const auto& cell : split_csv(line)) row.push_back(to_double(cell, line_no));
    if (!rows.empty() && row.size() != rows.front().size()) throw ConfigError("matrix: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("matrix: empty file");
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return out;
}

}  // namespace upiv
