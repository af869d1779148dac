#include "wbic/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wbic/errors.hpp"

namespace wbic {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << text;
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out;
  const int m = data.input_dim;
  const int total = data.record_dim;
  for (int j = 0; j < m; ++j) {
    if (j) out += ',';
    out += "x" + std::to_string(j);
  }
  for (int j = m; j < total; ++j) {
    if (j) out += ',';
    out += (m > 0 ? "y" : "x") + std::to_string(j - m);
  }
  out += '\n';
  const std::int64_t n = data.n();
  for (std::int64_t i = 0; i < n; ++i) {
    const auto rec = data.record(i);
    for (int j = 0; j < total; ++j) {
      if (j) out += ',';
      out += format_double(rec[static_cast<std::size_t>(j)]);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("csv: cannot parse number '" + s + "'");
  return v;
}

}  // namespace

Dataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);

  int x_cols = 0, y_cols = 0;
  for (const std::string& h : header) {
    if (h.rfind('x', 0) == 0 && y_cols == 0)
      ++x_cols;
    else if (h.rfind('y', 0) == 0)
      ++y_cols;
    else
      throw ConfigError("csv: unexpected column '" + h + "'");
  }

  Dataset data;
  data.record_dim = x_cols + y_cols;
  data.input_dim = y_cols > 0 ? x_cols : 0;
  std::int64_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != data.record_dim)
      throw ConfigError("csv: row " + std::to_string(row) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(data.record_dim));
    for (const std::string& f : fields) data.values.push_back(parse_double(f));
    ++row;
  }
  if (row == 0) throw ConfigError("csv: no data rows");
  return data;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  write_text_file(path, dataset_to_csv(data));
}

Dataset read_dataset_csv(const std::string& path) {
  return dataset_from_csv(read_text_file(path));
}

namespace {

nlohmann::json matrix_to_json(const std::vector<double>& values, int rows, int cols) {
  nlohmann::json rows_json = nlohmann::json::array();
  for (int i = 0; i < rows; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < cols; ++j) row.push_back(values[static_cast<std::size_t>(i * cols + j)]);
    rows_json.push_back(std::move(row));
  }
  return rows_json;
}

std::vector<double> matrix_from_json(const nlohmann::json& j, int& rows, int& cols) {
  rows = static_cast<int>(j.size());
  std::vector<double> out;
  cols = 0;
  for (int i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (i == 0) cols = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != cols) throw ConfigError("truth json: ragged matrix");
    for (const auto& v : row) out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::string truth_to_json_text(const RrrTruth& truth) {
  nlohmann::json j;
  j["A0"] = matrix_to_json(truth.a0, truth.h0, truth.m);
  j["B0"] = matrix_to_json(truth.b0, truth.n_out, truth.h0);
  j["sigma"] = truth.sigma;
  j["x_std"] = truth.x_std;
  return j.dump(2) + "\n";
}

RrrTruth truth_from_json_text(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  RrrTruth truth;
  int rows = 0, cols = 0;
  truth.a0 = matrix_from_json(j.at("A0"), rows, cols);
  truth.h0 = rows;
  truth.m = cols;
  truth.b0 = matrix_from_json(j.at("B0"), rows, cols);
  truth.n_out = rows;
  if (cols != truth.h0) throw ConfigError("truth json: A0/B0 rank mismatch");
  truth.sigma = j.at("sigma").get<double>();
  truth.x_std = j.at("x_std").get<double>();
  if (!(truth.sigma > 0.0) || !(truth.x_std > 0.0))
    throw ConfigError("truth json: stds must be positive");
  return truth;
}

void write_truth_json(const RrrTruth& truth, const std::string& path) {
  write_text_file(path, truth_to_json_text(truth));
}

RrrTruth read_truth_json(const std::string& path) {
  return truth_from_json_text(read_text_file(path));
}

void write_chain(const Chain& chain, const ChainConfig& config, const std::string& prefix,
                 ChainDumpFormat format) {
  if (format == ChainDumpFormat::csv) {
    std::string out = "draw";
    for (int j = 0; j < chain.dim; ++j) out += ",w" + std::to_string(j);
    out += ",nll\n";
    for (std::int64_t r = 0; r < chain.n_draws(); ++r) {
      out += std::to_string(r);
      const auto w = chain.draw(r);
      for (int j = 0; j < chain.dim; ++j) out += "," + format_double(w[static_cast<std::size_t>(j)]);
      out += "," + format_double(chain.nll[static_cast<std::size_t>(r)]);
      out += '\n';
    }
    write_text_file(prefix + ".csv", out);
  } else {
    std::ofstream out(prefix + ".bin", std::ios::binary);
    if (!out) throw ConfigError("cannot write file: " + prefix + ".bin");
    const char magic[8] = {'W', 'B', 'C', 'H', 'A', 'I', 'N', '1'};
    out.write(magic, sizeof(magic));
    const std::int32_t dim = chain.dim;
    const std::int64_t r = chain.n_draws();
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    out.write(reinterpret_cast<const char*>(&r), sizeof(r));
    out.write(reinterpret_cast<const char*>(chain.draws.data()),
              static_cast<std::streamsize>(chain.draws.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(chain.nll.data()),
              static_cast<std::streamsize>(chain.nll.size() * sizeof(double)));
  }

  nlohmann::json side;
  side["beta"] = chain.beta;
  side["dim"] = chain.dim;
  side["n"] = chain.data_n;
  side["draws"] = chain.n_draws();
  side["acceptance_rate"] = chain.acceptance_rate;
  side["step_std_final"] = chain.step_std_final;
  side["seed"] = chain.seed;
  side["model_fingerprint"] = hex64(chain.model_fingerprint);
  side["data_fingerprint"] = hex64(chain.data_fingerprint);
  side["config"] = {{"burn_in", config.burn_in},
                    {"thin", config.thin},
                    {"draws", config.draws},
                    {"step_std_init", config.step_std_init},
                    {"target_acceptance", config.target_acceptance},
                    {"adapt", config.adapt}};
  write_text_file(prefix + ".json", side.dump(2) + "\n");
}

}  // namespace wbic
