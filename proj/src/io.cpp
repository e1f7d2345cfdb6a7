#include "pli/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "pli/core/error.hpp"

namespace pli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& token) {
  const std::string t = trim(token);
  if (t.empty()) throw Error("empty numeric field");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) throw Error("malformed number '" + t + "'");
  return v;
}

std::string matrix_values(const Matrix& m) {
  std::vector<double> v(m.data(), m.data() + m.size());
  return join_doubles(v);
}

Matrix matrix_from_values(const std::string& text, Eigen::Index rows, Eigen::Index cols) {
  const std::vector<double> v = split_doubles(text);
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) throw Error("model field has the wrong number of values");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

Vector vector_from_values(const std::string& text) {
  const std::vector<double> v = split_doubles(text);
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

const std::string& lookup(const KeyValues& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw Error("missing model field '" + key + "'");
  return it->second;
}

void put_gaussian(const GaussianFull& g, const std::string& prefix, KeyValues& out) {
  out[prefix + ".mean"] = join_doubles(std::vector<double>(g.mean().data(), g.mean().data() + g.dim()));
  out[prefix + ".covariance"] = matrix_values(g.covariance());
}

GaussianFull get_gaussian(const KeyValues& kv, const std::string& prefix) {
  const Vector mean = vector_from_values(lookup(kv, prefix + ".mean"));
  return GaussianFull(mean, matrix_from_values(lookup(kv, prefix + ".covariance"), mean.size(), mean.size()));
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_doubles(const std::vector<double>& values, char sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += format_double(values[i]);
  }
  return out;
}

std::vector<double> split_doubles(const std::string& text) {
  std::vector<double> out;
  std::string token;
  for (const char c : text + " ") {
    if (c == ' ' || c == ',' || c == '\t') {
      if (!trim(token).empty()) out.push_back(parse_double(token));
      token.clear();
    } else {
      token += c;
    }
  }
  return out;
}

std::string array_to_text(const Matrix& m) {
  std::string out = "# pli-array v1 rows=" + std::to_string(m.rows()) + " cols=" + std::to_string(m.cols()) + "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Matrix array_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  long rows = -1;
  long cols = -1;
  if (std::sscanf(header.c_str(), "# pli-array v1 rows=%ld cols=%ld", &rows, &cols) != 2 || rows < 0 || cols < 0) {
    throw Error("not a pli-array file (bad header)");
  }
  Matrix m(rows, cols);
  std::string line;
  for (long i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw Error("pli-array: truncated at row " + std::to_string(i));
    std::istringstream row(line);
    std::string field;
    long j = 0;
    while (std::getline(row, field, ',')) {
      if (j >= cols) throw Error("pli-array: too many columns in row " + std::to_string(i));
      m(i, j++) = parse_double(field);
    }
    if (j != cols) throw Error("pli-array: too few columns in row " + std::to_string(i));
  }
  return m;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out.flush()) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_array(const std::filesystem::path& path, const Matrix& m) { write_text_atomic(path, array_to_text(m)); }

Matrix read_array(const std::filesystem::path& path) {
  try {
    return array_from_text(read_text(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(number);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second) throw ConfigError(where + ": duplicate key '" + key + "'");
  }
  return kv;
}

std::string key_values_to_text(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

void model_to_key_values(const DensityModel& model, const std::string& prefix, KeyValues& out) {
  if (const auto* g = std::get_if<GaussianFull>(&model)) {
    out[prefix + ".kind"] = "gaussian";
    put_gaussian(*g, prefix, out);
  } else if (const auto* b = std::get_if<BoxUniform>(&model)) {
    out[prefix + ".kind"] = "box_uniform";
    out[prefix + ".lower"] = join_doubles(std::vector<double>(b->lower.data(), b->lower.data() + b->lower.size()));
    out[prefix + ".upper"] = join_doubles(std::vector<double>(b->upper.data(), b->upper.data() + b->upper.size()));
  } else if (const auto* l = std::get_if<LogNormalDiag>(&model)) {
    out[prefix + ".kind"] = "lognormal";
    out[prefix + ".log_mean"] =
        join_doubles(std::vector<double>(l->log_mean.data(), l->log_mean.data() + l->log_mean.size()));
    out[prefix + ".log_std"] =
        join_doubles(std::vector<double>(l->log_std.data(), l->log_std.data() + l->log_std.size()));
  } else {
    const auto& m = std::get<GaussianMixture>(model);
    out[prefix + ".kind"] = "gmm";
    out[prefix + ".components"] = std::to_string(m.components.size());
    out[prefix + ".weights"] = join_doubles(std::vector<double>(m.weights.data(), m.weights.data() + m.weights.size()));
    for (std::size_t i = 0; i < m.components.size(); ++i) {
      put_gaussian(m.components[i], prefix + ".c" + std::to_string(i), out);
    }
  }
}

DensityModel model_from_key_values(const KeyValues& kv, const std::string& prefix) {
  const std::string& kind = lookup(kv, prefix + ".kind");
  if (kind == "gaussian") return get_gaussian(kv, prefix);
  if (kind == "box_uniform") {
    return BoxUniform(vector_from_values(lookup(kv, prefix + ".lower")),
                      vector_from_values(lookup(kv, prefix + ".upper")));
  }
  if (kind == "lognormal") {
    return LogNormalDiag(vector_from_values(lookup(kv, prefix + ".log_mean")),
                         vector_from_values(lookup(kv, prefix + ".log_std")));
  }
  if (kind == "gmm") {
    const auto k = static_cast<std::size_t>(std::stoul(lookup(kv, prefix + ".components")));
    std::vector<GaussianFull> parts;
    for (std::size_t i = 0; i < k; ++i) parts.push_back(get_gaussian(kv, prefix + ".c" + std::to_string(i)));
    return GaussianMixture(vector_from_values(lookup(kv, prefix + ".weights")), std::move(parts));
  }
  throw Error("unknown model kind '" + kind + "'");
}

}  // namespace pli
