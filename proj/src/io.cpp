#include "fosr/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <system_error>
#include <unordered_map>

#include "fosr/error.hpp"
#include "fosr/tuning.hpp"

namespace fosr {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines = split(text, '\n');
  // split() trims, which also removes a trailing '\r'.
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

void expect_columns(const std::vector<std::string>& header, std::string_view prefix, std::size_t first,
                    std::size_t count, const std::string& what) {
  for (std::size_t c = 0; c < count; ++c) {
    const std::string expected = std::string(prefix) + std::to_string(c + 1);
    if (first + c >= header.size() || header[first + c] != expected) {
      throw InputError(what + " header: expected column '" + expected + "'");
    }
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

double parse_double(std::string_view text) {
  text = trim(text);
  double value = 0.0;
  const char* begin = text.data();
  if (!text.empty() && text.front() == '+') ++begin;
  const auto result = std::from_chars(begin, text.data() + text.size(), value);
  if (text.empty() || result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw InputError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

long long parse_int(std::string_view text) {
  text = trim(text);
  long long value = 0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw InputError("not an integer: '" + std::string(text) + "'");
  }
  return value;
}

// ---- config ----

Config Config::parse(std::string_view text, const std::string& origin) {
  Config config;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + " line " + std::to_string(i + 1);
    if (eq == std::string_view::npos) throw InputError(where + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw InputError(where + ": empty key");
    if (config.has(key)) throw InputError(where + ": duplicate key '" + key + "'");
    config.values_[key] = std::string(trim(line.substr(eq + 1)));
  }
  return config;
}

Config Config::load(const std::filesystem::path& path) {
  Config config = parse(read_text(path), path.string());
  config.base_dir_ = path.parent_path();
  return config;
}

void Config::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw InputError("override '" + std::string(assignment) + "' is not key=value");
  const std::string key(trim(assignment.substr(0, eq)));
  if (key.empty()) throw InputError("override has an empty key");
  values_[key] = std::string(trim(assignment.substr(eq + 1)));
}

std::string Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw InputError("missing config key '" + key + "'");
  return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

double Config::get_double(const std::string& key) const {
  try {
    return parse_double(get(key));
  } catch (const InputError& e) {
    throw InputError("config key '" + key + "': " + e.what());
  }
}

double Config::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int Config::get_int(const std::string& key) const {
  try {
    const long long v = parse_int(get(key));
    if (v < INT32_MIN || v > INT32_MAX) throw InputError("out of range");
    return static_cast<int>(v);
  } catch (const InputError& e) {
    throw InputError("config key '" + key + "': " + e.what());
  }
}

int Config::get_int_or(const std::string& key, int fallback) const { return has(key) ? get_int(key) : fallback; }

bool Config::get_bool_or(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InputError("config key '" + key + "': expected true or false");
}

std::vector<double> Config::get_list(const std::string& key) const {
  const std::string v = get(key);
  try {
    if (v.find(':') != std::string::npos) {
      const auto parts = split(v, ':');
      if (parts.size() != 3) throw InputError("expected lo:hi:count");
      const long long count = parse_int(parts[2]);
      if (count < 1 || count > 100000) throw InputError("grid count out of range");
      return log_space(parse_double(parts[0]), parse_double(parts[1]), static_cast<int>(count));
    }
    std::vector<double> out;
    for (auto cell : split(v, ',')) out.push_back(parse_double(cell));
    return out;
  } catch (const InputError& e) {
    throw InputError("config key '" + key + "': " + e.what());
  }
}

std::vector<int> Config::get_int_list(const std::string& key) const {
  std::vector<int> out;
  try {
    for (auto cell : split(get(key), ',')) out.push_back(static_cast<int>(parse_int(cell)));
  } catch (const InputError& e) {
    throw InputError("config key '" + key + "': " + e.what());
  }
  return out;
}

std::filesystem::path Config::get_path(const std::string& key) const {
  std::filesystem::path p = get(key);
  if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
  return p;
}

// ---- csv ----

CsvTable read_csv(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  const auto lines = lines_of(text);
  CsvTable table;
  std::size_t i = 0;
  while (i < lines.size() && lines[i].empty()) ++i;
  if (i == lines.size()) throw InputError(path.string() + ": empty file");
  for (auto cell : split(lines[i], ',')) table.header.emplace_back(cell);
  for (++i; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto cells = split(lines[i], ',');
    if (cells.size() != table.header.size()) {
      throw InputError(path.string() + " line " + std::to_string(i + 1) + ": expected " +
                       std::to_string(table.header.size()) + " columns, found " + std::to_string(cells.size()));
    }
    table.rows.emplace_back(cells.begin(), cells.end());
  }
  return table;
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  auto append_row = [&out](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += row[c];
    }
    out += '\n';
  };
  append_row(table.header);
  for (const auto& row : table.rows) append_row(row);
  return out;
}

// ---- data ingestion ----

Dataset load_observations(const std::filesystem::path& path, const Domain& domain, ObservationCounts* counts) {
  const CsvTable table = read_csv(path);
  const std::size_t dim = static_cast<std::size_t>(domain.ambient_dim());
  const std::string what = path.string();
  if (table.header.empty() || table.header[0] != "subject_id") throw InputError(what + " header: expected 'subject_id' first");
  expect_columns(table.header, "coord_", 1, dim, what);
  if (table.header.size() < dim + 2) throw InputError(what + " header: no response columns");
  const std::size_t outputs = table.header.size() - dim - 1;
  expect_columns(table.header, "y_", dim + 1, outputs, what);
  if (table.rows.empty()) throw InputError(what + ": no data rows");

  Dataset data;
  data.domain = domain;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<Eigen::VectorXd>> responses;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = "row " + std::to_string(r + 1) + ": ";
    try {
      if (row[0].empty()) throw InputError("empty subject_id");
      std::array<double, 3> coords{};
      for (std::size_t c = 0; c < dim; ++c) coords[c] = parse_double(row[1 + c]);
      const Point u = Point::from_span(coords.data(), static_cast<int>(dim));
      validate_point(domain, u);
      Eigen::VectorXd y(static_cast<Eigen::Index>(outputs));
      for (std::size_t l = 0; l < outputs; ++l) y[static_cast<Eigen::Index>(l)] = parse_double(row[1 + dim + l]);
      if (!y.allFinite()) throw InputError("non-finite response");
      auto [it, inserted] = index.try_emplace(row[0], data.subjects.size());
      if (inserted) {
        Subject s;
        s.id = row[0];
        data.subjects.push_back(std::move(s));
        responses.emplace_back();
      }
      data.subjects[it->second].locations.push_back(u);
      responses[it->second].push_back(std::move(y));
    } catch (const std::exception& e) {
      throw InputError(where + e.what());
    }
  }
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    auto& s = data.subjects[i];
    s.responses.resize(static_cast<Eigen::Index>(responses[i].size()), static_cast<Eigen::Index>(outputs));
    for (std::size_t j = 0; j < responses[i].size(); ++j) s.responses.row(static_cast<Eigen::Index>(j)) = responses[i][j];
  }
  if (counts) {
    counts->subjects = static_cast<int>(data.subjects.size());
    counts->observations = static_cast<int>(table.rows.size());
    counts->outputs = static_cast<int>(outputs);
  }
  return data;
}

std::vector<std::pair<std::string, Eigen::VectorXd>> read_covariate_rows(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const std::string what = path.string();
  if (table.header.empty() || table.header[0] != "subject_id") throw InputError(what + " header: expected 'subject_id' first");
  if (table.header.size() < 2) throw InputError(what + " header: no covariate columns");
  const std::size_t p = table.header.size() - 1;
  expect_columns(table.header, "x_", 1, p, what);
  if (table.rows.empty()) throw InputError(what + ": no data rows");

  std::vector<std::pair<std::string, Eigen::VectorXd>> out;
  std::set<std::string> seen;
  std::vector<std::string> duplicates;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    Eigen::VectorXd x(static_cast<Eigen::Index>(p));
    try {
      if (row[0].empty()) throw InputError("empty subject_id");
      for (std::size_t c = 0; c < p; ++c) x[static_cast<Eigen::Index>(c)] = parse_double(row[1 + c]);
      if (!x.allFinite()) throw InputError("non-finite covariate");
    } catch (const std::exception& e) {
      throw InputError("row " + std::to_string(r + 1) + ": " + e.what());
    }
    if (!seen.insert(row[0]).second) duplicates.push_back(row[0]);
    out.emplace_back(row[0], std::move(x));
  }
  if (!duplicates.empty()) {
    std::string ids;
    for (const auto& id : duplicates) ids += (ids.empty() ? "" : ", ") + id;
    throw InputError(what + ": duplicate subject_id " + ids);
  }
  return out;
}

void load_covariates(const std::filesystem::path& path, Dataset& data) {
  const auto rows = read_covariate_rows(path);
  std::unordered_map<std::string, const Eigen::VectorXd*> by_id;
  for (const auto& [id, x] : rows) by_id[id] = &x;

  std::string missing;
  std::set<std::string> used;
  for (const auto& s : data.subjects) {
    if (by_id.count(s.id) == 0) missing += (missing.empty() ? "" : ", ") + s.id;
    used.insert(s.id);
  }
  std::string extra;
  for (const auto& [id, x] : rows) {
    if (used.count(id) == 0) extra += (extra.empty() ? "" : ", ") + id;
  }
  if (!missing.empty()) throw InputError("covariates missing for subject " + missing);
  if (!extra.empty()) throw InputError("covariates for unmatched subject " + extra);
  for (auto& s : data.subjects) s.covariates = *by_id.at(s.id);
  data.validate();
}

// ---- model files ----

namespace {

class ModelReader {
 public:
  explicit ModelReader(std::string_view text) : lines_(lines_of(text)) {}

  std::vector<std::string_view> next(const std::string& section) {
    while (pos_ < lines_.size() && lines_[pos_].empty()) ++pos_;
    if (pos_ == lines_.size()) throw FormatError("section [" + section + "]: truncated file");
    return split_ws(lines_[pos_++]);
  }

  void open(const std::string& section) {
    const auto tokens = next(section);
    if (tokens.size() != 1 || tokens[0] != "[" + section + "]") {
      throw FormatError("section [" + section + "]: missing header");
    }
  }

  std::string_view value(const std::string& section, std::string_view key) {
    const auto tokens = next(section);
    if (tokens.size() != 2 || tokens[0] != key) {
      throw FormatError("section [" + section + "]: expected '" + std::string(key) + " <value>'");
    }
    return tokens[1];
  }

  Eigen::VectorXd row(const std::string& section, Eigen::Index count) {
    const auto tokens = next(section);
    if (static_cast<Eigen::Index>(tokens.size()) != count) {
      throw FormatError("section [" + section + "]: expected " + std::to_string(count) + " values");
    }
    Eigen::VectorXd out(count);
    for (Eigen::Index i = 0; i < count; ++i) out[i] = number(section, tokens[static_cast<std::size_t>(i)]);
    return out;
  }

  static double number(const std::string& section, std::string_view token) {
    try {
      return parse_double(token);
    } catch (const InputError& e) {
      throw FormatError("section [" + section + "]: " + e.what());
    }
  }

  static int count(const std::string& section, std::string_view token, int lo = 1) {
    try {
      const long long v = parse_int(token);
      if (v < lo || v > 100000000) throw InputError("count out of range");
      return static_cast<int>(v);
    } catch (const InputError& e) {
      throw FormatError("section [" + section + "]: " + e.what());
    }
  }

 private:
  std::vector<std::string_view> lines_;
  std::size_t pos_ = 0;
};

void append_row(std::string& out, const Eigen::Ref<const Eigen::VectorXd>& values) {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    out += format_double(values[i]);
  }
  out += '\n';
}

}  // namespace

std::string serialize_model(const FittedModel& model) {
  const MercerBasis& basis = model.basis();
  if (!basis.spec()) throw InputError("only models built from a named kernel can be saved");
  const KernelSpec& spec = *basis.spec();
  const Quadrature& quad = basis.quadrature();
  std::string out;
  out += std::string(kModelFormatTag) + "\n";
  out += "version " + std::to_string(kModelFormatVersion) + "\n";
  out += "[kernel]\n";
  out += "family " + std::string(family_name(spec.family)) + "\n";
  out += "domain " + std::string(spec.domain.name()) + "\n";
  out += "smoothness " + format_double(spec.smoothness) + "\n";
  out += "range " + format_double(spec.range) + "\n";
  out += "requested_k0 " + std::to_string(basis.requested_k0()) + "\n";
  out += "[quadrature]\n";
  out += "size " + std::to_string(quad.size()) + "\n";
  const int dim = quad.domain.ambient_dim();
  for (int i = 0; i < quad.size(); ++i) {
    Eigen::VectorXd row(dim + 1);
    for (int c = 0; c < dim; ++c) row[c] = quad.nodes[static_cast<std::size_t>(i)][c];
    row[dim] = quad.weights[i];
    append_row(out, row);
  }
  out += "[eigenvalues]\n";
  out += "count " + std::to_string(basis.k0()) + "\n";
  append_row(out, basis.eigenvalues());
  out += "[eigenvectors]\n";
  if (basis.analytic()) {
    out += "source analytic\n";
  } else {
    out += "source nodes\n";
    const Eigen::MatrixXd& v = basis.node_eigenvectors();
    for (Eigen::Index i = 0; i < v.rows(); ++i) append_row(out, v.row(i).transpose());
  }
  out += "[lambda]\n";
  out += "count " + std::to_string(model.predictors()) + "\n";
  append_row(out, model.lambda());
  out += "[coefficients]\n";
  out += "outputs " + std::to_string(model.outputs()) + "\n";
  for (const auto& b : model.coefficients()) {
    for (Eigen::Index p = 0; p < b.rows(); ++p) append_row(out, b.row(p).transpose());
  }
  out += "[diagnostics]\n";
  const FitDiagnostics& d = model.diagnostics();
  out += "objective " + format_double(d.objective) + "\n";
  out += "gcv " + format_double(d.gcv) + "\n";
  out += "dof " + format_double(d.dof) + "\n";
  out += "rank_deficient " + std::string(d.rank_deficient ? "1" : "0") + "\n";
  out += "[end]\n";
  return out;
}

FittedModel deserialize_model(std::string_view text) {
  ModelReader in(text);
  {
    const auto tag = in.next("header");
    if (tag.size() != 1 || tag[0] != kModelFormatTag) throw FormatError("section [header]: not a model file");
    const auto version = in.next("header");
    if (version.size() != 2 || version[0] != "version") throw FormatError("section [header]: missing version");
    const int v = ModelReader::count("header", version[1]);
    if (v != kModelFormatVersion) {
      throw FormatError("section [header]: version " + std::to_string(v) + " is not supported (expected " +
                        std::to_string(kModelFormatVersion) + ")");
    }
  }

  std::string section = "kernel";
  in.open(section);
  KernelSpec spec;
  int requested_k0 = 0;
  try {
    spec.family = parse_family(in.value(section, "family"));
    spec.domain = Domain::parse(in.value(section, "domain"));
    spec.smoothness = ModelReader::number(section, in.value(section, "smoothness"));
    spec.range = ModelReader::number(section, in.value(section, "range"));
    requested_k0 = ModelReader::count(section, in.value(section, "requested_k0"));
    spec.validate();
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError("section [kernel]: " + std::string(e.what()));
  }

  section = "quadrature";
  in.open(section);
  Quadrature quad;
  quad.domain = spec.domain;
  const int size = ModelReader::count(section, in.value(section, "size"));
  const int dim = spec.domain.ambient_dim();
  quad.weights.resize(size);
  quad.nodes.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) {
    const Eigen::VectorXd row = in.row(section, dim + 1);
    quad.nodes.push_back(Point::from_span(row.data(), dim));
    quad.weights[i] = row[dim];
  }

  section = "eigenvalues";
  in.open(section);
  const int k0 = ModelReader::count(section, in.value(section, "count"));
  const Eigen::VectorXd tau = in.row(section, k0);
  if (!(tau.array() > 0.0).all() || !tau.allFinite()) throw FormatError("section [eigenvalues]: values must be positive");

  section = "eigenvectors";
  in.open(section);
  const std::string_view source = in.value(section, "source");
  std::shared_ptr<const MercerBasis> basis;
  try {
    if (source == "analytic") {
      if (spec.family != KernelFamily::kSobolevSpectral) throw FormatError("section [eigenvectors]: analytic source needs a spectral kernel");
      auto spectrum = std::make_shared<const ManifoldSpectrum>(analytic_laplacian_spectrum(spec.domain, k0));
      basis = std::make_shared<const MercerBasis>(std::move(quad), tau, std::move(spectrum), spec);
    } else if (source == "nodes") {
      Eigen::MatrixXd v(size, k0);
      for (int i = 0; i < size; ++i) v.row(i) = in.row(section, k0).transpose();
      basis = std::make_shared<const MercerBasis>(std::move(quad), tau, std::move(v), make_kernel_function(spec), spec,
                                                  requested_k0);
    } else {
      throw FormatError("section [eigenvectors]: unknown source '" + std::string(source) + "'");
    }
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError("section [eigenvectors]: " + std::string(e.what()));
  }

  section = "lambda";
  in.open(section);
  const int p = ModelReader::count(section, in.value(section, "count"));
  const Eigen::VectorXd lambda = in.row(section, p);
  if (!(lambda.array() > 0.0).all()) throw FormatError("section [lambda]: penalties must be positive");

  section = "coefficients";
  in.open(section);
  const int outputs = ModelReader::count(section, in.value(section, "outputs"));
  std::vector<Eigen::MatrixXd> coefficients(static_cast<std::size_t>(outputs), Eigen::MatrixXd(p, k0));
  for (auto& b : coefficients) {
    for (int r = 0; r < p; ++r) b.row(r) = in.row(section, k0).transpose();
  }

  section = "diagnostics";
  in.open(section);
  FitDiagnostics diag;
  diag.objective = ModelReader::number(section, in.value(section, "objective"));
  diag.gcv = ModelReader::number(section, in.value(section, "gcv"));
  diag.dof = ModelReader::number(section, in.value(section, "dof"));
  diag.rank_deficient = ModelReader::count(section, in.value(section, "rank_deficient"), 0) != 0;
  in.open("end");
  return FittedModel(std::move(basis), std::move(coefficients), lambda, diag);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw InputError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw InputError("cannot rename onto " + path.string());
  }
}

void save_model(const FittedModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(model));
}

FittedModel load_model(const std::filesystem::path& path) { return deserialize_model(read_text(path)); }

}  // namespace fosr
