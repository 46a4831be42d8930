#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fosr/dataset.hpp"
#include "fosr/solver.hpp"

namespace fosr {

/// Shortest decimal that parses back to the same double.
std::string format_double(double value);
/// Strict parse of a whole cell; throws InputError quoting the text.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

/// `key = value` lines; `#` starts a comment. Keys are unique.
class Config {
 public:
  static Config parse(std::string_view text, const std::string& origin = "config");
  static Config load(const std::filesystem::path& path);

  /// `key=value`, replacing any existing value.
  void apply_override(std::string_view assignment);
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }
  [[nodiscard]] std::string get(const std::string& key) const;
  [[nodiscard]] std::string get_or(const std::string& key, const std::string& fallback) const;
  [[nodiscard]] double get_double(const std::string& key) const;
  [[nodiscard]] double get_double_or(const std::string& key, double fallback) const;
  [[nodiscard]] int get_int(const std::string& key) const;
  [[nodiscard]] int get_int_or(const std::string& key, int fallback) const;
  [[nodiscard]] bool get_bool_or(const std::string& key, bool fallback) const;
  /// Comma-separated list, or `lo:hi:count` for a log-spaced grid.
  [[nodiscard]] std::vector<double> get_list(const std::string& key) const;
  [[nodiscard]] std::vector<int> get_int_list(const std::string& key) const;
  /// Relative paths resolve against the directory of the config file.
  [[nodiscard]] std::filesystem::path get_path(const std::string& key) const;

  void set_base_dir(std::filesystem::path dir) { base_dir_ = std::move(dir); }
  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::filesystem::path base_dir_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Comma-separated cells without quoting. Errors name the 1-based file line.
CsvTable read_csv(const std::filesystem::path& path);
std::string to_csv(const CsvTable& table);

struct ObservationCounts {
  int subjects = 0;
  int observations = 0;
  int outputs = 0;
};

/// Header `subject_id,coord_1..coord_D,y_1..y_L` with D the ambient dimension.
/// Subjects keep first-appearance order; covariates are left empty.
Dataset load_observations(const std::filesystem::path& path, const Domain& domain,
                          ObservationCounts* counts = nullptr);

/// Header `subject_id,x_1..x_P`, one row per subject of `data`.
void load_covariates(const std::filesystem::path& path, Dataset& data);

/// Covariate rows keyed by subject id in file order.
std::vector<std::pair<std::string, Eigen::VectorXd>> read_covariate_rows(const std::filesystem::path& path);

inline constexpr std::string_view kModelFormatTag = "fosr-model";
inline constexpr int kModelFormatVersion = 1;

std::string serialize_model(const FittedModel& model);
FittedModel deserialize_model(std::string_view text);
void save_model(const FittedModel& model, const std::filesystem::path& path);
FittedModel load_model(const std::filesystem::path& path);

/// Writes through a temporary file in the same directory, then renames.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace fosr
