#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "upiv/datagen.hpp"
#include "upiv/estimators.hpp"

namespace upiv {

/**
 * Flat `key = value` configuration. Lines starting with '#' and trailing
 * '# ...' comments are ignored. Keys are case-sensitive; a repeated key
 * overrides the earlier value.
 */
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;

  /// Throws ConfigError naming the first key not in `known`.
  void require_known(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  std::string to_string() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Generator spec from keys `kind setting m d s_star k r r_tilde beta_rule beta gamma_x gamma_y
/// sigma_u sigma_x sigma_eps pi_scale normalize_factor scale_log_sd clip_low clip_high seed`; absent keys keep the
/// preset values of `setting`.
GeneratorSpec spec_from_config(const KeyValueConfig& cfg);
KeyValueConfig spec_to_config(const GeneratorSpec& spec);

/**
 * Estimator config from keys `ridge optimal_weight l1 lambda_mode lambda path_points path_ratio
 * post_refit folds redraws denominator split support_rule beta_min ci_level`, each optionally
 * prefixed (e.g. "est.ridge").
 */
EstimatorConfig estimator_config_from(const KeyValueConfig& cfg, const std::string& prefix = "");

std::vector<std::string> spec_config_keys();
std::vector<std::string> estimator_config_keys(const std::string& prefix = "");

}  // namespace upiv
