#include "upiv/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace upiv {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("invalid value for '" + key + "': '" + text + "'");
  return value;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<double>(key, it->second);
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<int>(key, it->second);
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<std::uint64_t>(key, it->second);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("invalid boolean for '" + key + "': '" + v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(it->second)) out.push_back(parse_number<double>(key, item));
  return out;
}

std::vector<int> KeyValueConfig::get_ints(const std::string& key, const std::vector<int>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<int> out;
  for (const auto& item : split_list(it->second)) out.push_back(parse_number<int>(key, item));
  return out;
}

std::vector<std::string> KeyValueConfig::get_strings(const std::string& key,
                                                     const std::vector<std::string>& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : split_list(it->second);
}

void KeyValueConfig::require_known(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");
  }
}

std::string KeyValueConfig::to_string() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

std::vector<std::string> spec_config_keys() {
  return {"kind",     "setting", "m",       "d",         "s_star",    "k",         "r",
          "r_tilde",  "beta_rule", "beta",  "gamma_x",   "gamma_y",   "sigma_u",   "sigma_x",
          "sigma_eps", "pi_scale", "normalize_factor", "scale_log_sd", "clip_low", "clip_high", "seed"};
}

GeneratorSpec spec_from_config(const KeyValueConfig& cfg) {
  const Setting setting = setting_from_string(cfg.get_string("setting", "S1"));
  const GeneratorKind kind = generator_kind_from_string(cfg.get_string("kind", "categorical"));
  GeneratorSpec spec = GeneratorSpec::preset(setting, kind);
  spec.m = cfg.get_int("m", spec.m);
  spec.d = cfg.get_int("d", spec.d);
  spec.s_star = cfg.get_int("s_star", spec.s_star);
  spec.k = cfg.get_int("k", spec.k);
  spec.r = cfg.get_int("r", spec.r);
  spec.r_tilde = cfg.get_int("r_tilde", spec.r);
  if (cfg.has("beta")) {
    const auto beta = cfg.get_doubles("beta", {});
    spec.beta_fixed = Eigen::Map<const Vector>(beta.data(), static_cast<Index>(beta.size()));
    spec.beta_rule = BetaRule::Fixed;
  }
  if (cfg.has("beta_rule")) spec.beta_rule = beta_rule_from_string(cfg.get_string("beta_rule", ""));
  spec.gamma_x = cfg.get_double("gamma_x", spec.gamma_x);
  spec.gamma_y = cfg.get_double("gamma_y", spec.gamma_y);
  spec.sigma_u = cfg.get_double("sigma_u", spec.sigma_u);
  spec.sigma_x = cfg.get_double("sigma_x", spec.sigma_x);
  spec.sigma_eps = cfg.get_double("sigma_eps", spec.sigma_eps);
  spec.pi_scale = cfg.get_double("pi_scale", spec.pi_scale);
  spec.normalize_factor = cfg.get_bool("normalize_factor", spec.normalize_factor);
  spec.scale_log_sd = cfg.get_double("scale_log_sd", spec.scale_log_sd);
  spec.clip_low = cfg.get_double("clip_low", spec.clip_low);
  spec.clip_high = cfg.get_double("clip_high", spec.clip_high);
  spec.seed = cfg.get_u64("seed", spec.seed);
  spec.validate();
  return spec;
}

KeyValueConfig spec_to_config(const GeneratorSpec& spec) {
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  KeyValueConfig cfg;
  cfg.set("kind", to_string(spec.kind));
  cfg.set("setting", to_string(spec.setting));
  cfg.set("m", std::to_string(spec.m));
  cfg.set("d", std::to_string(spec.d));
  cfg.set("s_star", std::to_string(spec.s_star));
  cfg.set("k", std::to_string(spec.k));
  cfg.set("r", std::to_string(spec.r));
  cfg.set("r_tilde", std::to_string(spec.r_tilde));
  cfg.set("beta_rule", to_string(spec.beta_rule));
  if (spec.beta_rule == BetaRule::Fixed) {
    std::string list;
    for (Index j = 0; j < spec.beta_fixed.size(); ++j) list += (j ? ", " : "") + num(spec.beta_fixed(j));
    cfg.set("beta", list);
  }
  cfg.set("gamma_x", num(spec.gamma_x));
  cfg.set("gamma_y", num(spec.gamma_y));
  cfg.set("sigma_u", num(spec.sigma_u));
  cfg.set("sigma_x", num(spec.sigma_x));
  cfg.set("sigma_eps", num(spec.sigma_eps));
  cfg.set("pi_scale", num(spec.pi_scale));
  cfg.set("normalize_factor", spec.normalize_factor ? "true" : "false");
  cfg.set("scale_log_sd", num(spec.scale_log_sd));
  cfg.set("clip_low", num(spec.clip_low));
  cfg.set("clip_high", num(spec.clip_high));
  cfg.set("seed", std::to_string(spec.seed));
  return cfg;
}

std::vector<std::string> estimator_config_keys(const std::string& prefix) {
  std::vector<std::string> keys = {"ridge",    "optimal_weight", "l1",        "lambda_mode", "lambda",
                                   "path_points", "path_ratio",  "ebic_gamma", "prune", "post_refit", "folds",      "redraws",
                                   "denominator", "split",       "support_rule", "beta_min", "ci_level"};
  for (auto& k : keys) k = prefix + k;
  return keys;
}

EstimatorConfig estimator_config_from(const KeyValueConfig& cfg, const std::string& prefix) {
  auto key = [&prefix](const char* name) { return prefix + name; };
  EstimatorConfig ec;
  ec.ridge = cfg.get_double(key("ridge"), ec.ridge);
  ec.optimal_weight = cfg.get_bool(key("optimal_weight"), ec.optimal_weight);
  ec.l1 = cfg.get_bool(key("l1"), ec.l1);
  const std::string mode = cfg.get_string(key("lambda_mode"), cfg.has(key("lambda")) ? "fixed" : "path");
  if (mode == "fixed") {
    ec.lambda.mode = LambdaRule::Mode::Fixed;
  } else if (mode == "scaled") {
    ec.lambda.mode = LambdaRule::Mode::Scaled;
  } else if (mode == "path") {
    ec.lambda.mode = LambdaRule::Mode::Path;
  } else {
    throw ConfigError("unknown lambda_mode '" + mode + "'");
  }
  ec.lambda.value = cfg.get_double(key("lambda"), ec.lambda.value);
  ec.lambda.path_points = cfg.get_int(key("path_points"), ec.lambda.path_points);
  ec.lambda.path_ratio = cfg.get_double(key("path_ratio"), ec.lambda.path_ratio);
  ec.lambda.ebic_gamma = cfg.get_double(key("ebic_gamma"), ec.lambda.ebic_gamma);
  ec.lambda.prune = cfg.get_bool(key("prune"), ec.lambda.prune);
  ec.post_refit = cfg.get_bool(key("post_refit"), ec.post_refit);
  ec.folds = cfg.get_int(key("folds"), ec.folds);
  ec.redraws = cfg.get_int(key("redraws"), ec.redraws);
  const std::string denom = cfg.get_string(key("denominator"), "analytic");
  if (denom == "analytic") {
    ec.denominator = DenominatorKind::Analytic;
  } else if (denom == "montecarlo" || denom == "mc") {
    ec.denominator = DenominatorKind::MonteCarlo;
  } else {
    throw ConfigError("unknown denominator '" + denom + "'");
  }
  if (cfg.has(key("split"))) {
    const std::string split = cfg.get_string(key("split"), "");
    if (split == "uniform") {
      ec.split_scheme = SplitScheme::Uniform;
    } else if (split == "stratified") {
      ec.split_scheme = SplitScheme::Stratified;
    } else {
      throw ConfigError("unknown split '" + split + "'");
    }
  }
  const std::string rule = cfg.get_string(key("support_rule"), "nonzero");
  if (rule == "nonzero") {
    ec.support_rule = SupportRule::NonzeroPattern;
  } else if (rule == "beta_min") {
    ec.support_rule = SupportRule::BetaMinHalf;
  } else {
    throw ConfigError("unknown support_rule '" + rule + "'");
  }
  ec.beta_min = cfg.get_double(key("beta_min"), ec.beta_min);
  if (cfg.has(key("ci_level"))) ec.ci_level = cfg.get_double(key("ci_level"), 0.95);
  ec.validate();
  return ec;
}

}  // namespace upiv
