#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "upiv/config.hpp"
#include "upiv/datagen.hpp"
#include "upiv/estimators.hpp"
#include "upiv/harness.hpp"
#include "upiv/identifiability.hpp"
#include "upiv/io.hpp"

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 1;
  std::string config;
};

// Writes to --out when given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw upiv::Error("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

upiv::KeyValueConfig load_config(const std::string& path) {
  return path.empty() ? upiv::KeyValueConfig{} : upiv::KeyValueConfig::load(path);
}

int cmd_generate(const Globals& g, const std::string& truth_path) {
  upiv::GeneratorSpec spec = upiv::spec_from_config(load_config(g.config));
  if (g.seed) spec.seed = *g.seed;
  const upiv::Generated gen = upiv::generate(spec);
  Sink sink(g.out);
  upiv::write_dataset_csv(sink.stream(), gen.data);
  if (!truth_path.empty()) {
    upiv::GeneratorSpec fixed = spec;
    fixed.beta_rule = upiv::BetaRule::Fixed;
    fixed.beta_fixed = gen.truth.beta_star;
    std::ofstream t(truth_path);
    if (!t) throw upiv::Error("cannot write " + truth_path);
    t << upiv::spec_to_config(fixed).to_string();
  }
  return 0;
}

int cmd_estimate(const Globals& g, const std::string& data_path, const std::string& estimator,
                 std::optional<double> ci_level) {
  const upiv::UnpairedDataset data = upiv::read_dataset_csv(data_path);
  upiv::NamedEstimator est = upiv::named_estimator(estimator);
  if (!g.config.empty()) {
    upiv::KeyValueConfig cfg = upiv::KeyValueConfig::load(g.config);
    cfg.require_known(upiv::estimator_config_keys());
    upiv::KeyValueConfig merged;
    merged.set("optimal_weight", est.cfg.optimal_weight ? "true" : "false");
    merged.set("l1", est.cfg.l1 ? "true" : "false");
    merged.set("post_refit", est.cfg.post_refit ? "true" : "false");
    merged.set("denominator", est.cfg.denominator == upiv::DenominatorKind::Analytic ? "analytic" : "montecarlo");
    for (const auto& [k, v] : cfg.values()) merged.set(k, v);
    est.cfg = upiv::estimator_config_from(merged);
  }
  if (ci_level) {
    if (est.kind != upiv::EstimatorKind::UpGmm) throw upiv::ConfigError("confidence intervals require up_gmm");
    est.cfg.ci_level = *ci_level;
    est.cfg.validate();
  }
  upiv::Rng rng = upiv::make_rng(g.seed.value_or(0));
  const upiv::Estimate result = upiv::run_estimator(est, data, rng);
  Sink sink(g.out);
  sink.stream() << upiv::estimate_to_json(result) << "\n";
  return 0;
}

int cmd_identify(const Globals& g, const std::string& matrix_path, int s_star) {
  upiv::Matrix c;
  if (!matrix_path.empty()) {
    c = upiv::read_matrix_csv(matrix_path);
  } else {
    upiv::GeneratorSpec spec = upiv::spec_from_config(load_config(g.config));
    if (g.seed) spec.seed = *g.seed;
    const upiv::Generated gen = upiv::generate(spec);
    const upiv::Matrix& fs = gen.truth.first_stage;
    // Population Cov(I, X): (1/m)(mu_e - mu_bar) for one-hot environments, Pi / m for continuous.
    c = spec.kind == upiv::GeneratorKind::Categorical ? upiv::Matrix((fs.rowwise() - fs.colwise().mean()) / spec.m)
                                                      : upiv::Matrix(fs / spec.m);
    if (s_star < 0) s_star = spec.s_star;
  }
  if (s_star < 0) s_star = 1;
  Sink sink(g.out);
  std::ostream& os = sink.stream();
  os << "m: " << c.rows() << "\n";
  os << "d: " << c.cols() << "\n";
  os << "dense-identifiable: " << (upiv::dense_identifiable(c) ? "true" : "false") << "\n";
  if (c.cols() <= 20) {
    os << "sparse-identifiable: " << (upiv::restricted_nullspace_holds(c, s_star) ? "true" : "false")
       << " (s*=" << s_star << ")\n";
  } else {
    os << "sparse-identifiable: unknown (s*=" << s_star << ", d exceeds enumeration budget)\n";
  }
  return 0;
}

int cmd_benchmark(const Globals& g, const std::string& summary_path, bool timing, std::optional<int> reps) {
  upiv::ExperimentPlan plan = upiv::plan_from_config(load_config(g.config));
  if (g.seed) plan.master_seed = *g.seed;
  plan.threads = g.threads;
  if (timing) plan.timing = true;
  if (reps) plan.replications = *reps;
  const auto rows = upiv::run_plan(plan);
  Sink sink(g.out);
  upiv::write_results_csv(sink.stream(), rows, plan.timing);
  const auto summary = upiv::summarize(rows);
  if (!summary_path.empty()) {
    Sink s(summary_path);
    upiv::write_summary_csv(s.stream(), summary);
  } else {
    upiv::write_summary_csv(std::cerr, summary);
  }
  return 0;
}

int cmd_agree(const Globals& g, std::optional<int> reps, double margin) {
  upiv::KeyValueConfig cfg = load_config(g.config);
  if (!cfg.has("preset")) cfg.set("preset", "agreement");
  upiv::ExperimentPlan plan = upiv::plan_from_config(cfg);
  if (g.seed) plan.master_seed = *g.seed;
  plan.threads = g.threads;
  if (reps) plan.replications = *reps;
  if (plan.estimators.size() != 2) throw upiv::ConfigError("agree needs exactly two estimators");
  const auto rows = upiv::run_plan(plan);
  const auto gaps = upiv::relative_gaps(rows, plan.estimators[1].name, plan.estimators[0].name);
  const double worst = upiv::trimmed_max(gaps, 0.001);
  Sink sink(g.out);
  std::ostream& os = sink.stream();
  os << "compared: " << plan.estimators[1].name << " vs " << plan.estimators[0].name << "\n";
  os << "coefficients: " << gaps.size() << "\n";
  os << "max relative gap (0.1% largest dropped): " << worst << "\n";
  os << "within " << margin * 100.0 << "%: " << (worst <= margin ? "yes" : "no") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unpaired two-sample instrumental-variable estimation"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Master random seed");
  app.add_option("--out", g.out, "Output file (default: stdout)");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--config", g.config, "Configuration file (key = value)");

  auto* generate = app.add_subcommand("generate", "Generate a synthetic dataset from a generator spec");
  std::string truth_path;
  generate->add_option("--truth", truth_path, "Write the realized spec with beta* to this file");

  auto* estimate = app.add_subcommand("estimate", "Fit an estimator to a dataset and print JSON");
  std::string data_path;
  std::string estimator = "up_gmm";
  double ci_value = 0.95;
  estimate->add_option("--data", data_path, "Dataset CSV")->required();
  estimate->add_option("--estimator", estimator,
                       "ts_iv, ts_2sls, naive_ols, up_gmm, up_gmm_l1, up_gmm_hd, up_gmm_hd_l1, up_gmm_hd_mc");
  auto* ci_opt = estimate->add_option("--ci", ci_value, "Wald interval level (up_gmm only)");

  auto* identify = app.add_subcommand("identify", "Identifiability report for a first-stage matrix or spec");
  std::string matrix_path;
  int s_star = -1;
  identify->add_option("--matrix", matrix_path, "First-stage matrix CSV (m rows, d columns)");
  identify->add_option("--s-star", s_star, "Sparsity level");

  auto* benchmark = app.add_subcommand("benchmark", "Run an experiment plan and emit CSV rows");
  std::string summary_path;
  bool timing = false;
  int reps_value = 0;
  benchmark->add_option("--summary", summary_path, "Write the aggregate table here (default: stderr)");
  benchmark->add_flag("--timing", timing, "Record wall-clock time per row");
  auto* bench_reps = benchmark->add_option("--replications", reps_value, "Override replications");

  auto* agree = app.add_subcommand("agree", "Monte-Carlo vs analytic denominator agreement report");
  int agree_reps = 0;
  double margin = 0.025;
  auto* agree_reps_opt = agree->add_option("--replications", agree_reps, "Override replications");
  agree->add_option("--margin", margin, "Relative agreement margin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    if (*generate) return cmd_generate(g, truth_path);
    if (*estimate) return cmd_estimate(g, data_path, estimator, *ci_opt ? std::optional<double>(ci_value) : std::nullopt);
    if (*identify) return cmd_identify(g, matrix_path, s_star);
    if (*benchmark) return cmd_benchmark(g, summary_path, timing, *bench_reps ? std::optional<int>(reps_value) : std::nullopt);
    if (*agree) return cmd_agree(g, *agree_reps_opt ? std::optional<int>(agree_reps) : std::nullopt, margin);
  } catch (const upiv::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
