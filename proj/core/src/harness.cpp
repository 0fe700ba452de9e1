#include "upiv/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

namespace upiv {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::TsIv: return "ts_iv";
    case EstimatorKind::Ts2sls: return "ts_2sls";
    case EstimatorKind::NaiveOls: return "naive_ols";
    case EstimatorKind::UpGmm: return "up_gmm";
    case EstimatorKind::UpGmmHd: return "up_gmm_hd";
  }
  return "ts_iv";
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
  if (name == "ts_iv") return EstimatorKind::TsIv;
  if (name == "ts_2sls") return EstimatorKind::Ts2sls;
  if (name == "naive_ols") return EstimatorKind::NaiveOls;
  if (name == "up_gmm") return EstimatorKind::UpGmm;
  if (name == "up_gmm_hd") return EstimatorKind::UpGmmHd;
  throw ConfigError("unknown estimator '" + name + "'");
}

Estimate run_estimator(const NamedEstimator& est, const UnpairedDataset& data, Rng& rng) {
  switch (est.kind) {
    case EstimatorKind::TsIv: return ts_iv(moment_system(data), est.cfg.ridge);
    case EstimatorKind::Ts2sls: return ts_2sls(data, est.cfg.ridge);
    case EstimatorKind::NaiveOls: return naive_ols(data, rng);
    case EstimatorKind::UpGmm: return up_gmm(data, est.cfg);
    case EstimatorKind::UpGmmHd: return up_gmm_hd(data, est.cfg, rng);
  }
  throw Error("unknown estimator kind");
}

std::string to_string(Preset preset) {
  switch (preset) {
    case Preset::Setting1: return "setting1";
    case Preset::Setting2: return "setting2";
    case Preset::Setting3: return "setting3";
    case Preset::TsIvBias: return "tsiv_bias";
    case Preset::Coverage: return "coverage";
    case Preset::Agreement: return "agreement";
    case Preset::Custom: return "custom";
  }
  return "custom";
}

Preset preset_from_string(const std::string& name) {
  for (Preset p : {Preset::Setting1, Preset::Setting2, Preset::Setting3, Preset::TsIvBias, Preset::Coverage,
                   Preset::Agreement, Preset::Custom}) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

void ExperimentPlan::validate() const {
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (sweep.empty()) throw ConfigError("sweep must be nonempty");
  if (estimators.empty()) throw ConfigError("at least one estimator is required");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  for (const auto& g : sweep) {
    if (g.m < 1 || g.r < 1 || g.r_tilde < 1) throw ConfigError("grid points need positive m, r, r_tilde");
  }
  for (const auto& e : estimators) e.cfg.validate();
  base.validate();
}

NamedEstimator named_estimator(const std::string& name) {
  NamedEstimator e;
  e.name = name;
  if (name == "ts_iv" || name == "ts_2sls" || name == "naive_ols") {
    e.kind = estimator_kind_from_string(name);
  } else if (name == "up_gmm") {
    e.kind = EstimatorKind::UpGmm;
    e.cfg.optimal_weight = true;
  } else if (name == "up_gmm_l1") {
    e.kind = EstimatorKind::UpGmm;
    e.cfg.optimal_weight = true;
    e.cfg.l1 = true;
    e.cfg.post_refit = true;
  } else if (name == "up_gmm_hd") {
    e.kind = EstimatorKind::UpGmmHd;
  } else if (name == "up_gmm_hd_mc") {
    e.kind = EstimatorKind::UpGmmHd;
    e.cfg.denominator = DenominatorKind::MonteCarlo;
  } else if (name == "up_gmm_hd_l1") {
    e.kind = EstimatorKind::UpGmmHd;
    e.cfg.l1 = true;
    e.cfg.post_refit = true;
  } else {
    throw ConfigError("unknown estimator '" + name + "'");
  }
  return e;
}

namespace {

std::vector<GridPoint> cross(const std::vector<int>& ms, const std::vector<int>& rs) {
  std::vector<GridPoint> out;
  for (int r : rs) {
    for (int m : ms) out.push_back({m, r, r});
  }
  return out;
}

std::vector<NamedEstimator> line_up(const std::vector<std::string>& names) {
  std::vector<NamedEstimator> out;
  for (const auto& n : names) out.push_back(named_estimator(n));
  return out;
}

}  // namespace

ExperimentPlan preset_plan(Preset preset) {
  ExperimentPlan plan;
  plan.preset = preset;
  switch (preset) {
    case Preset::Setting1:
      plan.base = GeneratorSpec::preset(Setting::S1);
      plan.base.m = 50;
      plan.base.d = 100;
      plan.base.s_star = 5;
      plan.sweep = cross({50}, {25, 50, 100, 200});
      plan.estimators = line_up({"ts_iv", "up_gmm_l1", "up_gmm_hd_l1"});
      break;
    case Preset::Setting2:
      plan.base = GeneratorSpec::preset(Setting::S2);
      plan.sweep = cross({200, 400, 800}, {2, 8, 32});
      plan.estimators = line_up({"ts_iv", "ts_2sls", "up_gmm", "up_gmm_hd"});
      break;
    case Preset::Setting3:
      plan.base = GeneratorSpec::preset(Setting::S3);
      plan.base.k = 30;
      plan.base.d = 50;
      plan.base.s_star = 5;
      plan.sweep = cross({10, 20, 40, 60, 100, 200, 400, 800, 1600}, {2, 4});
      plan.estimators = line_up({"ts_iv", "up_gmm_l1", "up_gmm_hd_l1"});
      break;
    case Preset::TsIvBias:
      plan.base = GeneratorSpec::preset(Setting::S2);
      plan.base.d = 1;
      plan.base.s_star = 1;
      plan.base.beta_rule = BetaRule::Fixed;
      plan.base.beta_fixed = Vector::Constant(1, 1.0);
      plan.sweep = cross({250, 500, 1000, 2000}, {4});
      plan.estimators = line_up({"ts_iv", "up_gmm_hd"});
      break;
    case Preset::Coverage: {
      plan.base = GeneratorSpec::preset(Setting::S2, GeneratorKind::Continuous);
      plan.base.m = 5;
      plan.sweep = {{5, 1000, 1000}};
      NamedEstimator e = named_estimator("up_gmm");
      e.cfg.ci_level = 0.95;
      plan.estimators = {e};
      plan.replications = 500;
      break;
    }
    case Preset::Agreement:
      plan.base = GeneratorSpec::preset(Setting::S2);
      plan.sweep = cross({200, 400, 800}, {2, 8, 32});
      plan.estimators = line_up({"up_gmm_hd", "up_gmm_hd_mc"});
      break;
    case Preset::Custom:
      plan.base = GeneratorSpec::preset(Setting::S1);
      plan.sweep = cross({plan.base.m}, {plan.base.r});
      plan.estimators = line_up({"ts_iv"});
      break;
  }
  return plan;
}

ExperimentPlan plan_from_config(const KeyValueConfig& cfg) {
  const Preset preset = preset_from_string(cfg.get_string("preset", "custom"));
  ExperimentPlan plan = preset_plan(preset);

  std::vector<std::string> known = {"preset", "replications", "seed", "threads", "timing", "grid_m", "grid_r",
                                    "estimators", "fix_beta"};
  for (const auto& k : spec_config_keys()) known.push_back("gen." + k);
  const auto names = cfg.get_strings("estimators", {});
  for (const auto& n : names) {
    for (const auto& k : estimator_config_keys(n + ".")) known.push_back(k);
  }
  cfg.require_known(known);

  KeyValueConfig gen;
  gen.set("setting", to_string(plan.base.setting));
  gen.set("kind", to_string(plan.base.kind));
  const KeyValueConfig preset_spec = spec_to_config(plan.base);
  for (const auto& [k, v] : preset_spec.values()) gen.set(k, v);
  for (const auto& [k, v] : cfg.values()) {
    if (k.rfind("gen.", 0) == 0) gen.set(k.substr(4), v);
  }
  if (cfg.has("gen.setting") && !cfg.has("gen.beta_rule") && !cfg.has("gen.beta")) {
    gen.set("beta_rule", to_string(GeneratorSpec::preset(setting_from_string(gen.get_string("setting", "S1"))).beta_rule));
  }
  plan.base = spec_from_config(gen);

  plan.replications = cfg.get_int("replications", plan.replications);
  plan.master_seed = cfg.get_u64("seed", plan.master_seed);
  plan.threads = cfg.get_int("threads", plan.threads);
  plan.timing = cfg.get_bool("timing", plan.timing);
  plan.fix_beta_across_sweep = cfg.get_bool("fix_beta", plan.fix_beta_across_sweep);
  if (cfg.has("grid_m") || cfg.has("grid_r")) {
    std::vector<int> ms, rs;
    for (const auto& g : plan.sweep) {
      if (std::find(ms.begin(), ms.end(), g.m) == ms.end()) ms.push_back(g.m);
      if (std::find(rs.begin(), rs.end(), g.r) == rs.end()) rs.push_back(g.r);
    }
    plan.sweep = cross(cfg.get_ints("grid_m", ms), cfg.get_ints("grid_r", rs));
  }
  if (!names.empty()) {
    plan.estimators.clear();
    for (const auto& n : names) {
      NamedEstimator e = named_estimator(n);
      bool any = false;
      for (const auto& k : estimator_config_keys(n + ".")) any = any || cfg.has(k);
      if (any) {
        const EstimatorConfig base = e.cfg;
        KeyValueConfig merged;
        merged.set("ridge", std::to_string(base.ridge));
        merged.set("optimal_weight", base.optimal_weight ? "true" : "false");
        merged.set("l1", base.l1 ? "true" : "false");
        merged.set("post_refit", base.post_refit ? "true" : "false");
        merged.set("denominator", base.denominator == DenominatorKind::Analytic ? "analytic" : "montecarlo");
        for (const auto& k : estimator_config_keys()) {
          if (cfg.has(n + "." + k)) merged.set(k, cfg.get_string(n + "." + k, ""));
        }
        e.cfg = estimator_config_from(merged);
      }
      plan.estimators.push_back(e);
    }
  }
  plan.validate();
  return plan;
}

GeneratorSpec grid_spec(const ExperimentPlan& plan, std::size_t grid_index, int rep) {
  const GridPoint& gp = plan.sweep.at(grid_index);
  GeneratorSpec spec = plan.base;
  spec.m = gp.m;
  spec.r = gp.r;
  spec.r_tilde = gp.r_tilde;
  spec.seed = data_seed(plan.master_seed, grid_index, rep);
  if (plan.fix_beta_across_sweep && spec.beta_rule != BetaRule::Fixed) {
    Rng brng = make_rng(beta_seed(plan.master_seed, rep));
    spec.beta_fixed = gen_beta(spec.beta_rule, spec.d, spec.s_star, brng);
    spec.beta_rule = BetaRule::Fixed;
  }
  return spec;
}

std::uint64_t data_seed(std::uint64_t master, std::size_t grid_index, int rep) {
  return derive_seed(master, {0xD47A, grid_index, static_cast<std::uint64_t>(rep)});
}

std::uint64_t beta_seed(std::uint64_t master, int rep) {
  return derive_seed(master, {0xBE7A, static_cast<std::uint64_t>(rep)});
}

std::uint64_t estimator_seed(std::uint64_t master, std::size_t grid_index, std::size_t estimator_index, int rep) {
  return derive_seed(master, {0xE57, grid_index, estimator_index, static_cast<std::uint64_t>(rep)});
}

namespace {

void score(ResultRow& row, const Estimate& est, const Vector& beta_star) {
  row.beta = est.beta;
  row.mae = (est.beta - beta_star).cwiseAbs().mean();
  if (est.support) {
    std::vector<Index> truth;
    for (Index j = 0; j < beta_star.size(); ++j) {
      if (beta_star(j) != 0.0) truth.push_back(j);
    }
    std::size_t hit = 0;
    for (Index j : *est.support) hit += beta_star(j) != 0.0 ? 1 : 0;
    row.support_precision = est.support->empty() ? (truth.empty() ? 1.0 : 0.0)
                                                 : static_cast<double>(hit) / static_cast<double>(est.support->size());
    row.support_recall = truth.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(truth.size());
  }
  if (est.ci) {
    // Coverage over the true support (all coordinates when beta* is dense).
    int total = 0;
    int covered = 0;
    for (Index j = 0; j < beta_star.size(); ++j) {
      if (beta_star(j) == 0.0) continue;
      ++total;
      const auto& iv = (*est.ci)[j];
      covered += (iv.lower <= beta_star(j) && beta_star(j) <= iv.upper) ? 1 : 0;
    }
    row.coverage = total ? static_cast<double>(covered) / total : 1.0;
  }
}

}  // namespace

std::vector<ResultRow> run_plan(const ExperimentPlan& plan) {
  plan.validate();
  const std::size_t grid = plan.sweep.size();
  const std::size_t reps = static_cast<std::size_t>(plan.replications);
  const std::size_t n_est = plan.estimators.size();
  std::vector<ResultRow> rows(grid * reps * n_est);
  const std::string preset_name = to_string(plan.preset);

  auto task = [&](std::size_t t) {
    const std::size_t gi = t / reps;
    const int rep = static_cast<int>(t % reps);
    const GeneratorSpec spec = grid_spec(plan, gi, rep);
    std::optional<Generated> gen;
    std::string gen_error;
    try {
      gen = generate(spec);
    } catch (const std::exception& ex) {
      gen_error = ex.what();
    }
    for (std::size_t ei = 0; ei < n_est; ++ei) {
      ResultRow& row = rows[(gi * reps + rep) * n_est + ei];
      row.preset = preset_name;
      row.estimator = plan.estimators[ei].name;
      row.m = spec.m;
      row.n = spec.n();
      row.n_tilde = spec.n_tilde();
      row.ratio = static_cast<double>(spec.r);
      row.rep = rep;
      row.grid_index = static_cast<int>(gi);
      row.seed = estimator_seed(plan.master_seed, gi, ei, rep);
      if (!gen) {
        row.error = gen_error;
        row.mae = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      row.beta_star = gen->truth.beta_star;
      Rng rng = make_rng(row.seed);
      const auto start = std::chrono::steady_clock::now();
      try {
        const Estimate est = run_estimator(plan.estimators[ei], gen->data, rng);
        score(row, est, gen->truth.beta_star);
      } catch (const std::exception& ex) {
        row.error = ex.what();
        row.mae = std::numeric_limits<double>::quiet_NaN();
      }
      if (plan.timing) {
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      }
    }
  };

  const std::size_t tasks = grid * reps;
  const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(plan.threads), tasks));
  if (workers <= 1) {
    for (std::size_t t = 0; t < tasks; ++t) task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < tasks; t = next++) task(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw Error("summarize: no rows");
  using Key = std::tuple<std::string, int, std::string, int, Index, Index>;
  std::map<Key, std::vector<const ResultRow*>> groups;
  std::map<Key, std::size_t> first_seen;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const Key key{r.preset, r.grid_index, r.estimator, r.m, r.n, r.n_tilde};
    groups[key].push_back(&r);
    first_seen.emplace(key, i);
  }
  std::vector<std::pair<std::size_t, Key>> order;
  for (const auto& [key, idx] : first_seen) order.emplace_back(idx, key);
  std::sort(order.begin(), order.end());

  std::vector<SummaryRow> out;
  for (const auto& [idx, key] : order) {
    const auto& members = groups[key];
    SummaryRow s;
    s.preset = members.front()->preset;
    s.estimator = members.front()->estimator;
    s.m = members.front()->m;
    s.n = members.front()->n;
    s.n_tilde = members.front()->n_tilde;
    s.ratio = members.front()->ratio;
    double sum = 0.0, sum_sq = 0.0, prec = 0.0, rec = 0.0, cov = 0.0;
    int n_prec = 0, n_cov = 0;
    for (const auto* r : members) {
      if (r->error) {
        ++s.errors;
        continue;
      }
      ++s.count;
      sum += r->mae;
      sum_sq += r->mae * r->mae;
      if (r->support_precision) {
        prec += *r->support_precision;
        rec += *r->support_recall;
        ++n_prec;
      }
      if (r->coverage) {
        cov += *r->coverage;
        ++n_cov;
      }
    }
    if (s.count > 0) {
      s.mae_mean = sum / s.count;
      if (s.count > 1) {
        const double var = std::max(sum_sq - s.count * s.mae_mean * s.mae_mean, 0.0) / (s.count - 1);
        s.mae_stderr = std::sqrt(var / s.count);
      }
    } else {
      s.mae_mean = std::numeric_limits<double>::quiet_NaN();
    }
    if (n_prec) {
      s.precision_mean = prec / n_prec;
      s.recall_mean = rec / n_prec;
    }
    if (n_cov) s.coverage_mean = cov / n_cov;
    out.push_back(s);
  }
  return out;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

}  // namespace

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows, bool with_timing) {
  out << kResultsHeader << "\n";
  for (const auto& r : rows) {
    out << r.preset << ',' << r.estimator << ',' << r.m << ',' << r.n << ',' << r.n_tilde << ',' << fmt(r.ratio) << ','
        << r.rep << ',' << r.seed << ',' << fmt(r.mae) << ',' << fmt(r.support_precision) << ','
        << fmt(r.support_recall) << ',' << fmt(r.coverage) << ',' << (with_timing ? fmt(r.wall_ms) : "0") << "\n";
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "preset,estimator,m,n,n_tilde,ratio,count,errors,mae_mean,mae_stderr,precision_mean,recall_mean,"
         "coverage_mean\n";
  for (const auto& s : rows) {
    out << s.preset << ',' << s.estimator << ',' << s.m << ',' << s.n << ',' << s.n_tilde << ',' << fmt(s.ratio) << ','
        << s.count << ',' << s.errors << ',' << fmt(s.mae_mean) << ',' << fmt(s.mae_stderr) << ','
        << fmt(s.precision_mean) << ',' << fmt(s.recall_mean) << ',' << fmt(s.coverage_mean) << "\n";
  }
}

std::vector<double> relative_gaps(const std::vector<ResultRow>& rows, const std::string& lhs, const std::string& rhs,
                                  double floor) {
  std::map<std::pair<int, int>, const ResultRow*> right;
  for (const auto& r : rows) {
    if (r.estimator == rhs && !r.error) right[{r.grid_index, r.rep}] = &r;
  }
  std::vector<double> gaps;
  for (const auto& r : rows) {
    if (r.estimator != lhs || r.error) continue;
    const auto it = right.find({r.grid_index, r.rep});
    if (it == right.end()) continue;
    const Vector& b = it->second->beta;
    for (Index j = 0; j < r.beta.size(); ++j) {
      gaps.push_back(std::abs(r.beta(j) - b(j)) / std::max(std::abs(b(j)), floor));
    }
  }
  return gaps;
}

double trimmed_max(std::vector<double> values, double drop_fraction) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto drop = static_cast<std::size_t>(std::ceil(drop_fraction * static_cast<double>(values.size())));
  if (drop >= values.size()) return 0.0;
  return values[values.size() - 1 - drop];
}

}  // namespace upiv
