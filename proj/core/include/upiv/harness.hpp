#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "upiv/config.hpp"
#include "upiv/datagen.hpp"
#include "upiv/estimators.hpp"

namespace upiv {

enum class EstimatorKind { TsIv, Ts2sls, NaiveOls, UpGmm, UpGmmHd };

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);

struct NamedEstimator {
  std::string name;
  EstimatorKind kind = EstimatorKind::TsIv;
  EstimatorConfig cfg;
};

/// Run one estimator; `rng` feeds naive_ols pairing and Monte-Carlo splits.
Estimate run_estimator(const NamedEstimator& est, const UnpairedDataset& data, Rng& rng);

enum class Preset { Setting1, Setting2, Setting3, TsIvBias, Coverage, Agreement, Custom };

std::string to_string(Preset preset);
Preset preset_from_string(const std::string& name);

/// One sweep point: m instruments, r rows per instrument in the y-sample, r_tilde in the x-sample.
struct GridPoint {
  int m = 0;
  int r = 0;
  int r_tilde = 0;
};

struct ExperimentPlan {
  Preset preset = Preset::Custom;
  GeneratorSpec base;
  std::vector<GridPoint> sweep;
  std::vector<NamedEstimator> estimators;
  int replications = 50;
  std::uint64_t master_seed = 0;
  int threads = 1;
  /// Record wall-clock time per row; off keeps the output a pure function of the plan.
  bool timing = false;
  /// Keep beta* fixed per replication across grid points (redrawing only the data).
  bool fix_beta_across_sweep = true;

  void validate() const;
};

/// Scaled presets used by the acceptance suite; `replications` and seeds may be overridden afterwards.
ExperimentPlan preset_plan(Preset preset);

/**
 * Plan from a config file. Keys: `preset`, `replications`, `seed`, `threads`, `timing`,
 * `grid_m` (list), `grid_r` (list, crossed with grid_m), `estimators` (list of names from
 * ts_iv, ts_2sls, naive_ols, up_gmm, up_gmm_l1, up_gmm_hd, up_gmm_hd_l1, up_gmm_hd_mc), plus
 * generator keys under `gen.` and estimator overrides under `<name>.`.
 */
ExperimentPlan plan_from_config(const KeyValueConfig& cfg);

/// Standard estimator line-ups by name (see plan_from_config).
NamedEstimator named_estimator(const std::string& name);

struct ResultRow {
  std::string preset;
  std::string estimator;
  int m = 0;
  Index n = 0;
  Index n_tilde = 0;
  double ratio = 0.0;
  int rep = 0;
  std::uint64_t seed = 0;
  double mae = 0.0;
  std::optional<double> support_precision;
  std::optional<double> support_recall;
  std::optional<double> coverage;
  double wall_ms = 0.0;
  std::optional<std::string> error;
  int grid_index = 0;
  Vector beta;
  Vector beta_star;
};

/// Seeds of a plan: data by (grid point, replication), estimator streams by (grid point, estimator, replication).
std::uint64_t data_seed(std::uint64_t master, std::size_t grid_index, int rep);
std::uint64_t beta_seed(std::uint64_t master, int rep);
std::uint64_t estimator_seed(std::uint64_t master, std::size_t grid_index, std::size_t estimator_index, int rep);

/// Generator spec of one (grid point, replication) cell, exactly as run_plan draws it.
GeneratorSpec grid_spec(const ExperimentPlan& plan, std::size_t grid_index, int rep);

/// Rows ordered by (grid point, replication, estimator), independent of thread count.
std::vector<ResultRow> run_plan(const ExperimentPlan& plan);

struct SummaryRow {
  std::string preset;
  std::string estimator;
  int m = 0;
  Index n = 0;
  Index n_tilde = 0;
  double ratio = 0.0;
  int count = 0;
  int errors = 0;
  double mae_mean = 0.0;
  double mae_stderr = 0.0;
  std::optional<double> precision_mean;
  std::optional<double> recall_mean;
  std::optional<double> coverage_mean;
};

/// Aggregate per (preset, estimator, grid point); rows with errors are counted but not averaged.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows, bool with_timing = true);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

/// Column header of write_results_csv.
inline constexpr const char* kResultsHeader =
    "preset,estimator,m,n,n_tilde,ratio,rep,seed,mae,support_precision,support_recall,coverage,wall_ms";

/// Relative coefficient gaps |a - b| / max(|b|, floor) between two estimators over matching rows.
std::vector<double> relative_gaps(const std::vector<ResultRow>& rows, const std::string& lhs, const std::string& rhs,
                                  double floor = 1e-12);

/// Largest gap after dropping the ceil(fraction * count) largest ones.
double trimmed_max(std::vector<double> values, double drop_fraction);

}  // namespace upiv
