#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "thzlab/estimators.hpp"
#include "thzlab/fmtl.hpp"
#include "thzlab/metrics.hpp"

namespace thzlab {

enum class Method { kLs, kMmse, kOmp, kBsa, kFmtl, kCl };
enum class Partition { kIid, kSector, kImbalanced };
enum class OutputFormat { kCsv, kJson };

std::string to_string(Method m);
Method method_from_string(const std::string& name);  // throws on unknown names
std::string to_string(Partition p);
Partition partition_from_string(const std::string& name);

/// Sweep axis: "snr_db" (NMSE/DoA sweeps), "dataset_size" (overhead study,
/// values are per-user channel-draw counts V) or "omega2" (DoA sweep task
/// weights).
struct SweepSpec {
  std::string axis = "snr_db";
  std::vector<double> values;
};

/// Training hyper-parameters used whenever FMTL or CL participates.
struct TrainingSetup {
  std::vector<int> hidden = {256, 256};
  int iterations = 100;          // T
  double learning_rate = 0.001;  // kappa
  double w1 = 0.8, w2 = 0.2;
  double snr_delta_db = 20.0;    // noisy model transmission
  int batch_size = 0;            // <= 0: full batch
  double dropout_prob = 0.5;
  int channel_draws = 1000;      // V per user
  int noise_draws = 500;         // G
  std::vector<double> snr_levels_db = {15.0, 20.0, 25.0};
  int val_loss_row_cap = 2048;
};

struct ExperimentSpec {
  std::string profile = "desk";  // desk | paper
  SystemConfig scenario;         // resolved (profile defaults + overrides)
  std::string experiment = "nmse";  // nmse | doa | overhead
  SweepSpec sweep;
  std::vector<Method> methods = {Method::kBsa, Method::kOmp};
  int trials = 50;  // J_T
  Partition partition = Partition::kSector;
  TrainingSetup training;
  std::string output_path;
  OutputFormat format = OutputFormat::kCsv;

  void validate() const;  // throws std::invalid_argument before any compute
};

/// Profile defaults: scenario plus training setup sized for the profile.
ExperimentSpec default_spec(const std::string& profile);

/// Parses a full experiment spec from JSON text (profile defaults first,
/// then field-by-field overrides). The same parser consumes emitted
/// manifests, so a JSON result file re-runs without the original config.
ExperimentSpec spec_from_json_text(const std::string& text);
ExperimentSpec load_spec_file(const std::string& path);
std::string spec_to_json(const ExperimentSpec& spec);  // resolved manifest

struct ResultRow {
  std::string experiment;
  std::string method;
  std::string axis_name;
  double axis_value = 0.0;
  std::string metric;
  double value = 0.0;
  double std_dev = 0.0;
  int trials = 0;
  std::uint64_t seed = 0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
};

/// Channel-estimation NMSE versus the sweep axis, one row per
/// (axis value, method); deterministic given the scenario seed.
ResultTable run_nmse_sweep(const ExperimentSpec& spec);

/// DoA RMSE versus SNR (or versus omega2 for the task-weight variant).
ResultTable run_doa_sweep(const ExperimentSpec& spec);

/// Dataset-size study: final validation NMSE for CL and federated
/// training on balanced and imbalanced partitions, plus the
/// communication-efficiency ratio per size.
std::pair<ResultTable, OverheadReport> run_overhead_study(const ExperimentSpec& spec);

/// Runs the experiment named by spec.experiment.
ResultTable run_experiment(const ExperimentSpec& spec);

std::string table_to_csv(const ResultTable& table);
ResultTable table_from_csv(const std::string& csv);

/// Writes results as CSV or as JSON with the resolved-config manifest.
/// Fails without leaving a partial file behind.
void emit_results(const ResultTable& table, const ExperimentSpec& spec,
                  const std::string& path, OutputFormat format);

}  // namespace thzlab
