#ifndef ICDC_HARNESS_HPP
#define ICDC_HARNESS_HPP

#include <string>
#include <vector>

#include "icdc/train.hpp"

namespace icdc {

/// One row of the gap/time table: a method evaluated over a dataset.
struct EvalRow {
  std::string method;
  double mean_objective = 0.0;
  double gap_pct = 0.0;
  bool gap_vs_exact = false;  // false -> gap measured vs best-of-report
  double wallclock = 0.0;     // aggregate single-worker-equivalent seconds
  int samples = 1;            // samples per instance (model rows)
};

struct EvalReport {
  std::vector<EvalRow> rows;
  int num_instances = 0;

  std::string to_csv() const;
  std::string to_markdown() const;  // sorted by gap ascending
};

struct EvalOptions {
  int n_samples = 1;
  int stride = 1;
  std::uint64_t seed = 0;
  int workers = 0;
  std::vector<std::string> methods;  // empty -> model only
};

// ---- CLI entry points ----

/// Writes `count` instances as JSON lines. kind: "atsp" | "pmsp" | "nav";
/// sizes: {n} or {J, M}.
void cmd_generate(const std::string& kind, const std::vector<int>& sizes,
                  int count, std::uint64_t seed, const std::string& out_path);

/// Runs training from a JSON config file; outputs under run_dir.
/// Unknown or missing keys are reported by name.
void cmd_train(const std::string& config_path, const std::string& run_dir,
               int workers_override = -1, std::int64_t seed_override = -1);

/// Best-of-n evaluation of a checkpoint (and optional baselines) over a
/// dataset; writes report.csv and report.md under run_dir.
EvalReport cmd_eval(const std::string& checkpoint_path,
                    const std::string& dataset_path, const EvalOptions& opts,
                    const std::string& run_dir);

/// Cross-size evaluation of one checkpoint; one report row per size.
EvalReport cmd_sweep_generalize(const std::string& checkpoint_path,
                                const std::string& kind,
                                const std::vector<int>& sizes,
                                int count_per_size, const EvalOptions& opts,
                                const std::string& run_dir);

/// Renders CSVs into a markdown table plus SVG plots (gap vs size when a
/// `size` column exists; gap and time vs stride when a `stride` column
/// exists).
void cmd_report(const std::vector<std::string>& csv_paths,
                const std::string& out_dir);

// ---- run-directory support ----

/// Creates run_dir and writes manifest.json (config hash, seed, version).
void write_manifest(const std::string& run_dir, const std::string& config_text,
                    std::uint64_t seed);

/// Parses a flat JSON object into TrainConfig/ModelConfig; throws with the
/// offending key named on unknown keys, missing required keys, or type
/// errors. Required: "family". Optional "dataset" (instances path) and
/// "instances"/"size"/"machines" for generation.
struct TrainFileConfig {
  ModelConfig model;
  TrainConfig train;
  std::string dataset;  // empty -> generate
  std::string kind = "atsp";
  int instances = 64;
  std::vector<int> sizes{8};
};
TrainFileConfig parse_train_config(const std::string& json_text);

}  // namespace icdc

#endif
