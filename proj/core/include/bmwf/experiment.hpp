#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bmwf/designer.hpp"
#include "bmwf/metrics.hpp"
#include "bmwf/pipeline.hpp"
#include "bmwf/scene.hpp"
#include "bmwf/solver.hpp"

namespace bmwf {

enum class SweepAxis { kLombard, kSnr };

std::string to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& name);

/// Sweep grid in dB. On the Lombard axis the value is the squared Lombard
/// gain at the configured SNR; on the SNR axis the speech level is held at
/// its design-scene value and the noise level follows the SNR.
struct SweepSpec {
  SweepAxis axis = SweepAxis::kLombard;
  double start_db = 0.0;
  double stop_db = 30.0;
  double step_db = 5.0;

  void validate() const;
  std::vector<double> points() const;
};

struct ExperimentConfig {
  SceneConfig scene;
  StftConfig stft;
  DesignSpec design;
  SolverOptions solver;
  std::vector<Method> methods{Method::kMWF, Method::kMWF_ITF, Method::kMWF_ITF_R};
  std::vector<PenaltyKind> penalties{PenaltyKind::kITF};
  SweepSpec sweep;
  int seeds = 4;
  std::uint64_t base_seed = 1;
  int workers = 1;
  SpeechEstimate speech_estimate = SpeechEstimate::kOracle;
  std::string output_dir = "out";

  void validate() const;
  std::uint64_t seed(int index) const { return base_seed + static_cast<std::uint64_t>(index); }
};

/// Strict JSON (unknown keys are rejected); missing keys keep defaults.
ExperimentConfig experiment_config_from_json(const std::string& text);
std::string experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig load_experiment_config(const std::string& path);
/// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// Scene levels (snr, g^2) of an axis point.
struct OperatingPoint {
  double snr_in_db = 0.0;
  double g_sq_db = 0.0;
};
OperatingPoint operating_point(const ExperimentConfig& config, double axis_value);

/// Design scene: first seed at snr_worst and the configured Lombard gain.
SceneAnalysis design_analysis(const ExperimentConfig& config);
BetaProfile run_design(const ExperimentConfig& config);

/// eta over bins with alpha > 0; MWF rows use the dynamic weight of the
/// profile. NaN when undefined.
double method_eta(const SceneAnalysis& analysis, const SceneSolution& solution, Method method,
                  const BetaProfile& profile);

/// Solves one method on an analyzed scene and evaluates every metric.
MetricReport evaluate_method(const SceneAnalysis& analysis, Method method, const BetaProfile& profile,
                             const ExperimentConfig& config, int workers = 1, SceneSolution* solution = nullptr);

struct SweepRow {
  double axis_value = 0.0;
  Method method = Method::kMWF;
  int seeds_ok = 0;
  MetricReport metrics;  // mean over successful seeds
  std::string error;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::kLombard;
  std::vector<SweepRow> rows;  // axis-major, methods in config order
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
};

SweepResult run_sweep(const ExperimentConfig& config, const BetaProfile& profile);
std::string sweep_csv_header();
void write_sweep_csv(std::ostream& os, const SweepResult& result);

// Subcommands. Each writes its artifacts and throws bmwf::Error subclasses
// whose code() is the process exit code.

struct SynthReport {
  double speech_gain = 0.0;
  double lombard_gain = 0.0;
  double measured_snr_db = 0.0;
};
/// x.wav, v.wav, y.wav, scene.json and phi_{x,v,y}.csv in out_dir.
SynthReport cmd_synth(const ExperimentConfig& config, const std::string& out_dir, std::uint64_t seed);

/// Writes the profile to out_path. On failure writes a best-effort report
/// next to it (`<out_path>.failure.json`) and rethrows.
BetaProfile cmd_design(const ExperimentConfig& config, const std::string& out_path);

struct ProcessOptions {
  std::string noisy_path;
  std::string noise_path;
  std::string out_dir;
  Method method = Method::kMWF;
  std::string beta_profile_path;  // required by the ITF methods
  bool passthrough = false;       // W = Q
  std::optional<SpeechEstimate> speech_estimate;
};
/// left.wav, right.wav, filters.csv and metrics.csv in out_dir.
MetricReport cmd_process(const ExperimentConfig& config, const ProcessOptions& options);

struct MetricsOptions {
  std::string noisy_path;
  std::string noise_path;
  std::string filters_path;
  std::string beta_profile_path;  // optional; enables eta
  std::optional<Method> method;   // weight rule for eta (default MWF-ITF-R)
};
MetricReport cmd_metrics(const ExperimentConfig& config, const MetricsOptions& options);

/// Sweep CSV plus `<out_csv>.meta.json` with the config hash and seeds. The
/// profile is designed first when no path is given.
SweepResult cmd_sweep(const ExperimentConfig& config, const std::string& out_csv,
                      const std::string& beta_profile_path = {});

}  // namespace bmwf
