// Command-line front end: synth, design, process, metrics, sweep.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bmwf/error.hpp"
#include "bmwf/experiment.hpp"
#include "bmwf/wav.hpp"

namespace {

using bmwf::ExitCode;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

bmwf::ExperimentConfig load_config(const Common& c) {
  bmwf::ExperimentConfig cfg = c.config_path.empty() ? bmwf::ExperimentConfig{} : bmwf::load_experiment_config(c.config_path);
  if (c.seed) cfg.base_seed = *c.seed;
  if (c.workers) cfg.workers = *c.workers;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_path, "Experiment config (JSON); defaults when omitted");
  app->add_option("-s,--seed", c.seed, "Base seed");
  app->add_option("-j,--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
}

void print_report(const bmwf::MetricReport& r) {
  std::cout << bmwf::metric_csv_header() << '\n' << bmwf::metric_csv_fields(r) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binaural multichannel Wiener filtering with cue-preservation penalties"};
  app.require_subcommand(1);

  Common common;
  std::string out_dir = "out";
  std::string out_path;
  std::string method_name = "MWF";
  std::string beta_path;
  std::string noisy, noise, filters;
  std::string speech_estimate;
  bool passthrough = false;

  auto* synth = app.add_subcommand("synth", "Render the synthetic scene to WAV plus statistics dumps");
  add_common(synth, common);
  synth->add_option("-o,--out-dir", out_dir, "Output directory");

  auto* design = app.add_subcommand("design", "Select beta at the worst-case SNR");
  add_common(design, common);
  design->add_option("-o,--out", out_path, "Beta profile path")->default_val("beta_profile.json");

  auto* process = app.add_subcommand("process", "Filter a multichannel recording");
  add_common(process, common);
  process->add_option("--noisy", noisy, "Noisy M-channel WAV")->required();
  process->add_option("--noise", noise, "Noise component of the noisy WAV")->required();
  process->add_option("-m,--method", method_name, "MWF | MWF-ITF | MWF-ITF-R");
  process->add_option("-b,--beta-profile", beta_path, "Beta profile from `design`");
  process->add_option("-o,--out-dir", out_dir, "Output directory");
  process->add_option("--speech-estimate", speech_estimate, "oracle | subtract (default subtract)");
  process->add_flag("--passthrough", passthrough, "Use W = Q (reference mics) instead of solving");

  auto* metrics = app.add_subcommand("metrics", "Evaluate a filter dump against a recording");
  add_common(metrics, common);
  metrics->add_option("--noisy", noisy, "Noisy M-channel WAV")->required();
  metrics->add_option("--noise", noise, "Noise component of the noisy WAV")->required();
  metrics->add_option("--filters", filters, "Filter CSV")->required();
  metrics->add_option("-b,--beta-profile", beta_path, "Beta profile (enables eta)");
  metrics->add_option("-m,--method", method_name, "Weight rule used for eta");

  auto* sweep = app.add_subcommand("sweep", "Lombard-gain or SNR sweep over all configured methods");
  add_common(sweep, common);
  sweep->add_option("-o,--out", out_path, "Sweep CSV path")->default_val("sweep.csv");
  sweep->add_option("-b,--beta-profile", beta_path, "Beta profile (designed first when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const bmwf::ExperimentConfig cfg = load_config(common);
    if (*synth) {
      const auto r = bmwf::cmd_synth(cfg, out_dir, cfg.base_seed);
      std::cout << "speech_gain " << r.speech_gain << "\nlombard_gain " << r.lombard_gain << "\nmeasured_snr_db "
                << r.measured_snr_db << '\n';
    } else if (*design) {
      const auto p = bmwf::cmd_design(cfg, out_path);
      std::cout << "beta " << (p.beta.empty() ? 0.0 : p.beta.front()) << "\ndelta_ild_n_db " << p.achieved_ild_db
                << "\ndelta_itd_n_ms " << p.achieved_itd_ms << '\n';
    } else if (*process) {
      bmwf::ProcessOptions o;
      o.noisy_path = noisy;
      o.noise_path = noise;
      o.out_dir = out_dir;
      o.method = bmwf::parse_method(method_name);
      o.beta_profile_path = beta_path;
      o.passthrough = passthrough;
      if (!speech_estimate.empty()) o.speech_estimate = bmwf::parse_speech_estimate(speech_estimate);
      print_report(bmwf::cmd_process(cfg, o));
    } else if (*metrics) {
      bmwf::MetricsOptions o;
      o.noisy_path = noisy;
      o.noise_path = noise;
      o.filters_path = filters;
      o.beta_profile_path = beta_path;
      if (metrics->count("--method") > 0) o.method = bmwf::parse_method(method_name);
      print_report(bmwf::cmd_metrics(cfg, o));
    } else if (*sweep) {
      const auto r = bmwf::cmd_sweep(cfg, out_path, beta_path);
      int failed = 0;
      for (const auto& row : r.rows) failed += row.error.empty() ? 0 : 1;
      std::cout << "rows " << r.rows.size() << " (with errors: " << failed << ")\nconfig_hash " << r.config_hash
                << '\n';
    }
  } catch (const bmwf::DesignFailure& e) {
    std::cerr << "design failure: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kDesignFailure);
  } catch (const bmwf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kUsage);
  }
  return static_cast<int>(ExitCode::kOk);
}
