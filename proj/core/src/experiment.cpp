#include "bmwf/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bmwf/error.hpp"
#include "bmwf/wav.hpp"
#include "csv_util.hpp"
#include "parallel.hpp"

namespace bmwf {
namespace {

using nlohmann::json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Reads optional keys from one JSON object and rejects unknown ones.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw InvalidArgument("config: '" + name_ + "' must be an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw InvalidArgument("config: bad value for '" + name_ + "." + key + "'");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& at(const std::string& key) const { return j_.at(key); }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw InvalidArgument("config: unknown key '" + name_ + "." + item.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << text;
  if (!os) throw IoError("write failed: " + path);
}

double db_or_nan(double linear) { return linear > 0.0 ? power_to_db(linear) : kNaN; }

MetricReport mean_report(const std::vector<const MetricReport*>& rs) {
  MetricReport m;
  if (rs.empty()) return m;
  auto avg = [&](double MetricReport::*field) {
    double s = 0.0;
    for (const MetricReport* r : rs) s += r->*field;
    return s / static_cast<double>(rs.size());
  };
  m.delta_snr_left = avg(&MetricReport::delta_snr_left);
  m.delta_snr_right = avg(&MetricReport::delta_snr_right);
  m.delta_ild_speech = avg(&MetricReport::delta_ild_speech);
  m.delta_ild_noise = avg(&MetricReport::delta_ild_noise);
  m.delta_itd_speech = avg(&MetricReport::delta_itd_speech);
  m.delta_itd_noise = avg(&MetricReport::delta_itd_noise);
  m.eta = avg(&MetricReport::eta);
  m.g_bar_sq_db = avg(&MetricReport::g_bar_sq_db);
  m.snr_bar_in_db = avg(&MetricReport::snr_bar_in_db);
  m.k_split = rs.front()->k_split;
  std::set<std::string> flags;
  for (const MetricReport* r : rs) {
    std::stringstream ss(r->flags);
    for (std::string f; std::getline(ss, f, ';');) {
      if (!f.empty()) flags.insert(f);
    }
  }
  for (const std::string& f : flags) {
    if (!m.flags.empty()) m.flags += ';';
    m.flags += f;
  }
  return m;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

MultiSignal load_wav_checked(const std::string& path, const ExperimentConfig& config) {
  MultiSignal s = read_wav(path);
  if (s.sample_rate != config.stft.sample_rate) {
    throw InvalidArgument(path + ": sample rate " + std::to_string(s.sample_rate) + " differs from the configured " +
                          std::to_string(config.stft.sample_rate));
  }
  return s;
}

}  // namespace

std::string to_string(SweepAxis axis) { return axis == SweepAxis::kLombard ? "lombard" : "snr"; }

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "lombard") return SweepAxis::kLombard;
  if (name == "snr") return SweepAxis::kSnr;
  throw InvalidArgument("unknown sweep axis '" + name + "'");
}

void SweepSpec::validate() const {
  if (!std::isfinite(start_db) || !std::isfinite(stop_db)) throw InvalidArgument("sweep: range must be finite");
  if (!(step_db > 0.0)) throw InvalidArgument("sweep: step must be > 0");
  if (stop_db < start_db) throw InvalidArgument("sweep: empty range");
}

std::vector<double> SweepSpec::points() const {
  validate();
  std::vector<double> p;
  for (int i = 0;; ++i) {
    const double v = start_db + i * step_db;
    if (v > stop_db + 1e-9 * step_db) break;
    p.push_back(v);
  }
  return p;
}

void ExperimentConfig::validate() const {
  scene.validate();
  stft.validate();
  if (stft.sample_rate != scene.sample_rate) throw InvalidArgument("config: STFT and scene sample rates differ");
  design.validate();
  solver.validate();
  sweep.validate();
  if (methods.empty()) throw InvalidArgument("config: no methods");
  if (penalties.empty()) throw InvalidArgument("config: no penalty kinds");
  if (seeds < 1) throw InvalidArgument("config: seeds must be >= 1");
  if (workers < 1) throw InvalidArgument("config: workers must be >= 1");
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  Section top(root, "config");

  if (top.has("scene")) {
    SceneConfig& s = c.scene;
    Section sec(top.at("scene"), "scene");
    sec.get("speech_azimuth_deg", s.speech_azimuth_deg);
    sec.get("speech_distance_m", s.speech_distance_m);
    sec.get("noise_azimuth_deg", s.noise_azimuth_deg);
    sec.get("noise_distance_m", s.noise_distance_m);
    sec.get("mics_left", s.mics_left);
    sec.get("mics_right", s.mics_right);
    sec.get("sample_rate", s.sample_rate);
    sec.get("snr_in_db", s.snr_in_db);
    sec.get("lombard_gain_sq_db", s.lombard_gain_sq_db);
    sec.get("duration_s", s.duration_s);
    if (sec.has("sensor_noise_db")) {
      // null disables the sensor noise
      const json& v = sec.at("sensor_noise_db");
      s.sensor_noise_db = v.is_null() ? -std::numeric_limits<double>::infinity() : v.get<double>();
    }
    sec.get("speech_hrir", s.speech_hrir_path);
    sec.get("noise_hrir", s.noise_hrir_path);
    sec.get("modulation_depth", s.speech_modulation_depth);
    sec.get("modulation_hz", s.speech_modulation_hz);
    sec.get("ref_mic_left", s.ref_mic_left);
    sec.get("ref_mic_right", s.ref_mic_right);
    if (sec.has("head")) {
      HeadModel& h = s.head;
      Section hs(sec.at("head"), "scene.head");
      hs.get("radius_m", h.head_radius_m);
      hs.get("speed_of_sound", h.speed_of_sound);
      hs.get("hrir_length", h.hrir_length);
      hs.get("onset_samples", h.onset_samples);
      hs.get("shadow_pole_max", h.shadow_pole_max);
      hs.get("mic_spacing_m", h.mic_spacing_m);
      if (hs.has("tail_level_db")) {
        const json& v = hs.at("tail_level_db");
        h.tail_level_db = v.is_null() ? -std::numeric_limits<double>::infinity() : v.get<double>();
      }
      hs.get("tail_t60_ms", h.tail_t60_ms);
      hs.finish();
    }
    sec.finish();
  }
  c.stft.sample_rate = c.scene.sample_rate;
  if (top.has("stft")) {
    Section sec(top.at("stft"), "stft");
    sec.get("frame_len", c.stft.frame_len);
    sec.get("fft_bins", c.stft.fft_bins);
    sec.get("hop", c.stft.hop);
    sec.finish();
  }
  if (top.has("design")) {
    DesignSpec& d = c.design;
    Section sec(top.at("design"), "design");
    sec.get("snr_worst_db", d.snr_worst_db);
    sec.get("ild_max_db", d.ild_max_db);
    sec.get("itd_max_ms", d.itd_max_ms);
    sec.get("beta_min", d.beta_min);
    sec.get("beta_step", d.beta_step);
    sec.get("beta_max", d.beta_max);
    sec.get("monotone_tol", d.monotone_tol);
    std::string mode = to_string(d.mode);
    sec.get("mode", mode);
    d.mode = parse_design_mode(mode);
    sec.finish();
  }
  if (top.has("solver")) {
    SolverOptions& o = c.solver;
    Section sec(top.at("solver"), "solver");
    sec.get("max_iters", o.max_iters);
    sec.get("grad_tol", o.grad_tol);
    sec.get("armijo_c1", o.armijo_c1);
    sec.get("backtrack", o.backtrack);
    sec.get("max_backtracks", o.max_backtracks);
    sec.finish();
  }
  if (top.has("methods")) {
    std::vector<std::string> names;
    top.get("methods", names);
    c.methods.clear();
    for (const auto& n : names) c.methods.push_back(parse_method(n));
  }
  if (top.has("penalties")) {
    std::vector<std::string> names;
    top.get("penalties", names);
    c.penalties.clear();
    for (const auto& n : names) c.penalties.push_back(parse_penalty_kind(n));
  }
  if (top.has("sweep")) {
    Section sec(top.at("sweep"), "sweep");
    std::string axis = to_string(c.sweep.axis);
    sec.get("axis", axis);
    c.sweep.axis = parse_sweep_axis(axis);
    sec.get("start_db", c.sweep.start_db);
    sec.get("stop_db", c.sweep.stop_db);
    sec.get("step_db", c.sweep.step_db);
    sec.finish();
  }
  top.get("seeds", c.seeds);
  top.get("base_seed", c.base_seed);
  top.get("workers", c.workers);
  std::string est = to_string(c.speech_estimate);
  top.get("speech_estimate", est);
  c.speech_estimate = parse_speech_estimate(est);
  top.get("output_dir", c.output_dir);
  top.finish();
  c.validate();
  return c;
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  const SceneConfig& s = c.scene;
  const HeadModel& h = s.head;
  json j;
  j["scene"] = {{"speech_azimuth_deg", s.speech_azimuth_deg},
                {"speech_distance_m", s.speech_distance_m},
                {"noise_azimuth_deg", s.noise_azimuth_deg},
                {"noise_distance_m", s.noise_distance_m},
                {"mics_left", s.mics_left},
                {"mics_right", s.mics_right},
                {"sample_rate", s.sample_rate},
                {"snr_in_db", s.snr_in_db},
                {"lombard_gain_sq_db", s.lombard_gain_sq_db},
                {"duration_s", s.duration_s},
                {"sensor_noise_db", std::isfinite(s.sensor_noise_db) ? json(s.sensor_noise_db) : json(nullptr)},
                {"speech_hrir", s.speech_hrir_path},
                {"noise_hrir", s.noise_hrir_path},
                {"modulation_depth", s.speech_modulation_depth},
                {"modulation_hz", s.speech_modulation_hz},
                {"ref_mic_left", s.ref_mic_left},
                {"ref_mic_right", s.ref_mic_right},
                {"head",
                 {{"radius_m", h.head_radius_m},
                  {"speed_of_sound", h.speed_of_sound},
                  {"hrir_length", h.hrir_length},
                  {"onset_samples", h.onset_samples},
                  {"shadow_pole_max", h.shadow_pole_max},
                  {"mic_spacing_m", h.mic_spacing_m},
                  {"tail_level_db", std::isfinite(h.tail_level_db) ? json(h.tail_level_db) : json(nullptr)},
                  {"tail_t60_ms", h.tail_t60_ms}}}};
  j["stft"] = {{"frame_len", c.stft.frame_len}, {"fft_bins", c.stft.fft_bins}, {"hop", c.stft.hop}};
  const DesignSpec& d = c.design;
  j["design"] = {{"snr_worst_db", d.snr_worst_db}, {"ild_max_db", d.ild_max_db}, {"itd_max_ms", d.itd_max_ms},
                 {"beta_min", d.beta_min},         {"beta_step", d.beta_step},   {"beta_max", d.beta_max},
                 {"mode", to_string(d.mode)},      {"monotone_tol", d.monotone_tol}};
  const SolverOptions& o = c.solver;
  j["solver"] = {{"max_iters", o.max_iters},
                 {"grad_tol", o.grad_tol},
                 {"armijo_c1", o.armijo_c1},
                 {"backtrack", o.backtrack},
                 {"max_backtracks", o.max_backtracks}};
  std::vector<std::string> methods, kinds;
  for (Method m : c.methods) methods.push_back(to_string(m));
  for (PenaltyKind k : c.penalties) kinds.push_back(to_string(k));
  j["methods"] = methods;
  j["penalties"] = kinds;
  j["sweep"] = {{"axis", to_string(c.sweep.axis)},
                {"start_db", c.sweep.start_db},
                {"stop_db", c.sweep.stop_db},
                {"step_db", c.sweep.step_db}};
  j["seeds"] = c.seeds;
  j["base_seed"] = c.base_seed;
  j["workers"] = c.workers;
  j["speech_estimate"] = to_string(c.speech_estimate);
  j["output_dir"] = c.output_dir;
  return j.dump(2) + "\n";
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return experiment_config_from_json(ss.str());
}

std::string config_hash(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  // Pool size and output location do not affect results.
  c.workers = 1;
  c.output_dir.clear();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : experiment_config_to_json(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

OperatingPoint operating_point(const ExperimentConfig& config, double axis_value) {
  if (config.sweep.axis == SweepAxis::kLombard) return {config.scene.snr_in_db, axis_value};
  // Speech level fixed at the design scene; the noise moves with the SNR.
  return {axis_value, config.scene.lombard_gain_sq_db + config.design.snr_worst_db - axis_value};
}

SceneAnalysis design_analysis(const ExperimentConfig& config) {
  config.validate();
  const SpatialScene scene = render_scene(config.scene, config.seed(0));
  return analyze_scene(scene, config.design.snr_worst_db, config.scene.lombard_gain_sq_db, config.stft,
                       config.scene.ref_mic_left, config.scene.resolved_ref_right(), SpeechEstimate::kOracle);
}

BetaProfile run_design(const ExperimentConfig& config) {
  const SceneAnalysis a = design_analysis(config);
  return design_beta(a.stats, config.stft, config.penalties, config.design, config.solver, config.workers);
}

double method_eta(const SceneAnalysis& analysis, const SceneSolution& solution, Method method,
                  const BetaProfile& profile) {
  const SceneStatistics& st = analysis.stats;
  const int bins = st.num_bins();
  if (profile.num_bins() != bins) throw InvalidArgument("eta: profile does not match the scene");
  const MethodSpec spec = method == Method::kMWF ? profile.robust_method() : profile.method(method);
  const FilterBank q = st.selection();
  std::vector<double> jm(bins, 0.0), jp(bins, 0.0), alpha(bins, 0.0);
  for (int k = 0; k < bins; ++k) {
    const BinDiagnostics& d = solution.diagnostics[k];
    if (d.passthrough) continue;
    const double a = spec.schedule.alpha(k, st.noise_power[k]);
    if (!(a > 0.0)) continue;
    try {
      for (PenaltyKind kind : profile.kinds) {
        jp[k] += j_penalty(kind, solution.filters.left(k), solution.filters.right(k), q.left(k), q.right(k),
                           st.phi_v.bins[k]);
      }
    } catch (const DegenerateMeasure&) {
      continue;
    }
    jm[k] = d.j_mwf;
    alpha[k] = a;
  }
  try {
    return eta_ratio(jm, jp, alpha);
  } catch (const InvalidArgument&) {
    return kNaN;
  }
}

MetricReport evaluate_method(const SceneAnalysis& analysis, Method method, const BetaProfile& profile,
                             const ExperimentConfig& config, int workers, SceneSolution* solution) {
  const SceneSolution sol = solve_scene(analysis.stats, profile.method(method), config.solver, workers);
  MetricReport r =
      evaluate_metrics(sol.filters, analysis.stats.selection(), analysis.phi_x_oracle, analysis.stats.phi_v, config.stft);
  r.eta = method_eta(analysis, sol, method, profile);
  if (!std::isfinite(r.eta)) r.flags += r.flags.empty() ? "eta" : ";eta";
  r.g_bar_sq_db = db_or_nan(analysis.power.g_bar_sq);
  r.snr_bar_in_db = db_or_nan(analysis.power.snr_bar_in);
  if (solution) *solution = sol;
  return r;
}

SweepResult run_sweep(const ExperimentConfig& config, const BetaProfile& profile) {
  config.validate();
  profile.validate();
  const std::vector<double> points = config.sweep.points();
  const int np = static_cast<int>(points.size());
  const int ns = config.seeds;
  const int nm = static_cast<int>(config.methods.size());

  // Rendering is shared by every axis point of a seed.
  std::vector<SpatialScene> scenes(ns);
  std::vector<std::string> render_errors(ns);
  detail::parallel_for(ns, config.workers, [&](int s) {
    try {
      scenes[s] = render_scene(config.scene, config.seed(s));
    } catch (const std::exception& e) {
      render_errors[s] = e.what();
    }
  });

  struct Cell {
    std::optional<MetricReport> report;
    std::string error;
  };
  std::vector<Cell> cells(static_cast<std::size_t>(np) * ns * nm);
  auto cell = [&](int p, int s, int m) -> Cell& { return cells[(static_cast<std::size_t>(p) * ns + s) * nm + m]; };

  detail::parallel_for(np * ns, config.workers, [&](int task) {
    const int p = task / ns;
    const int s = task % ns;
    if (!render_errors[s].empty()) {
      for (int m = 0; m < nm; ++m) cell(p, s, m).error = render_errors[s];
      return;
    }
    const OperatingPoint op = operating_point(config, points[p]);
    std::optional<SceneAnalysis> analysis;
    try {
      analysis = analyze_scene(scenes[s], op.snr_in_db, op.g_sq_db, config.stft, config.scene.ref_mic_left,
                               config.scene.resolved_ref_right(), config.speech_estimate);
    } catch (const std::exception& e) {
      for (int m = 0; m < nm; ++m) cell(p, s, m).error = e.what();
      return;
    }
    for (int m = 0; m < nm; ++m) {
      try {
        cell(p, s, m).report = evaluate_method(*analysis, config.methods[m], profile, config, 1);
      } catch (const std::exception& e) {
        cell(p, s, m).error = e.what();
      }
    }
  });

  SweepResult result;
  result.axis = config.sweep.axis;
  result.config_hash = config_hash(config);
  for (int s = 0; s < ns; ++s) result.seeds.push_back(config.seed(s));
  for (int p = 0; p < np; ++p) {
    for (int m = 0; m < nm; ++m) {
      SweepRow row;
      row.axis_value = points[p];
      row.method = config.methods[m];
      std::vector<const MetricReport*> ok;
      for (int s = 0; s < ns; ++s) {
        const Cell& c = cell(p, s, m);
        if (c.report) {
          ok.push_back(&*c.report);
        } else if (row.error.empty()) {
          row.error = "seed " + std::to_string(config.seed(s)) + ": " + c.error;
        }
      }
      row.seeds_ok = static_cast<int>(ok.size());
      if (ok.empty()) {
        row.metrics.delta_snr_left = row.metrics.delta_snr_right = kNaN;
        row.metrics.delta_ild_speech = row.metrics.delta_ild_noise = kNaN;
        row.metrics.delta_itd_speech = row.metrics.delta_itd_noise = kNaN;
      } else {
        row.metrics = mean_report(ok);
      }
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

std::string sweep_csv_header() { return "axis,axis_value_db,method,seeds_ok," + metric_csv_header() + ",error"; }

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
  os << sweep_csv_header() << '\n';
  for (const SweepRow& r : result.rows) {
    os << to_string(result.axis) << ',' << csv::format_double(r.axis_value) << ',' << to_string(r.method) << ','
       << r.seeds_ok << ',' << metric_csv_fields(r.metrics) << ',' << csv_escape(r.error) << '\n';
  }
}

SynthReport cmd_synth(const ExperimentConfig& config, const std::string& out_dir, std::uint64_t seed) {
  config.validate();
  const SpatialScene scene = render_scene(config.scene, seed);
  const MixedScene mix = mix_scene(scene.speech, scene.noise, config.scene.snr_in_db, config.scene.lombard_gain_sq_db);
  ensure_dir(out_dir);
  write_wav(join(out_dir, "x.wav"), mix.x);
  write_wav(join(out_dir, "v.wav"), mix.v);
  write_wav(join(out_dir, "y.wav"), mix.y);

  SynthReport rep{mix.speech_gain, mix.lombard_gain, power_to_db(total_power(mix.x) / total_power(mix.v))};
  json side = {{"seed", seed},
               {"speech_gain", rep.speech_gain},
               {"lombard_gain", rep.lombard_gain},
               {"snr_in_db", config.scene.snr_in_db},
               {"lombard_gain_sq_db", config.scene.lombard_gain_sq_db},
               {"measured_snr_db", rep.measured_snr_db},
               {"sample_rate", config.scene.sample_rate},
               {"channels", config.scene.num_mics()},
               {"samples", mix.y.length()},
               {"config_hash", config_hash(config)}};
  write_text(join(out_dir, "scene.json"), side.dump(2) + "\n");

  const SpectralFrameSet yf = stft_analyze(mix.y, config.stft);
  const SpectralFrameSet vf = stft_analyze(mix.v, config.stft);
  const SpectralFrameSet xf = stft_analyze(mix.x, config.stft);
  save_coherence_csv(join(out_dir, "phi_x.csv"), estimate_coherence(xf, CoherenceKind::kSpeech));
  save_coherence_csv(join(out_dir, "phi_v.csv"), estimate_coherence(vf, CoherenceKind::kNoise));
  save_coherence_csv(join(out_dir, "phi_y.csv"), estimate_coherence(yf, CoherenceKind::kNoisy));
  return rep;
}

BetaProfile cmd_design(const ExperimentConfig& config, const std::string& out_path) {
  try {
    BetaProfile p = run_design(config);
    save_beta_profile(out_path, p);
    return p;
  } catch (const DesignFailure& e) {
    json rep = {{"error", e.what()},
                {"best", {{"beta", e.best().beta}, {"delta_ild_n_db", e.best().ild_db},
                          {"delta_itd_n_ms", e.best().itd_ms}}},
                {"thresholds", {{"ild_max_db", config.design.ild_max_db}, {"itd_max_ms", config.design.itd_max_ms}}}};
    write_text(out_path + ".failure.json", rep.dump(2) + "\n");
    throw;
  }
}

MetricReport cmd_process(const ExperimentConfig& config, const ProcessOptions& o) {
  config.validate();
  const MultiSignal y = load_wav_checked(o.noisy_path, config);
  const MultiSignal v = load_wav_checked(o.noise_path, config);
  if (y.num_channels() != config.scene.num_mics()) {
    throw InvalidArgument(o.noisy_path + ": expected " + std::to_string(config.scene.num_mics()) + " channels");
  }
  const SceneAnalysis a = analyze_signals(y, v, config.stft, config.scene.ref_mic_left,
                                          config.scene.resolved_ref_right(),
                                          o.speech_estimate.value_or(SpeechEstimate::kSubtract));

  BetaProfile profile;
  if (!o.beta_profile_path.empty()) {
    profile = load_beta_profile(o.beta_profile_path);
  } else if (o.method != Method::kMWF && !o.passthrough) {
    throw InvalidArgument("method " + to_string(o.method) + " needs a beta profile");
  } else {
    profile.beta.assign(a.stats.num_bins(), 0.0);
    profile.ref_noise_power = a.stats.noise_power;
    profile.kinds = config.penalties;
  }

  SceneSolution sol;
  MetricReport r;
  if (o.passthrough) {
    sol.filters = a.stats.selection();
    r = evaluate_metrics(sol.filters, sol.filters, a.phi_x_oracle, a.stats.phi_v, config.stft);
    r.g_bar_sq_db = db_or_nan(a.power.g_bar_sq);
    r.snr_bar_in_db = db_or_nan(a.power.snr_bar_in);
  } else {
    r = evaluate_method(a, o.method, profile, config, config.workers, &sol);
  }

  ensure_dir(o.out_dir);
  const MultiSignal out = process_signal(y, sol.filters, config.stft);
  MultiSignal left{out.sample_rate, {out.channels[0]}};
  MultiSignal right{out.sample_rate, {out.channels[1]}};
  write_wav(join(o.out_dir, "left.wav"), left);
  write_wav(join(o.out_dir, "right.wav"), right);
  save_filter_csv(join(o.out_dir, "filters.csv"), sol.filters);
  write_text(join(o.out_dir, "metrics.csv"), metric_csv_header() + "\n" + metric_csv_fields(r) + "\n");
  return r;
}

MetricReport cmd_metrics(const ExperimentConfig& config, const MetricsOptions& o) {
  config.validate();
  const MultiSignal y = load_wav_checked(o.noisy_path, config);
  const MultiSignal v = load_wav_checked(o.noise_path, config);
  const SceneAnalysis a = analyze_signals(y, v, config.stft, config.scene.ref_mic_left,
                                          config.scene.resolved_ref_right(), SpeechEstimate::kOracle);
  const FilterBank w = load_filter_csv(o.filters_path);
  MetricReport r = evaluate_metrics(w, a.stats.selection(), a.phi_x_oracle, a.stats.phi_v, config.stft);
  r.g_bar_sq_db = db_or_nan(a.power.g_bar_sq);
  r.snr_bar_in_db = db_or_nan(a.power.snr_bar_in);
  if (!o.beta_profile_path.empty()) {
    const BetaProfile profile = load_beta_profile(o.beta_profile_path);
    // Per-bin MSE at the given filters; the diagnostics carry only j_mwf.
    SceneSolution sol{w, std::vector<BinDiagnostics>(w.num_bins())};
    const FilterBank q = a.stats.selection();
    for (int k = 0; k < w.num_bins(); ++k) {
      sol.diagnostics[k].j_mwf =
          j_mwf(w.left(k), w.right(k), a.stats.phi_x.bins[k], a.stats.phi_v.bins[k], q.left(k), q.right(k));
    }
    r.eta = method_eta(a, sol, o.method.value_or(Method::kMWF_ITF_R), profile);
  }
  if (!std::isfinite(r.eta) && !o.beta_profile_path.empty()) r.flags += r.flags.empty() ? "eta" : ";eta";
  return r;
}

SweepResult cmd_sweep(const ExperimentConfig& config, const std::string& out_csv,
                      const std::string& beta_profile_path) {
  const BetaProfile profile = beta_profile_path.empty() ? run_design(config) : load_beta_profile(beta_profile_path);
  const SweepResult result = run_sweep(config, profile);
  const auto parent = std::filesystem::path(out_csv).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
  std::ostringstream os;
  write_sweep_csv(os, result);
  write_text(out_csv, os.str());
  json meta = {{"config_hash", result.config_hash},
               {"seeds", result.seeds},
               {"axis", to_string(result.axis)},
               {"beta_profile", json::parse(beta_profile_to_json(profile))}};
  write_text(out_csv + ".meta.json", meta.dump(2) + "\n");
  return result;
}

}  // namespace bmwf
