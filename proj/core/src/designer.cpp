#include "bmwf/designer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bmwf/metrics.hpp"

namespace bmwf {
namespace {

using nlohmann::json;

bool meets(const DesignStep& s, const DesignSpec& spec) { return s.ild_db < spec.ild_max_db && s.itd_ms < spec.itd_max_ms; }

// Normalized distance to the thresholds; smaller is better.
double shortfall(const DesignStep& s, const DesignSpec& spec) {
  return std::max(s.ild_db / spec.ild_max_db, s.itd_ms / spec.itd_max_ms);
}

MethodSpec method_for(double beta, int bins, const std::vector<PenaltyKind>& kinds) {
  if (beta == 0.0) return MethodSpec::mwf();
  return MethodSpec::robust(std::vector<double>(bins, beta), kinds);
}

std::string describe(const DesignStep& s) {
  std::ostringstream os;
  os << "beta=" << s.beta << " |dILD_N|=" << s.ild_db << " dB |dITD_N|=" << s.itd_ms << " ms";
  return os.str();
}

BetaProfile scalar_design(const SceneStatistics& stats, const StftConfig& stft, const std::vector<PenaltyKind>& kinds,
                          const DesignSpec& spec, const SolverOptions& options, int workers) {
  const int bins = stats.num_bins();
  const FilterBank q = stats.selection();
  const int ks = split_bin(stft.fft_bins, stft.sample_rate);

  BetaProfile profile;
  profile.kinds = kinds;
  profile.spec = spec;
  profile.ref_noise_power = stats.noise_power;

  std::vector<double> betas{0.0};
  const auto g = spec.grid();
  betas.insert(betas.end(), g.begin(), g.end());

  DesignStep best{};
  bool have_best = false;
  for (double beta : betas) {
    const SceneSolution sol = solve_scene(stats, method_for(beta, bins, kinds), options, workers);
    DesignStep step{beta, std::abs(delta_ild(sol.filters, q, stats.phi_v, ks)),
                    std::abs(delta_itd(sol.filters, q, stats.phi_v, ks, stft).delta_ms)};
    if (!profile.trace.empty()) {
      const DesignStep& prev = profile.trace.back();
      if (step.ild_db > prev.ild_db + spec.monotone_tol * std::max(spec.ild_max_db, prev.ild_db) ||
          step.itd_ms > prev.itd_ms + spec.monotone_tol * std::max(spec.itd_max_ms, prev.itd_ms)) {
        throw DesignFailure("design: noise cue error increased with beta (" + describe(prev) + " -> " +
                                describe(step) + ")",
                            have_best ? best : step);
      }
    }
    profile.trace.push_back(step);
    if (!have_best || shortfall(step, spec) < shortfall(best, spec)) {
      best = step;
      have_best = true;
    }
    if (meets(step, spec)) {
      profile.beta.assign(bins, beta);
      profile.achieved_ild_db = step.ild_db;
      profile.achieved_itd_ms = step.itd_ms;
      return profile;
    }
  }
  throw DesignFailure("design: thresholds not met up to beta_max; best " + describe(best), best);
}

BetaProfile per_bin_design(const SceneStatistics& stats, const StftConfig& stft,
                           const std::vector<PenaltyKind>& kinds, const DesignSpec& spec,
                           const SolverOptions& options, int workers) {
  const int bins = stats.num_bins();
  const FilterBank q = stats.selection();
  const int ks = split_bin(stft.fft_bins, stft.sample_rate);

  BetaProfile profile;
  profile.kinds = kinds;
  profile.spec = spec;
  profile.ref_noise_power = stats.noise_power;
  profile.beta.assign(bins, 0.0);

  std::vector<double> betas{0.0};
  const auto g = spec.grid();
  betas.insert(betas.end(), g.begin(), g.end());

  std::vector<bool> done(bins, false);
  int remaining = bins;
  FilterBank chosen(stats.num_mics(), bins);
  for (double beta : betas) {
    const SceneSolution sol = solve_scene(stats, method_for(beta, bins, kinds), options, workers);
    for (int k = 0; k < bins; ++k) {
      if (done[k]) continue;
      bool ok = false;
      try {
        const double f = stft.bin_frequency(k);
        const BinCueError e = bin_cue_error(sol.filters.left(k), sol.filters.right(k), q.left(k), q.right(k),
                                            stats.phi_v.bins[k], (k >= 1 && k <= ks) ? f : 0.0);
        ok = e.ild_db < spec.ild_max_db && e.itd_ms < spec.itd_max_ms;
      } catch (const DegenerateMeasure&) {
        ok = false;
      }
      if (ok) {
        done[k] = true;
        --remaining;
        profile.beta[k] = beta;
        chosen.left(k) = sol.filters.left(k);
        chosen.right(k) = sol.filters.right(k);
      }
    }
    // Per-bin traces record the number of unsatisfied bins in ild_db.
    profile.trace.push_back({beta, static_cast<double>(remaining), 0.0});
    if (remaining == 0) break;
  }
  if (remaining > 0) {
    DesignStep best{spec.beta_max, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    throw DesignFailure("design: " + std::to_string(remaining) + " bins miss the per-bin thresholds at beta_max",
                        best);
  }
  profile.achieved_ild_db = std::abs(delta_ild(chosen, q, stats.phi_v, ks));
  profile.achieved_itd_ms = std::abs(delta_itd(chosen, q, stats.phi_v, ks, stft).delta_ms);
  return profile;
}

}  // namespace

std::string to_string(DesignMode mode) { return mode == DesignMode::kScalar ? "scalar" : "per-bin"; }

DesignMode parse_design_mode(const std::string& name) {
  if (name == "scalar") return DesignMode::kScalar;
  if (name == "per-bin") return DesignMode::kPerBin;
  throw InvalidArgument("unknown design mode '" + name + "'");
}

void DesignSpec::validate() const {
  if (!std::isfinite(snr_worst_db)) throw InvalidArgument("design: snr_worst must be finite");
  if (!(ild_max_db >= 0.0) || !(itd_max_ms >= 0.0)) throw InvalidArgument("design: thresholds must be >= 0");
  if (!(beta_min > 0.0) || !(beta_min < beta_max) || !std::isfinite(beta_max)) {
    throw InvalidArgument("design: need 0 < beta_min < beta_max");
  }
  if (!(beta_step > 1.0)) throw InvalidArgument("design: beta_step must exceed 1");
  if (!(monotone_tol >= 0.0)) throw InvalidArgument("design: monotone_tol must be >= 0");
}

std::vector<double> DesignSpec::grid() const {
  validate();
  std::vector<double> g;
  // Index-based so the grid does not accumulate rounding error.
  for (int i = 0;; ++i) {
    const double b = beta_min * std::pow(beta_step, i);
    if (b > beta_max * (1.0 + 1e-12)) break;
    g.push_back(b);
  }
  return g;
}

MethodSpec BetaProfile::robust_method() const { return MethodSpec::robust(beta, kinds); }

MethodSpec BetaProfile::fixed_method() const {
  std::vector<double> b(beta.size());
  for (std::size_t k = 0; k < beta.size(); ++k) b[k] = beta[k] * ref_noise_power.at(k);
  return MethodSpec::fixed(std::move(b), kinds);
}

MethodSpec BetaProfile::method(Method m) const {
  switch (m) {
    case Method::kMWF:
      return MethodSpec::mwf();
    case Method::kMWF_ITF:
      return fixed_method();
    case Method::kMWF_ITF_R:
      return robust_method();
  }
  throw InvalidArgument("unknown method");
}

void BetaProfile::validate() const {
  if (beta.empty()) throw InvalidArgument("beta profile: empty");
  if (ref_noise_power.size() != beta.size()) throw InvalidArgument("beta profile: ref_noise_power size mismatch");
  for (double b : beta) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw InvalidArgument("beta profile: beta must be finite and >= 0");
  }
  for (double p : ref_noise_power) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("beta profile: bad reference noise power");
  }
  if (kinds.empty()) throw InvalidArgument("beta profile: no penalty kinds");
}

BetaProfile design_beta(const SceneStatistics& stats, const StftConfig& stft, const std::vector<PenaltyKind>& kinds,
                        const DesignSpec& spec, const SolverOptions& options, int workers) {
  spec.validate();
  stats.validate();
  if (kinds.empty()) throw InvalidArgument("design: no penalty kinds");
  if (stats.num_bins() != stft.num_bins()) throw InvalidArgument("design: statistics do not match the STFT");
  return spec.mode == DesignMode::kScalar ? scalar_design(stats, stft, kinds, spec, options, workers)
                                          : per_bin_design(stats, stft, kinds, spec, options, workers);
}

std::vector<double> resolve_alpha(const BetaProfile& profile, const PowerProfile& power) {
  if (profile.num_bins() != power.num_bins) throw InvalidArgument("resolve_alpha: bin count mismatch");
  std::vector<double> alpha(power.g_sq.size());
  for (int l = 0; l < power.num_frames; ++l) {
    for (int k = 0; k < power.num_bins; ++k) {
      const std::size_t i = static_cast<std::size_t>(l) * power.num_bins + k;
      alpha[i] = profile.dynamic ? profile.beta[k] * power.g_sq[i] : profile.beta[k];
    }
  }
  return alpha;
}

std::string beta_profile_to_json(const BetaProfile& p) {
  json j;
  j["format"] = "bmwf-beta-profile";
  j["version"] = 1;
  j["dynamic"] = p.dynamic;
  std::vector<std::string> kinds;
  for (PenaltyKind k : p.kinds) kinds.push_back(to_string(k));
  j["kinds"] = kinds;
  j["beta"] = p.beta;
  j["ref_noise_power"] = p.ref_noise_power;
  j["achieved"] = {{"delta_ild_n_db", p.achieved_ild_db}, {"delta_itd_n_ms", p.achieved_itd_ms}};
  j["design"] = {{"snr_worst_db", p.spec.snr_worst_db}, {"ild_max_db", p.spec.ild_max_db},
                 {"itd_max_ms", p.spec.itd_max_ms},     {"beta_min", p.spec.beta_min},
                 {"beta_step", p.spec.beta_step},       {"beta_max", p.spec.beta_max},
                 {"mode", to_string(p.spec.mode)},      {"monotone_tol", p.spec.monotone_tol}};
  json trace = json::array();
  for (const DesignStep& s : p.trace) trace.push_back({{"beta", s.beta}, {"ild_db", s.ild_db}, {"itd_ms", s.itd_ms}});
  j["trace"] = trace;
  return j.dump(2) + "\n";
}

BetaProfile beta_profile_from_json(const std::string& text) {
  BetaProfile p;
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "bmwf-beta-profile") throw InvalidArgument("beta profile: unknown format");
    p.dynamic = j.at("dynamic").get<bool>();
    p.kinds.clear();
    for (const auto& k : j.at("kinds")) p.kinds.push_back(parse_penalty_kind(k.get<std::string>()));
    p.beta = j.at("beta").get<std::vector<double>>();
    p.ref_noise_power = j.at("ref_noise_power").get<std::vector<double>>();
    const json& a = j.at("achieved");
    p.achieved_ild_db = a.at("delta_ild_n_db").get<double>();
    p.achieved_itd_ms = a.at("delta_itd_n_ms").get<double>();
    if (j.contains("design")) {
      const json& d = j.at("design");
      p.spec.snr_worst_db = d.value("snr_worst_db", p.spec.snr_worst_db);
      p.spec.ild_max_db = d.value("ild_max_db", p.spec.ild_max_db);
      p.spec.itd_max_ms = d.value("itd_max_ms", p.spec.itd_max_ms);
      p.spec.beta_min = d.value("beta_min", p.spec.beta_min);
      p.spec.beta_step = d.value("beta_step", p.spec.beta_step);
      p.spec.beta_max = d.value("beta_max", p.spec.beta_max);
      p.spec.mode = parse_design_mode(d.value("mode", std::string("scalar")));
      p.spec.monotone_tol = d.value("monotone_tol", p.spec.monotone_tol);
    }
    if (j.contains("trace")) {
      for (const auto& s : j.at("trace")) {
        p.trace.push_back({s.at("beta").get<double>(), s.at("ild_db").get<double>(), s.at("itd_ms").get<double>()});
      }
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("beta profile: ") + e.what());
  }
  p.validate();
  return p;
}

void save_beta_profile(const std::string& path, const BetaProfile& profile) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << beta_profile_to_json(profile);
  if (!os) throw IoError("write failed: " + path);
}

BetaProfile load_beta_profile(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return beta_profile_from_json(ss.str());
}

}  // namespace bmwf
