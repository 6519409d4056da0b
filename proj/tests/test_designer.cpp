#include <bmwf/designer.hpp>
#include <bmwf/error.hpp>
#include <bmwf/experiment.hpp>
#include <bmwf/metrics.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

using namespace bmwf;

namespace {

const SceneAnalysis& design_scene() {
  static const SceneAnalysis a = design_analysis(ExperimentConfig{});
  return a;
}

struct CueErrors {
  double ild_db;
  double itd_ms;
};

// Noise cue errors of the robust solution at one scalar beta, computed
// through the metrics module.
CueErrors noise_cues_at(double beta) {
  const auto& a = design_scene();
  const StftConfig stft;
  const MethodSpec m = beta == 0.0 ? MethodSpec::mwf()
                                   : MethodSpec::robust(std::vector<double>(a.stats.num_bins(), beta));
  const auto sol = solve_scene(a.stats, m, SolverOptions{});
  const FilterBank q = a.stats.selection();
  const int ks = split_bin(stft.fft_bins, stft.sample_rate);
  return {std::abs(delta_ild(sol.filters, q, a.stats.phi_v, ks)),
          std::abs(delta_itd(sol.filters, q, a.stats.phi_v, ks, stft).delta_ms)};
}

const BetaProfile& default_profile() {
  static const BetaProfile p =
      design_beta(design_scene().stats, StftConfig{}, {PenaltyKind::kITF}, DesignSpec{}, SolverOptions{});
  return p;
}

}  // namespace

TEST(DesignSpec, GridIsOneDbMultiplicative) {
  DesignSpec s;
  const auto g = s.grid();
  ASSERT_EQ(g.size(), 91u);  // 1e-6 .. 1e3 in 1 dB steps
  EXPECT_DOUBLE_EQ(g.front(), 1e-6);
  EXPECT_NEAR(g.back(), 1e3, 1e-9);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(10.0 * std::log10(g[i] / g[i - 1]), 1.0, 1e-12);
}

TEST(DesignSpec, Validation) {
  DesignSpec s;
  s.snr_worst_db = std::nan("");
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = DesignSpec{};
  s.ild_max_db = -1.0;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = DesignSpec{};
  s.beta_min = 2e3;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = DesignSpec{};
  s.beta_step = 1.0;
  EXPECT_THROW(s.validate(), InvalidArgument);
  EXPECT_EQ(parse_design_mode(to_string(DesignMode::kPerBin)), DesignMode::kPerBin);
  EXPECT_THROW(parse_design_mode("both"), InvalidArgument);
}

TEST(Designer, LooseThresholdsKeepPlainMwf) {
  DesignSpec s;
  s.ild_max_db = 1e6;
  s.itd_max_ms = 1e6;
  for (DesignMode mode : {DesignMode::kScalar, DesignMode::kPerBin}) {
    s.mode = mode;
    auto p = design_beta(design_scene().stats, StftConfig{}, {PenaltyKind::kITF}, s, SolverOptions{});
    for (double b : p.beta) EXPECT_EQ(b, 0.0);
    EXPECT_EQ(p.trace.size(), 1u);
  }
}

TEST(Designer, ZeroThresholdsFailAtBetaMax) {
  DesignSpec s;
  s.ild_max_db = 0.0;
  s.itd_max_ms = 0.0;
  s.monotone_tol = std::numeric_limits<double>::infinity();  // trend check off
  try {
    design_beta(design_scene().stats, StftConfig{}, {PenaltyKind::kITF}, s, SolverOptions{});
    FAIL() << "expected DesignFailure";
  } catch (const DesignFailure& e) {
    EXPECT_EQ(e.code(), ExitCode::kDesignFailure);
    EXPECT_NE(std::string(e.what()).find("beta_max"), std::string::npos) << e.what();
    EXPECT_GT(e.best().ild_db + e.best().itd_ms, 0.0);
  }
}

TEST(Designer, TrendCheckAbortsOnGrowingCueError) {
  // |dILD_N| passes through zero as beta grows, so with thresholds that are
  // never met the trend check fires before beta_max.
  DesignSpec s;
  s.ild_max_db = 0.0;
  s.itd_max_ms = 0.0;
  try {
    design_beta(design_scene().stats, StftConfig{}, {PenaltyKind::kITF}, s, SolverOptions{});
    FAIL() << "expected DesignFailure";
  } catch (const DesignFailure& e) {
    EXPECT_NE(std::string(e.what()).find("increased"), std::string::npos) << e.what();
  }
}

TEST(Designer, DefaultDesignIsSelfConsistentAndMinimal) {
  const auto& p = default_profile();
  const double beta = p.beta.at(0);
  ASSERT_GT(beta, 0.0);
  for (double b : p.beta) EXPECT_EQ(b, beta);

  const CueErrors at = noise_cues_at(beta);
  EXPECT_LT(at.ild_db, 2.0);
  EXPECT_LT(at.itd_ms, 2.0);
  EXPECT_NEAR(at.ild_db, p.achieved_ild_db, 1e-12);
  EXPECT_NEAR(at.itd_ms, p.achieved_itd_ms, 1e-12);

  const double below = beta / p.spec.beta_step;
  const CueErrors prev = noise_cues_at(below < p.spec.beta_min * 0.999 ? 0.0 : below);
  EXPECT_TRUE(prev.ild_db >= 2.0 || prev.itd_ms >= 2.0);
}

TEST(Designer, TraceIsNearlyMonotone) {
  const auto& p = default_profile();
  ASSERT_GE(p.trace.size(), 2u);
  EXPECT_EQ(p.trace.front().beta, 0.0);
  for (std::size_t i = 1; i < p.trace.size(); ++i) {
    const DesignStep& a = p.trace[i - 1];
    EXPECT_LE(p.trace[i].ild_db, a.ild_db + p.spec.monotone_tol * std::max(p.spec.ild_max_db, a.ild_db));
    EXPECT_LE(p.trace[i].itd_ms, a.itd_ms + p.spec.monotone_tol * std::max(p.spec.itd_max_ms, a.itd_ms));
  }
}

TEST(ResolveAlpha, UnitPowerMakesSchedulesCoincide) {
  PowerProfile pw;
  pw.num_frames = 3;
  pw.num_bins = 2;
  pw.g_sq.assign(6, 1.0);
  BetaProfile p;
  p.beta = {0.5, 2.0};
  p.ref_noise_power = {1.0, 1.0};
  p.dynamic = true;
  const auto dyn = resolve_alpha(p, pw);
  p.dynamic = false;
  EXPECT_EQ(resolve_alpha(p, pw), dyn);

  for (double& g : pw.g_sq) g *= 100.0;
  const auto fixed = resolve_alpha(p, pw);
  p.dynamic = true;
  const auto dyn100 = resolve_alpha(p, pw);
  for (std::size_t i = 0; i < dyn.size(); ++i) {
    EXPECT_DOUBLE_EQ(dyn100[i], 100.0 * dyn[i]);
    EXPECT_DOUBLE_EQ(fixed[i], dyn[i]);
  }
}

TEST(ResolveAlpha, UnitBetaGivesNoisePower) {
  SceneConfig cfg;
  cfg.duration_s = 0.5;
  auto scene = render_scene(cfg, 3);
  auto a = analyze_scene(scene, 20.0, 0.0, StftConfig{}, 0, 3);
  BetaProfile p;
  p.beta.assign(a.stats.num_bins(), 1.0);
  p.ref_noise_power = a.stats.noise_power;
  const auto alpha = resolve_alpha(p, a.power);
  for (int l = 0; l < a.power.num_frames; l += 11)
    for (int k = 0; k < a.power.num_bins; ++k) {
      EXPECT_NEAR(alpha[l * a.power.num_bins + k], a.stats.phi_v.bins[k].trace().real(),
                  1e-12 * a.stats.phi_v.bins[k].trace().real());
    }
}

TEST(ResolveAlpha, BinMismatchThrows) {
  PowerProfile pw;
  pw.num_frames = 1;
  pw.num_bins = 3;
  pw.g_sq.assign(3, 1.0);
  BetaProfile p;
  p.beta = {1.0};
  EXPECT_THROW(resolve_alpha(p, pw), InvalidArgument);
}

TEST(BetaProfile, MethodsUseTheirWeightRules) {
  BetaProfile p;
  p.beta = {2.0, 3.0};
  p.ref_noise_power = {5.0, 7.0};
  EXPECT_DOUBLE_EQ(p.fixed_method().terms(1, 100.0).at(0).alpha, 21.0);
  EXPECT_DOUBLE_EQ(p.robust_method().terms(1, 100.0).at(0).alpha, 300.0);
  EXPECT_TRUE(p.method(Method::kMWF).terms(0, 1.0).empty());
}

TEST(BetaProfile, JsonRoundTrip) {
  const auto& p = default_profile();
  const auto back = beta_profile_from_json(beta_profile_to_json(p));
  EXPECT_EQ(back.beta, p.beta);
  EXPECT_EQ(back.ref_noise_power, p.ref_noise_power);
  EXPECT_EQ(back.kinds, p.kinds);
  EXPECT_EQ(back.dynamic, p.dynamic);
  EXPECT_EQ(back.achieved_ild_db, p.achieved_ild_db);
  EXPECT_EQ(back.spec.beta_step, p.spec.beta_step);
  ASSERT_EQ(back.trace.size(), p.trace.size());
  EXPECT_EQ(back.trace.back().itd_ms, p.trace.back().itd_ms);

  const auto path = std::filesystem::temp_directory_path() / "bmwf_profile_test.json";
  save_beta_profile(path.string(), p);
  EXPECT_EQ(load_beta_profile(path.string()).beta, p.beta);
  std::filesystem::remove(path);
}

TEST(BetaProfile, RejectsBadInput) {
  EXPECT_THROW(beta_profile_from_json("{"), Error);
  EXPECT_THROW(beta_profile_from_json(R"({"format":"other"})"), Error);
  EXPECT_THROW(load_beta_profile("/nonexistent/dir/p.json"), IoError);
  BetaProfile p;
  p.beta = {-1.0};
  p.ref_noise_power = {1.0};
  EXPECT_THROW(p.validate(), InvalidArgument);
}
