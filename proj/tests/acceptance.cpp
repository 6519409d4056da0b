// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 125).

#include <bmwf/costs.hpp>
#include <bmwf/designer.hpp>
#include <bmwf/experiment.hpp>
#include <bmwf/metrics.hpp>
#include <bmwf/pipeline.hpp>
#include <bmwf/solver.hpp>
#include <bmwf/stft.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"

using namespace bmwf;

namespace {

// Pinned tolerances and budgets.
constexpr double kRoundTripTol = 1e-8;
constexpr double kRoundTripBudgetS = 1.0;
constexpr double kHomogeneityTol = 1e-10;
constexpr double kHomogeneityBudgetS = 10.0;
constexpr double kArgminTol = 1e-4;
constexpr double kArgminBudgetS = 300.0;
constexpr double kRobustIldSpreadDb = 0.5;
constexpr double kRobustItdSpreadMs = 0.2;
constexpr double kEtaRatioMax = 2.0;
constexpr double kFdStep = 1e-6;
constexpr double kGradientTol = 1e-5;
constexpr double kClosedFormTol = 1e-5;
constexpr double kGridStep = 0.05;
constexpr double kGridHalfWidth = 2.0;
constexpr int kGridInstances = 20;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Shared artifacts, built once.
struct Fixture {
  ExperimentConfig config;
  BetaProfile profile;
  SweepResult lombard;
  std::string lombard_csv;

  Fixture() {
    profile = run_design(config);
    lombard = run_sweep(config, profile);
    std::ostringstream os;
    write_sweep_csv(os, lombard);
    lombard_csv = os.str();
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

std::map<Method, std::vector<const SweepRow*>> rows_by_method(const SweepResult& r) {
  std::map<Method, std::vector<const SweepRow*>> m;
  for (const auto& row : r.rows) m[row.method].push_back(&row);
  return m;
}

std::string row_errors(const SweepResult& r) {
  std::string e;
  for (const auto& row : r.rows)
    if (!row.error.empty()) e += " [" + to_string(row.method) + "@" + fmt("%g", row.axis_value) + ": " + row.error + "]";
  return e;
}

// 1 ---------------------------------------------------------------------
Outcome stft_round_trip() {
  const StftConfig c;
  std::mt19937_64 rng(101);
  std::normal_distribution<double> g(0.0, 1.0);
  MultiSignal s = MultiSignal::zeros(1, 16000, c.sample_rate);
  for (double& v : s.channels[0]) v = g(rng);
  const auto t0 = Clock::now();
  const MultiSignal out = stft_synthesize(stft_analyze(s, c));
  const double secs = seconds_since(t0);
  double num = 0.0, den = 0.0;
  for (std::size_t i = c.frame_len; i + c.frame_len < s.length(); ++i) {
    num += (out.channels[0][i] - s.channels[0][i]) * (out.channels[0][i] - s.channels[0][i]);
    den += s.channels[0][i] * s.channels[0][i];
  }
  const double err = std::sqrt(num / den);
  return {err < kRoundTripTol && secs < kRoundTripBudgetS, fmt("interior rel L2 error %.3g, %.3f s", err, secs)};
}

// 2 ---------------------------------------------------------------------
Outcome homogeneity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(102);
  const std::vector<double> c2{1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4, 1e5};
  const PenaltyKind kinds[] = {PenaltyKind::kITF, PenaltyKind::kILD, PenaltyKind::kITD, PenaltyKind::kIC};
  double worst_mwf = 0.0, worst_pen = 0.0;
  const int m = 4;
  const CVector ql = oracle::unit(m, 0), qr = oracle::unit(m, m - 1);
  for (int t = 0; t < 100; ++t) {
    const CMatrix px = oracle::random_psd(m, rng), pv = oracle::random_psd(m, rng);
    const CVector wl = oracle::random_cvector(m, rng), wr = oracle::random_cvector(m, rng);
    const double j0 = j_mwf(wl, wr, px, pv, ql, qr);
    double p0[4];
    for (int i = 0; i < 4; ++i) p0[i] = j_penalty(kinds[i], wl, wr, ql, qr, pv);
    for (double c : c2) {
      const CMatrix sx = c * px, sv = c * pv;
      worst_mwf = std::max(worst_mwf, std::abs(j_mwf(wl, wr, sx, sv, ql, qr) - c * j0) / (c * j0));
      for (int i = 0; i < 4; ++i) {
        const double p = j_penalty(kinds[i], wl, wr, ql, qr, sv);
        worst_pen = std::max(worst_pen, std::abs(p - p0[i]) / std::max(p0[i], 1e-300));
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst_mwf < kHomogeneityTol && worst_pen < kHomogeneityTol && secs < kHomogeneityBudgetS,
          fmt("max rel error J_MWF %.3g, penalties %.3g, %.2f s", worst_mwf, worst_pen, secs)};
}

// 3 ---------------------------------------------------------------------
Outcome argmin_invariance() {
  const auto t0 = Clock::now();
  const auto& f = fixture();
  const auto& cfg = f.config;
  const SpatialScene scene = render_scene(cfg.scene, cfg.seed(0));
  const MethodSpec robust = f.profile.robust_method();
  FilterBank base;
  double worst = 0.0;
  bool converged = true;
  for (double g = 0.0; g <= 30.0 + 1e-9; g += 5.0) {
    const auto a = analyze_scene(scene, cfg.scene.snr_in_db, g, cfg.stft, cfg.scene.ref_mic_left,
                                 cfg.scene.resolved_ref_right());
    const auto sol = solve_scene(a.stats, robust, cfg.solver, cfg.workers);
    for (const auto& d : sol.diagnostics) converged = converged && (d.converged || d.passthrough);
    if (g == 0.0) {
      base = sol.filters;
    } else {
      worst = std::max(worst, relative_difference(sol.filters, base));
    }
  }
  const double secs = seconds_since(t0);
  return {worst < kArgminTol && converged && secs < kArgminBudgetS,
          fmt("beta %.3g, max rel filter change %.3g over 0..30 dB, all bins converged: %s, %.1f s",
              f.profile.beta.at(0), worst, converged ? "yes" : "no", secs)};
}

// 4 ---------------------------------------------------------------------
Outcome fixed_weight_degradation() {
  const auto& f = fixture();
  const std::string errs = row_errors(f.lombard);
  if (!errs.empty()) return {false, "sweep rows failed:" + errs};
  auto by = rows_by_method(f.lombard);
  const auto& mwf = by[Method::kMWF];
  const auto& fixed = by[Method::kMWF_ITF];
  const auto& rob = by[Method::kMWF_ITF_R];

  // The trend concerns the size of the cue error, so magnitudes are compared.
  bool increasing = true, gap_shrinks = true;
  std::string series = "|dILD_N| MWF-ITF:";
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    const double e = std::abs(fixed[i]->metrics.delta_ild_noise);
    const double gap = std::abs(e - std::abs(mwf[i]->metrics.delta_ild_noise));
    series += fmt(" %.3f", e);
    if (i > 0) {
      const double pe = std::abs(fixed[i - 1]->metrics.delta_ild_noise);
      const double pgap = std::abs(pe - std::abs(mwf[i - 1]->metrics.delta_ild_noise));
      increasing = increasing && e > pe;
      gap_shrinks = gap_shrinks && gap <= pgap;
    }
  }
  series += fmt(" (MWF %.3f)", std::abs(mwf[0]->metrics.delta_ild_noise));
  double ild_lo = 1e300, ild_hi = -1e300, itd_lo = 1e300, itd_hi = -1e300;
  for (const auto* r : rob) {
    ild_lo = std::min(ild_lo, r->metrics.delta_ild_noise);
    ild_hi = std::max(ild_hi, r->metrics.delta_ild_noise);
    itd_lo = std::min(itd_lo, r->metrics.delta_itd_noise);
    itd_hi = std::max(itd_hi, r->metrics.delta_itd_noise);
  }
  const bool flat = (ild_hi - ild_lo) < kRobustIldSpreadDb && (itd_hi - itd_lo) < kRobustItdSpreadMs;
  return {increasing && gap_shrinks && flat,
          fmt("strictly increasing %s, gap shrinking %s, MWF-ITF-R spread dILD_N %.2e dB dITD_N %.2e ms; ",
              increasing ? "yes" : "no", gap_shrinks ? "yes" : "no", ild_hi - ild_lo, itd_hi - itd_lo) +
              series};
}

// 5 ---------------------------------------------------------------------
Outcome eta_behaviour() {
  const auto& f = fixture();
  ExperimentConfig cfg = f.config;
  cfg.sweep.axis = SweepAxis::kSnr;
  cfg.sweep.start_db = -5.0;
  cfg.sweep.stop_db = 25.0;
  cfg.sweep.step_db = 5.0;
  const SweepResult res = run_sweep(cfg, f.profile);
  const std::string errs = row_errors(res);
  if (!errs.empty()) return {false, "sweep rows failed:" + errs};
  auto by = rows_by_method(res);
  double lo = 1e300, hi = 0.0;
  for (const auto* r : by[Method::kMWF_ITF_R]) {
    lo = std::min(lo, r->metrics.eta);
    hi = std::max(hi, r->metrics.eta);
  }
  bool decreasing = true;
  std::string series = "MWF-ITF eta:";
  const SweepRow* prev = nullptr;
  for (const auto* r : by[Method::kMWF_ITF]) {
    series += fmt(" %.3g", r->metrics.eta);
    if (r->axis_value < 0.0) continue;
    if (prev != nullptr) decreasing = decreasing && r->metrics.eta < prev->metrics.eta;
    prev = r;
  }
  const double ratio = hi / lo;
  return {ratio < kEtaRatioMax && decreasing,
          fmt("MWF-ITF-R eta max/min %.3f, MWF-ITF strictly decreasing for snr >= 0: %s; ", ratio,
              decreasing ? "yes" : "no") +
              series};
}

// 6 ---------------------------------------------------------------------
Outcome gradients() {
  std::mt19937_64 rng(106);
  double worst = 0.0;
  const int m = 3;
  for (PenaltyKind kind : {PenaltyKind::kITF, PenaltyKind::kILD, PenaltyKind::kITD, PenaltyKind::kIC}) {
    int done = 0;
    while (done < 50) {
      BinProblem p{oracle::random_psd(m, rng), oracle::random_psd(m, rng), oracle::unit(m, 0), oracle::unit(m, 2)};
      const CVector wl = oracle::random_cvector(m, rng), wr = oracle::random_cvector(m, rng);
      if (kind == PenaltyKind::kITD) {
        // The wrapped phase difference jumps on its branch cut.
        const double d = std::abs(oracle::wrap(std::arg(oracle::quad(wl, p.phi_v, wr)) -
                                               std::arg(oracle::quad(p.q_left, p.phi_v, p.q_right))));
        if (d > oracle::kPi - 0.05) continue;
      }
      const AugmentedCost cost(p, {{kind, 0.7}});
      const Eigen::VectorXd x = pack_filters(wl, wr);
      Eigen::VectorXd g;
      cost.value_and_gradient(x, g);
      const Eigen::VectorXd fd =
          oracle::fd_gradient([&](const Eigen::VectorXd& v) { return cost.value(v); }, x, kFdStep);
      // Coordinates far below the gradient's scale are compared absolutely.
      const double floor = 1e-3 * fd.cwiseAbs().maxCoeff();
      for (int i = 0; i < g.size(); ++i)
        worst = std::max(worst, std::abs(g[i] - fd[i]) / std::max(std::abs(fd[i]), floor));
      ++done;
    }
  }
  return {worst < kGradientTol, fmt("worst per-coordinate relative error %.3g over 4 x 50 points", worst)};
}

// 7 ---------------------------------------------------------------------
Outcome closed_form_equivalence() {
  const auto& cfg = fixture().config;
  const auto a = design_analysis(cfg);
  SolverOptions o = cfg.solver;
  o.init = InitStrategy::kSelection;  // make BFGS do the work
  const std::vector<PenaltyTerm> terms{{PenaltyKind::kITF, 0.0}};
  double worst = 0.0;
  int worst_bin = -1;
  for (int k = 0; k < a.stats.num_bins(); ++k) {
    const BinProblem p = a.stats.problem(k);
    const auto [cl, cr] = solve_mwf_closed_form(p.phi_x, p.phi_v, p.q_left, p.q_right);
    const BinSolution s = solve_augmented(p, terms, o);
    const double d = std::sqrt((s.w_left - cl).squaredNorm() + (s.w_right - cr).squaredNorm()) /
                     std::sqrt(cl.squaredNorm() + cr.squaredNorm());
    if (d > worst) {
      worst = d;
      worst_bin = k;
    }
  }
  return {worst < kClosedFormTol, fmt("max ||dW||/||W|| %.3g (bin %d) over 129 bins", worst, worst_bin)};
}

// 8 ---------------------------------------------------------------------
Outcome brute_force() {
  std::mt19937_64 rng(108);
  std::normal_distribution<double> g(0.0, 1.0);
  int done = 0, beaten = 0, skipped = 0;
  double worst_margin = -1e300;
  while (done < kGridInstances) {
    Eigen::Matrix2d bx, bv;
    bx << g(rng), g(rng), g(rng), g(rng);
    bv << g(rng), g(rng), g(rng), g(rng);
    const Eigen::Matrix2d px = bx * bx.transpose();
    const Eigen::Matrix2d pv = bv * bv.transpose() + 0.2 * Eigen::Matrix2d::Identity();
    const double alpha = 0.5;
    BinProblem p{px.cast<cplx>(), pv.cast<cplx>(), oracle::unit(2, 0), oracle::unit(2, 1)};
    const std::vector<PenaltyTerm> terms{{PenaltyKind::kITF, alpha}};
    const BinSolution s = solve_augmented(p, terms, SolverOptions{});
    const double reach = 0.95 * kGridHalfWidth;
    if (s.w_left.real().cwiseAbs().maxCoeff() > reach || s.w_right.real().cwiseAbs().maxCoeff() > reach) {
      ++skipped;  // optimum outside the searched box
      continue;
    }
    const auto best = oracle::RealToyGrid(px, pv, alpha, kGridHalfWidth, kGridStep).minimize();
    const double margin = s.diagnostics.j_total - (best.cost + best.slack);
    worst_margin = std::max(worst_margin, margin);
    if (margin > 0.0) ++beaten;
    ++done;
  }
  return {beaten == 0, fmt("%d instances, grid beat BFGS beyond slack in %d; worst J_bfgs - (J_grid + slack) %.3g; "
                           "%d draws skipped (optimum outside box)",
                           done, beaten, worst_margin, skipped)};
}

// 9 ---------------------------------------------------------------------
Outcome designer_contract() {
  const auto& f = fixture();
  const auto& cfg = f.config;
  const double beta = f.profile.beta.at(0);
  const SpatialScene scene = render_scene(cfg.scene, cfg.seed(0));

  auto cues = [&](double snr, double b) {
    ExperimentConfig c = cfg;
    c.sweep.axis = SweepAxis::kSnr;
    const OperatingPoint op = operating_point(c, snr);
    const auto a = analyze_scene(scene, op.snr_in_db, op.g_sq_db, cfg.stft, cfg.scene.ref_mic_left,
                                 cfg.scene.resolved_ref_right());
    const MethodSpec m = b == 0.0 ? MethodSpec::mwf()
                                  : MethodSpec::robust(std::vector<double>(a.stats.num_bins(), b), f.profile.kinds);
    const auto sol = solve_scene(a.stats, m, cfg.solver, cfg.workers);
    const FilterBank q = a.stats.selection();
    const int ks = split_bin(cfg.stft.fft_bins, cfg.stft.sample_rate);
    return std::pair{std::abs(delta_ild(sol.filters, q, a.stats.phi_v, ks)),
                     std::abs(delta_itd(sol.filters, q, a.stats.phi_v, ks, cfg.stft).delta_ms)};
  };
  const auto& spec = cfg.design;
  auto ok = [&](std::pair<double, double> c) { return c.first < spec.ild_max_db && c.second < spec.itd_max_ms; };

  std::string detail = fmt("beta %.4g;", beta);
  bool all = true;
  for (double snr : {spec.snr_worst_db, spec.snr_worst_db + 10.0, spec.snr_worst_db + 30.0}) {
    const auto c = cues(snr, beta);
    detail += fmt(" %+g dB: |dILD_N| %.2f dB |dITD_N| %.3f ms %s;", snr, c.first, c.second, ok(c) ? "ok" : "MISS");
    all = all && ok(c);
  }
  const double below = beta / spec.beta_step < spec.beta_min * 0.999 ? 0.0 : beta / spec.beta_step;
  const auto cb = cues(spec.snr_worst_db, below);
  const bool minimal = !ok(cb);
  detail += fmt(" beta/step=%.4g fails a threshold: %s", below, minimal ? "yes" : "no");
  return {all && minimal, detail};
}

// 10 --------------------------------------------------------------------
Outcome split_bin_check() {
  const int ks = split_bin(256, 16000.0);
  return {ks == 24, fmt("k_s = %d", ks)};
}

// 11 --------------------------------------------------------------------
Outcome determinism() {
  const auto& f = fixture();
  ExperimentConfig cfg = f.config;
  bool same = true;
  std::string detail;
  for (int workers : {1, 4}) {
    cfg.workers = workers;
    std::ostringstream os;
    write_sweep_csv(os, run_sweep(cfg, f.profile));
    const bool eq = os.str() == f.lombard_csv;
    same = same && eq;
    detail += fmt("workers=%d %s; ", workers, eq ? "identical" : "DIFFERENT");
  }
  return {same, detail + fmt("%zu bytes", f.lombard_csv.size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"STFT round trip", stft_round_trip},
      {"homogeneity suite", homogeneity},
      {"argmin invariance (dynamic weight)", argmin_invariance},
      {"fixed-weight degradation witness", fixed_weight_degradation},
      {"eta behaviour", eta_behaviour},
      {"gradient correctness", gradients},
      {"closed-form equivalence", closed_form_equivalence},
      {"brute-force oracle", brute_force},
      {"designer contract", designer_contract},
      {"k_s computation", split_bin_check},
      {"sweep determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return std::min(failed, 125);
}
