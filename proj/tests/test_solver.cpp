#include <bmwf/costs.hpp>
#include <bmwf/error.hpp>
#include <bmwf/pipeline.hpp>
#include <bmwf/scene.hpp>
#include <bmwf/solver.hpp>
#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace bmwf;

namespace {

BinProblem random_problem(int m, std::mt19937_64& rng, int speech_rank = -1) {
  BinProblem p;
  p.phi_x = oracle::random_psd(m, rng, speech_rank);
  p.phi_v = oracle::random_psd(m, rng);
  p.q_left = oracle::unit(m, 0);
  p.q_right = oracle::unit(m, m - 1);
  return p;
}

double rel(const CVector& a, const CVector& b) { return (a - b).norm() / b.norm(); }

const SceneAnalysis& default_scene() {
  static const SceneAnalysis a = [] {
    SceneConfig cfg;
    auto scene = render_scene(cfg, 1);
    return analyze_scene(scene, -5.0, 0.0, StftConfig{}, cfg.ref_mic_left, cfg.resolved_ref_right());
  }();
  return a;
}

}  // namespace

TEST(ClosedForm, ZeroSpeechGivesZeroFilters) {
  std::mt19937_64 rng(1);
  auto p = random_problem(3, rng);
  auto [wl, wr] = solve_mwf_closed_form(CMatrix::Zero(3, 3), p.phi_v, p.q_left, p.q_right);
  EXPECT_EQ(wl.norm(), 0.0);
  EXPECT_EQ(wr.norm(), 0.0);
}

TEST(ClosedForm, ShermanMorrisonHighSnr) {
  std::mt19937_64 rng(2);
  CVector h = oracle::random_cvector(4, rng);
  h /= h.norm();
  const CMatrix phi_x = 100.0 * h * h.adjoint();
  const CMatrix phi_v = CMatrix::Identity(4, 4);
  const CVector ql = oracle::unit(4, 0), qr = oracle::unit(4, 3);
  auto [wl, wr] = solve_mwf_closed_form(phi_x, phi_v, ql, qr);
  // (I + 100 h h^H)^-1 100 h h^H q = 100/(1+100) h h^H q for unit h.
  const CVector el = (100.0 / 101.0) * h * std::conj(h[0]);
  const CVector er = (100.0 / 101.0) * h * std::conj(h[3]);
  EXPECT_LT((wl - el).norm(), 1e-13);
  EXPECT_LT((wr - er).norm(), 1e-13);
}

TEST(ClosedForm, TwoByTwoHandInversion) {
  CMatrix phi_x = CMatrix::Zero(2, 2), phi_v = CMatrix::Identity(2, 2);
  phi_x(0, 0) = 1.0;
  auto [wl, wr] = solve_mwf_closed_form(phi_x, phi_v, oracle::unit(2, 0), oracle::unit(2, 1));
  EXPECT_NEAR(std::abs(wl[0] - 0.5), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(wl[1]), 0.0, 1e-15);
  EXPECT_NEAR(wr.norm(), 0.0, 1e-15);
}

TEST(ClosedForm, RidgeOnSingularSum) {
  bool ridge = false;
  CMatrix s = CMatrix::Zero(2, 2);
  s(0, 0) = 1.0;
  auto [wl, wr] = solve_mwf_closed_form(s, CMatrix::Zero(2, 2), oracle::unit(2, 0), oracle::unit(2, 1), &ridge);
  EXPECT_TRUE(ridge);
  EXPECT_TRUE(wl.allFinite());
}

TEST(Bfgs, ZeroWeightMatchesClosedForm) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    auto p = random_problem(4, rng, 1);
    auto [cl, cr] = solve_mwf_closed_form(p.phi_x, p.phi_v, p.q_left, p.q_right);
    SolverOptions o;
    o.init = InitStrategy::kSelection;
    std::vector<PenaltyTerm> terms{{PenaltyKind::kITF, 0.0}};
    auto sol = solve_augmented(p, terms, o);
    EXPECT_LT(rel(sol.w_left, cl), 1e-5);
    EXPECT_LT(rel(sol.w_right, cr), 1e-5);
    EXPECT_TRUE(sol.diagnostics.converged);
  }
}

TEST(Bfgs, HeavyPenaltyPinsItf) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 5; ++t) {
    auto p = random_problem(3, rng, 1);
    std::vector<PenaltyTerm> terms{{PenaltyKind::kITF, 1e6}};
    auto sol = solve_augmented(p, terms, SolverOptions{});
    ASSERT_EQ(sol.diagnostics.penalties.size(), 1u);
    EXPECT_LT(sol.diagnostics.penalties[0], 1e-6);
  }
}

TEST(Bfgs, DynamicWeightArgminIsScaleInvariant) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 5; ++t) {
    auto p = random_problem(4, rng);
    const double beta = 0.05;
    std::vector<PenaltyTerm> t1{{PenaltyKind::kITF, beta * p.phi_v.trace().real()}};
    auto base = solve_augmented(p, t1, SolverOptions{});
    const double c2 = 1000.0;
    BinProblem s = p;
    s.phi_x *= c2;
    s.phi_v *= c2;
    std::vector<PenaltyTerm> tc{{PenaltyKind::kITF, beta * s.phi_v.trace().real()}};
    auto scaled = solve_augmented(s, tc, SolverOptions{});
    EXPECT_LT(rel(scaled.w_left, base.w_left), 1e-4);
    EXPECT_LT(rel(scaled.w_right, base.w_right), 1e-4);
  }
}

TEST(Bfgs, MonotoneDescentOverIterations) {
  // Truncating the run after n iterations must give a non-increasing J_T in n.
  std::mt19937_64 rng(6);
  auto p = random_problem(3, rng, 1);
  std::vector<PenaltyTerm> terms{{PenaltyKind::kITF, 2.0}, {PenaltyKind::kIC, 1.0}};
  SolverOptions o;
  o.init = InitStrategy::kSelection;
  o.grad_tol = 1e-14;
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= 40; ++n) {
    o.max_iters = n;
    auto sol = solve_augmented(p, terms, o);
    EXPECT_LE(sol.diagnostics.j_total, prev * (1.0 + 1e-14)) << "iteration " << n;
    prev = sol.diagnostics.j_total;
  }
}

TEST(Bfgs, WarmStartsAgreeOnCost) {
  std::mt19937_64 rng(7);
  auto p = random_problem(4, rng);
  std::vector<PenaltyTerm> terms{{PenaltyKind::kITF, 0.3 * p.phi_v.trace().real()}};
  SolverOptions a, b;
  a.init = InitStrategy::kClosedFormMwf;
  b.init = InitStrategy::kSelection;
  const double ja = solve_augmented(p, terms, a).diagnostics.j_total;
  const double jb = solve_augmented(p, terms, b).diagnostics.j_total;
  EXPECT_NEAR(ja, jb, 1e-6 * ja);
}

TEST(Bfgs, GivenInitRequiresValue) {
  std::mt19937_64 rng(8);
  auto p = random_problem(2, rng);
  SolverOptions o;
  o.init = InitStrategy::kGiven;
  EXPECT_THROW(solve_augmented(p, {}, o), InvalidArgument);
  auto sol = solve_augmented(p, {}, o, std::make_pair(CVector(p.q_left), CVector(p.q_right)));
  EXPECT_TRUE(sol.diagnostics.converged);
}

TEST(Bfgs, OptionsValidation) {
  SolverOptions o;
  o.max_iters = 0;
  EXPECT_THROW(o.validate(), InvalidArgument);
  o = SolverOptions{};
  o.grad_tol = 0.0;
  EXPECT_THROW(o.validate(), InvalidArgument);
}

TEST(Bfgs, BeatsDenseGridOnRealToyBins) {
  // Real-restricted M = 2 instances: exhaustive grid over the four real
  // coordinates (step 0.05 on [-2, 2]). Speech is full rank; with rank 1
  // the two MWF filters are parallel and the landscape has spurious
  // stationary points.
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  int done = 0;
  while (done < 5) {
    Eigen::Matrix2d bx, bv;
    bx << g(rng), g(rng), g(rng), g(rng);
    bv << g(rng), g(rng), g(rng), g(rng);
    const Eigen::Matrix2d px = bx * bx.transpose();
    const Eigen::Matrix2d pv = bv * bv.transpose() + 0.2 * Eigen::Matrix2d::Identity();
    BinProblem p;
    p.phi_x = px.cast<cplx>();
    p.phi_v = pv.cast<cplx>();
    p.q_left = oracle::unit(2, 0);
    p.q_right = oracle::unit(2, 1);
    const double alpha = 0.5;
    std::vector<PenaltyTerm> terms{{PenaltyKind::kITF, alpha}};
    auto sol = solve_augmented(p, terms, SolverOptions{});
    if (sol.w_left.real().cwiseAbs().maxCoeff() > 1.9 || sol.w_right.real().cwiseAbs().maxCoeff() > 1.9) continue;

    const oracle::RealToyGrid grid(px, pv, alpha, 2.0, 0.05);
    for (int t = 0; t < 20; ++t) {
      const Eigen::Vector4d x = Eigen::Vector4d::Random();
      const CVector wl = x.head<2>().cast<cplx>(), wr = x.tail<2>().cast<cplx>();
      const double lib = j_total(wl, wr, p.phi_x, p.phi_v, p.q_left, p.q_right, terms);
      ASSERT_NEAR(grid.cost(x), lib, 1e-12 * lib);
    }
    const auto best = grid.minimize();
    EXPECT_LE(sol.diagnostics.j_total, best.cost + best.slack);
    ++done;
  }
}

TEST(SolveScene, MwfEqualsPerBinClosedForm) {
  const auto& a = default_scene();
  auto sol = solve_scene(a.stats, MethodSpec::mwf(), SolverOptions{});
  for (int k = 0; k < a.stats.num_bins(); k += 7) {
    const auto p = a.stats.problem(k);
    auto [cl, cr] = solve_mwf_closed_form(p.phi_x, p.phi_v, p.q_left, p.q_right);
    EXPECT_LT(rel(sol.filters.left(k), cl), 1e-12);
    EXPECT_LT(rel(sol.filters.right(k), cr), 1e-12);
  }
}

TEST(SolveScene, ZeroNoiseBinPassesThrough) {
  SceneStatistics s;
  std::mt19937_64 rng(10);
  for (int k = 0; k < 3; ++k) {
    s.phi_x.bins.push_back(oracle::random_psd(2, rng, 1));
    s.phi_v.bins.push_back(k == 1 ? CMatrix::Zero(2, 2) : oracle::random_psd(2, rng));
    s.noise_power.push_back(s.phi_v.bins.back().trace().real());
  }
  s.ref_left = 0;
  s.ref_right = 1;
  auto sol = solve_scene(s, MethodSpec::robust({0.1, 0.1, 0.1}), SolverOptions{});
  EXPECT_TRUE(sol.diagnostics[1].passthrough);
  EXPECT_EQ(sol.filters.left(1), oracle::unit(2, 0));
  EXPECT_EQ(sol.filters.right(1), oracle::unit(2, 1));
  EXPECT_FALSE(sol.diagnostics[0].passthrough);
}

TEST(SolveScene, FullSceneConvergesAndIsWorkerIndependent) {
  const auto& a = default_scene();
  const std::vector<double> beta(a.stats.num_bins(), 4e-4);
  auto one = solve_scene(a.stats, MethodSpec::robust(beta), SolverOptions{}, 1);
  auto many = solve_scene(a.stats, MethodSpec::robust(beta), SolverOptions{}, 3);
  ASSERT_EQ(one.filters.num_bins(), 129);
  ASSERT_EQ(one.filters.num_mics(), 6);
  for (const auto& d : one.diagnostics) EXPECT_TRUE(d.converged);
  EXPECT_EQ(relative_difference(one.filters, many.filters), 0.0);
}

TEST(SolveScene, SceneArgminInvariantUnderLombardGain) {
  SceneConfig cfg;
  auto scene = render_scene(cfg, 1);
  const auto a0 = analyze_scene(scene, -5.0, 0.0, StftConfig{}, 0, 3);
  const auto a30 = analyze_scene(scene, -5.0, 30.0, StftConfig{}, 0, 3);
  const std::vector<double> beta(129, 4e-4);
  auto s0 = solve_scene(a0.stats, MethodSpec::robust(beta), SolverOptions{});
  auto s30 = solve_scene(a30.stats, MethodSpec::robust(beta), SolverOptions{});
  EXPECT_LT(relative_difference(s30.filters, s0.filters), 1e-4);
}

TEST(MethodSpec, TermsFollowWeightRule) {
  auto fixed = MethodSpec::fixed({2.0, 3.0});
  auto robust = MethodSpec::robust({2.0, 3.0});
  EXPECT_DOUBLE_EQ(fixed.terms(1, 10.0).at(0).alpha, 3.0);
  EXPECT_DOUBLE_EQ(robust.terms(1, 10.0).at(0).alpha, 30.0);
  EXPECT_TRUE(MethodSpec::mwf().terms(0, 5.0).empty());
  for (Method m : {Method::kMWF, Method::kMWF_ITF, Method::kMWF_ITF_R}) EXPECT_EQ(parse_method(to_string(m)), m);
}
