#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bmwf/costs.hpp"
#include "bmwf/filter_bank.hpp"
#include "bmwf/stats.hpp"

namespace bmwf {

enum class Method { kMWF, kMWF_ITF, kMWF_ITF_R };

std::string to_string(Method method);
Method parse_method(const std::string& name);

enum class InitStrategy { kClosedFormMwf, kSelection, kZeros, kGiven };

struct SolverOptions {
  int max_iters = 500;
  /// Stop when max |grad| <= grad_tol * |J| (scale-free; see README).
  double grad_tol = 1e-8;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
  InitStrategy init = InitStrategy::kClosedFormMwf;

  void validate() const;
};

/// Which augmented cost a filter bank minimizes. MWF carries no penalties.
struct MethodSpec {
  Method method = Method::kMWF;
  std::vector<PenaltyKind> kinds;
  WeightSchedule schedule;

  static MethodSpec mwf();
  /// Fixed weight alpha(k) = beta(k).
  static MethodSpec fixed(std::vector<double> beta, std::vector<PenaltyKind> kinds = {PenaltyKind::kITF});
  /// Dynamic weight alpha(k) = beta(k) * g^2(k).
  static MethodSpec robust(std::vector<double> beta, std::vector<PenaltyKind> kinds = {PenaltyKind::kITF});

  void validate(int num_bins) const;
  /// Penalty terms of bin k for the given noise power.
  std::vector<PenaltyTerm> terms(int bin, double g_sq) const;
};

struct BinDiagnostics {
  double j_total = 0.0;
  double j_mwf = 0.0;
  std::vector<double> penalties;  // unweighted J_i in method.kinds order
  std::vector<double> alphas;
  int iterations = 0;
  bool converged = true;
  bool passthrough = false;  // zero noise power: W = Q
  bool ridge = false;        // Phi_x + Phi_v was regularized
  double grad_inf = 0.0;
};

struct BinSolution {
  CVector w_left;
  CVector w_right;
  BinDiagnostics diagnostics;
};

/// w_l = (Phi_x + Phi_v)^-1 Phi_x q_l, with a 1e-10 tr/M ridge when the sum
/// is numerically singular. Throws SolverError if still singular.
std::pair<CVector, CVector> solve_mwf_closed_form(const CMatrix& phi_x, const CMatrix& phi_v,
                                                  const CVector& q_left, const CVector& q_right,
                                                  bool* ridge_used = nullptr);

/// BFGS minimization of J_T in packed real coordinates. `init` is used when
/// options.init == kGiven.
BinSolution solve_augmented(const BinProblem& problem, std::span<const PenaltyTerm> terms,
                            const SolverOptions& options,
                            const std::optional<std::pair<CVector, CVector>>& init = std::nullopt);

/// Second-order statistics of a scene as consumed by the solvers.
struct SceneStatistics {
  CoherenceStack phi_x;
  CoherenceStack phi_v;
  std::vector<double> noise_power;  // g^2(k) per bin (batch estimate)
  int ref_left = 0;
  int ref_right = 0;

  int num_bins() const { return phi_v.num_bins(); }
  int num_mics() const { return phi_v.num_mics(); }
  FilterBank selection() const { return FilterBank::selection(num_mics(), num_bins(), ref_left, ref_right); }
  BinProblem problem(int bin) const;
  void validate() const;
};

struct SceneSolution {
  FilterBank filters;
  std::vector<BinDiagnostics> diagnostics;
};

/// Per-bin solve assembled into a filter bank. Bins with zero noise power
/// pass through (W = Q). Any bin failure throws SolverError naming the bin.
SceneSolution solve_scene(const SceneStatistics& stats, const MethodSpec& method, const SolverOptions& options,
                          int workers = 1);

}  // namespace bmwf
