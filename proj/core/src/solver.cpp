#include "bmwf/solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "bmwf/error.hpp"
#include "parallel.hpp"

namespace bmwf {
namespace {

constexpr double kRcondMin = 1e-13;
constexpr double kRidgeRel = 1e-10;

struct Factorized {
  Eigen::LLT<CMatrix> llt;
  bool ridge = false;
};

Factorized factorize(const CMatrix& a) {
  Factorized f;
  f.llt.compute(a);
  if (f.llt.info() == Eigen::Success && f.llt.rcond() >= kRcondMin) return f;
  const double eps = kRidgeRel * std::abs(a.trace().real()) / static_cast<double>(a.rows());
  CMatrix reg = a;
  reg.diagonal().array() += eps;
  f.llt.compute(reg);
  f.ridge = true;
  if (f.llt.info() != Eigen::Success || !(eps > 0.0)) throw SolverError("Phi_x + Phi_v singular after ridge");
  return f;
}

// Real 2m x 2m representation of a complex m x m matrix acting on [Re; Im].
Eigen::MatrixXd realify(const CMatrix& b) {
  const auto m = b.rows();
  Eigen::MatrixXd r(2 * m, 2 * m);
  r.topLeftCorner(m, m) = b.real();
  r.topRightCorner(m, m) = -b.imag();
  r.bottomLeftCorner(m, m) = b.imag();
  r.bottomRightCorner(m, m) = b.real();
  return r;
}

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::kMWF: return "MWF";
    case Method::kMWF_ITF: return "MWF-ITF";
    case Method::kMWF_ITF_R: return "MWF-ITF-R";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  std::string up = name;
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return c == '_' ? '-' : std::toupper(c); });
  if (up == "MWF") return Method::kMWF;
  if (up == "MWF-ITF") return Method::kMWF_ITF;
  if (up == "MWF-ITF-R") return Method::kMWF_ITF_R;
  throw InvalidArgument("unknown method '" + name + "' (expected MWF, MWF-ITF or MWF-ITF-R)");
}

void SolverOptions::validate() const {
  if (max_iters < 1) throw InvalidArgument("solver: max_iters must be >= 1");
  if (!(grad_tol > 0.0) || !(armijo_c1 > 0.0 && armijo_c1 < 1.0) || !(backtrack > 0.0 && backtrack < 1.0)) {
    throw InvalidArgument("solver: tolerances must be positive (c1, backtrack in (0,1))");
  }
  if (max_backtracks < 1) throw InvalidArgument("solver: max_backtracks must be >= 1");
}

MethodSpec MethodSpec::mwf() { return MethodSpec{Method::kMWF, {}, {}}; }

MethodSpec MethodSpec::fixed(std::vector<double> beta, std::vector<PenaltyKind> kinds) {
  return MethodSpec{Method::kMWF_ITF, std::move(kinds), WeightSchedule{std::move(beta), false}};
}

MethodSpec MethodSpec::robust(std::vector<double> beta, std::vector<PenaltyKind> kinds) {
  return MethodSpec{Method::kMWF_ITF_R, std::move(kinds), WeightSchedule{std::move(beta), true}};
}

void MethodSpec::validate(int num_bins) const {
  if (method == Method::kMWF) {
    if (!kinds.empty()) throw InvalidArgument("method MWF takes no penalty terms");
    return;
  }
  if (kinds.empty()) throw InvalidArgument("augmented method needs at least one penalty kind");
  if (static_cast<int>(schedule.beta.size()) != num_bins) {
    throw InvalidArgument("weight schedule covers " + std::to_string(schedule.beta.size()) + " bins, expected " +
                          std::to_string(num_bins));
  }
  schedule.validate();
}

std::vector<PenaltyTerm> MethodSpec::terms(int bin, double g_sq) const {
  std::vector<PenaltyTerm> out;
  if (method == Method::kMWF) return out;
  const double alpha = schedule.alpha(bin, g_sq);
  for (PenaltyKind kind : kinds) out.push_back({kind, alpha});
  return out;
}

std::pair<CVector, CVector> solve_mwf_closed_form(const CMatrix& phi_x, const CMatrix& phi_v,
                                                  const CVector& q_left, const CVector& q_right,
                                                  bool* ridge_used) {
  BinProblem{phi_x, phi_v, q_left, q_right}.validate();
  const Factorized f = factorize(phi_x + phi_v);
  if (ridge_used != nullptr) *ridge_used = f.ridge;
  CVector wl = f.llt.solve(phi_x * q_left);
  CVector wr = f.llt.solve(phi_x * q_right);
  if (!wl.allFinite() || !wr.allFinite()) throw SolverError("closed-form MWF produced non-finite filters");
  return {std::move(wl), std::move(wr)};
}

BinSolution solve_augmented(const BinProblem& problem, std::span<const PenaltyTerm> terms,
                            const SolverOptions& options,
                            const std::optional<std::pair<CVector, CVector>>& init) {
  options.validate();
  const AugmentedCost cost(problem, {terms.begin(), terms.end()});
  const int m = problem.num_mics();
  const int n = 4 * m;

  // Initial inverse Hessian: exact inverse of the J_MWF Hessian, which makes
  // the iteration equivariant to a common scaling of (Phi_x, Phi_v, alpha).
  const Factorized fac = factorize(problem.phi_x + problem.phi_v);
  const CMatrix a_inv = fac.llt.solve(CMatrix::Identity(m, m));
  Eigen::MatrixXd h0 = Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd block = 0.5 * realify(0.5 * (a_inv + a_inv.adjoint()));
  h0.topLeftCorner(2 * m, 2 * m) = block;
  h0.bottomRightCorner(2 * m, 2 * m) = block;

  CVector wl, wr;
  switch (options.init) {
    case InitStrategy::kClosedFormMwf: {
      auto w = solve_mwf_closed_form(problem.phi_x, problem.phi_v, problem.q_left, problem.q_right);
      wl = std::move(w.first);
      wr = std::move(w.second);
      break;
    }
    case InitStrategy::kSelection:
      wl = problem.q_left;
      wr = problem.q_right;
      break;
    case InitStrategy::kZeros:
      wl = CVector::Zero(m);
      wr = CVector::Zero(m);
      break;
    case InitStrategy::kGiven:
      if (!init) throw InvalidArgument("solve_augmented: init=given without initial filters");
      wl = init->first;
      wr = init->second;
      break;
  }

  Eigen::VectorXd x = pack_filters(wl, wr);
  Eigen::VectorXd g(n), g_new(n), x_new(n);
  double f = cost.value_and_gradient(x, g);
  if (!std::isfinite(f)) throw SolverError("non-finite cost at the initial point");
  Eigen::MatrixXd h = h0;
  bool h_is_initial = true;

  BinSolution sol;
  BinDiagnostics& d = sol.diagnostics;
  d.converged = false;
  int it = 0;
  for (; it < options.max_iters; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= options.grad_tol * std::abs(f)) {
      d.converged = true;
      break;
    }
    Eigen::VectorXd p = -h * g;
    double slope = g.dot(p);
    if (!(slope < 0.0)) {
      h = h0;
      h_is_initial = true;
      p = -h * g;
      slope = g.dot(p);
    }

    bool accepted = false;
    double f_new = f;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double t = 1.0;
      for (int b = 0; b < options.max_backtracks; ++b, t *= options.backtrack) {
        x_new = x + t * p;
        try {
          f_new = cost.value(x_new);
        } catch (const DegenerateMeasure&) {
          continue;
        }
        if (std::isnan(f_new)) {
          throw SolverError("non-finite cost during line search at iterate " + std::to_string(it));
        }
        if (f_new <= f + options.armijo_c1 * t * slope) {
          accepted = true;
          break;
        }
      }
      if (!accepted && !h_is_initial) {
        h = h0;
        h_is_initial = true;
        p = -h * g;
        slope = g.dot(p);
      } else {
        break;
      }
    }
    if (!accepted) {
      // No representable decrease left along a descent direction: the
      // iterate is optimal to working precision unless the gradient is large.
      if (g.lpNorm<Eigen::Infinity>() <= 1e-4 * std::abs(f)) {
        d.converged = true;
        break;
      }
      throw SolverError("line search found no descent (|g|=" + std::to_string(g.lpNorm<Eigen::Infinity>()) +
                        ", J=" + std::to_string(f) + ")");
    }

    cost.value_and_gradient(x_new, g_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    const double f_old = f;
    x = x_new;
    g = g_new;
    f = f_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h * y;
      // H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      h += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
      h_is_initial = false;
    }
    if (f_old - f <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(f) &&
        s.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
      d.converged = true;
      ++it;
      break;
    }
  }

  unpack_filters(x, sol.w_left, sol.w_right);
  const auto bd = cost.breakdown(sol.w_left, sol.w_right);
  d.j_total = bd.total;
  d.j_mwf = bd.mwf;
  d.penalties = bd.penalties;
  for (const PenaltyTerm& t : terms) d.alphas.push_back(t.alpha);
  d.iterations = it;
  d.ridge = fac.ridge;
  d.grad_inf = g.lpNorm<Eigen::Infinity>();
  return sol;
}

BinProblem SceneStatistics::problem(int bin) const {
  const int m = num_mics();
  BinProblem p{phi_x.bins.at(bin), phi_v.bins.at(bin), CVector::Zero(m), CVector::Zero(m)};
  p.q_left(ref_left) = 1.0;
  p.q_right(ref_right) = 1.0;
  return p;
}

void SceneStatistics::validate() const {
  if (phi_x.num_bins() != phi_v.num_bins() || phi_x.num_mics() != phi_v.num_mics() || phi_v.num_bins() < 1) {
    throw InvalidArgument("scene statistics: speech and noise stacks differ in shape");
  }
  if (static_cast<int>(noise_power.size()) != num_bins()) {
    throw InvalidArgument("scene statistics: noise power does not cover all bins");
  }
  if (ref_left < 0 || ref_left >= num_mics() || ref_right < 0 || ref_right >= num_mics()) {
    throw InvalidArgument("scene statistics: reference mic out of range");
  }
}

SceneSolution solve_scene(const SceneStatistics& stats, const MethodSpec& method, const SolverOptions& options,
                          int workers) {
  stats.validate();
  method.validate(stats.num_bins());
  options.validate();
  const int bins = stats.num_bins();
  const int m = stats.num_mics();

  SceneSolution out{FilterBank(m, bins), std::vector<BinDiagnostics>(bins)};
  std::vector<std::exception_ptr> errors(bins);

  auto solve_bin = [&](int k) {
    try {
      const BinProblem p = stats.problem(k);
      BinDiagnostics& d = out.diagnostics[k];
      if (!(stats.noise_power[k] > 0.0) || !(p.phi_v.trace().real() > 0.0)) {
        out.filters.left(k) = p.q_left;
        out.filters.right(k) = p.q_right;
        d.passthrough = true;
        return;
      }
      const auto terms = method.terms(k, stats.noise_power[k]);
      const bool active = std::any_of(terms.begin(), terms.end(), [](const PenaltyTerm& t) { return t.alpha > 0.0; });
      if (!active) {
        bool ridge = false;
        auto w = solve_mwf_closed_form(p.phi_x, p.phi_v, p.q_left, p.q_right, &ridge);
        const AugmentedCost cost(p, terms);
        const auto bd = cost.breakdown(w.first, w.second);
        d.j_total = bd.total;
        d.j_mwf = bd.mwf;
        d.penalties = bd.penalties;
        for (const PenaltyTerm& t : terms) d.alphas.push_back(t.alpha);
        d.ridge = ridge;
        out.filters.left(k) = std::move(w.first);
        out.filters.right(k) = std::move(w.second);
        return;
      }
      BinSolution s = solve_augmented(p, terms, options);
      out.filters.left(k) = std::move(s.w_left);
      out.filters.right(k) = std::move(s.w_right);
      d = std::move(s.diagnostics);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };

  detail::parallel_for(bins, workers, solve_bin);

  for (int k = 0; k < bins; ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const std::exception& e) {
      throw SolverError(e.what(), k);
    }
  }
  return out;
}

}  // namespace bmwf
