#pragma once

#include <span>
#include <string>
#include <vector>

#include "bmwf/linalg.hpp"

namespace bmwf {

/// Binaural measure penalized by an augmented cost term.
enum class PenaltyKind { kITF, kILD, kITD, kIC };

std::string to_string(PenaltyKind kind);
PenaltyKind parse_penalty_kind(const std::string& name);

/// Per-bin trade-off weights. With `dynamic` set the effective weight is
/// alpha = beta(k) * g^2, otherwise alpha = beta(k).
struct WeightSchedule {
  std::vector<double> beta;
  bool dynamic = false;

  double alpha(int bin, double g_sq) const { return dynamic ? beta.at(bin) * g_sq : beta.at(bin); }
  void validate() const;
};

struct PenaltyTerm {
  PenaltyKind kind = PenaltyKind::kITF;
  double alpha = 0.0;
};

/// Statistics and reference selection of one frequency bin.
struct BinProblem {
  CMatrix phi_x;
  CMatrix phi_v;
  CVector q_left;
  CVector q_right;

  int num_mics() const { return static_cast<int>(phi_x.rows()); }
  /// Throws InvalidArgument on non-conformable or non-Hermitian input.
  void validate() const;
};

/// MSE cost: sum over sides of (q - w)^H Phi_x (q - w) + w^H Phi_v w.
double j_mwf(const CVector& w_left, const CVector& w_right, const CMatrix& phi_x, const CMatrix& phi_v,
             const CVector& q_left, const CVector& q_right);

/// Second-order-statistics binaural measure for the vector pair (a_L, a_R):
///   ITF = a_L^H Phi a_R / a_R^H Phi a_R
///   ILD = a_L^H Phi a_L / a_R^H Phi a_R          (real, linear power ratio)
///   ITD = arg(a_L^H Phi a_R) in (-pi, pi]        (real)
///   IC  = a_L^H Phi a_R / sqrt(a_L^H Phi a_L * a_R^H Phi a_R)
/// Throws DegenerateMeasure when a denominator vanishes.
cplx binaural_measure(PenaltyKind kind, const CVector& a_left, const CVector& a_right, const CMatrix& phi);

/// |BM_out - BM_in|^2, with the wrapped angle difference for ITD.
double j_penalty(PenaltyKind kind, const CVector& w_left, const CVector& w_right, const CVector& q_left,
                 const CVector& q_right, const CMatrix& phi_v);

/// J_MWF + sum_i alpha_i J_i.
double j_total(const CVector& w_left, const CVector& w_right, const CMatrix& phi_x, const CMatrix& phi_v,
               const CVector& q_left, const CVector& q_right, std::span<const PenaltyTerm> terms);

/// Real coordinates [Re w_L; Im w_L; Re w_R; Im w_R] (length 4M).
Eigen::VectorXd pack_filters(const CVector& w_left, const CVector& w_right);
void unpack_filters(const Eigen::VectorXd& x, CVector& w_left, CVector& w_right);

/// Augmented cost of one bin with the input-side measures precomputed.
class AugmentedCost {
 public:
  AugmentedCost(BinProblem problem, std::vector<PenaltyTerm> terms);

  const BinProblem& problem() const { return problem_; }
  std::span<const PenaltyTerm> terms() const { return terms_; }
  int dimension() const { return 4 * problem_.num_mics(); }

  double value(const Eigen::VectorXd& x) const;
  /// Value and exact gradient in the packed real coordinates.
  double value_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;

  struct Breakdown {
    double total = 0.0;
    double mwf = 0.0;
    std::vector<double> penalties;  // unweighted J_i, same order as terms
  };
  Breakdown breakdown(const CVector& w_left, const CVector& w_right) const;

 private:
  BinProblem problem_;
  std::vector<PenaltyTerm> terms_;
  std::vector<cplx> input_measures_;
};

/// Gradient of j_total in packed real coordinates.
Eigen::VectorXd grad_j_total(const CVector& w_left, const CVector& w_right, const CMatrix& phi_x,
                             const CMatrix& phi_v, const CVector& q_left, const CVector& q_right,
                             std::span<const PenaltyTerm> terms);

}  // namespace bmwf
