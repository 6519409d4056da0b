#include "bmwf/costs.hpp"

#include <algorithm>
#include <cmath>

#include "bmwf/error.hpp"

namespace bmwf {
namespace {

constexpr double kDegenerateRel = 1e-13;
constexpr double kHermitianTol = 1e-10;

// The three quadratic forms every measure is built from.
struct Forms {
  cplx cross;     // a_L^H Phi a_R
  double left;    // a_L^H Phi a_L
  double right;   // a_R^H Phi a_R
  double scale;   // tr(Phi) * ||a_L|| * ||a_R||, reference for degeneracy tests
};

Forms forms(const CVector& a_left, const CVector& a_right, const CMatrix& phi, CVector* phi_al = nullptr,
            CVector* phi_ar = nullptr) {
  CVector pl = phi * a_left;
  CVector pr = phi * a_right;
  Forms f;
  f.cross = a_left.dot(pr);
  f.left = a_left.dot(pl).real();
  f.right = a_right.dot(pr).real();
  f.scale = std::abs(phi.trace().real()) * a_left.norm() * a_right.norm();
  if (phi_al != nullptr) *phi_al = std::move(pl);
  if (phi_ar != nullptr) *phi_ar = std::move(pr);
  return f;
}

bool degenerate(double denom, double scale_sq) {
  return !(denom > kDegenerateRel * scale_sq) || !std::isfinite(denom);
}

cplx measure_from(PenaltyKind kind, const Forms& f, double tr, double nl, double nr) {
  switch (kind) {
    case PenaltyKind::kITF:
      if (degenerate(f.right, tr * nr * nr)) throw DegenerateMeasure("ITF: zero right-channel power");
      return f.cross / f.right;
    case PenaltyKind::kILD:
      if (degenerate(f.right, tr * nr * nr)) throw DegenerateMeasure("ILD: zero right-channel power");
      return f.left / f.right;
    case PenaltyKind::kITD:
      if (!(std::abs(f.cross) > kDegenerateRel * f.scale)) throw DegenerateMeasure("ITD: vanishing cross term");
      return wrap_angle(std::arg(f.cross));
    case PenaltyKind::kIC:
      if (degenerate(f.right, tr * nr * nr) || degenerate(f.left, tr * nl * nl)) {
        throw DegenerateMeasure("IC: zero channel power");
      }
      return f.cross / std::sqrt(f.left * f.right);
  }
  throw InvalidArgument("unknown penalty kind");
}

double penalty_from(PenaltyKind kind, cplx out, cplx in) {
  if (kind == PenaltyKind::kITD) {
    const double d = wrap_angle(out.real() - in.real());
    return d * d;
  }
  return std::norm(out - in);
}

// Penalty value and Wirtinger derivatives d/dw_L*, d/dw_R* accumulated
// (scaled by `weight`) into d_left, d_right.
double penalty_and_wirtinger(PenaltyKind kind, const CVector& wl, const CVector& wr, const CMatrix& phi,
                             cplx input, double weight, CVector& d_left, CVector& d_right) {
  CVector phi_wl, phi_wr;
  const Forms f = forms(wl, wr, phi, &phi_wl, &phi_wr);
  const double tr = std::abs(phi.trace().real());
  const cplx out = measure_from(kind, f, tr, wl.norm(), wr.norm());

  // dF/dc (Wirtinger), dF/dp_L, dF/dp_R for F(c, p_L, p_R) real.
  cplx f_c = 0.0;
  double f_pl = 0.0;
  double f_pr = 0.0;
  double value = 0.0;
  switch (kind) {
    case PenaltyKind::kITF: {
      const cplx e = out - input;
      value = std::norm(e);
      f_c = std::conj(e) / f.right;
      f_pr = -2.0 * (std::conj(e) * f.cross).real() / (f.right * f.right);
      break;
    }
    case PenaltyKind::kILD: {
      const double e = out.real() - input.real();
      value = e * e;
      f_pl = 2.0 * e / f.right;
      f_pr = -2.0 * e * f.left / (f.right * f.right);
      break;
    }
    case PenaltyKind::kITD: {
      const double e = wrap_angle(out.real() - input.real());
      value = e * e;
      f_c = cplx(0.0, -1.0) * e / f.cross;
      break;
    }
    case PenaltyKind::kIC: {
      const cplx e = out - input;
      value = std::norm(e);
      const double root = std::sqrt(f.left * f.right);
      f_c = std::conj(e) / root;
      const double re = (std::conj(e) * out).real();
      f_pl = -re / f.left;
      f_pr = -re / f.right;
      break;
    }
  }
  d_left += weight * (f_c * phi_wr + f_pl * phi_wl);
  d_right += weight * (std::conj(f_c) * phi_wl + f_pr * phi_wr);
  return value;
}

}  // namespace

std::string to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::kITF: return "ITF";
    case PenaltyKind::kILD: return "ILD";
    case PenaltyKind::kITD: return "ITD";
    case PenaltyKind::kIC: return "IC";
  }
  return "?";
}

PenaltyKind parse_penalty_kind(const std::string& name) {
  std::string up = name;
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  if (up == "ITF") return PenaltyKind::kITF;
  if (up == "ILD") return PenaltyKind::kILD;
  if (up == "ITD") return PenaltyKind::kITD;
  if (up == "IC") return PenaltyKind::kIC;
  throw InvalidArgument("unknown penalty kind '" + name + "'");
}

void WeightSchedule::validate() const {
  for (double b : beta) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw InvalidArgument("weight schedule: beta must be finite and >= 0");
  }
}

void BinProblem::validate() const {
  const int m = num_mics();
  if (m < 1 || phi_x.cols() != m || phi_v.rows() != m || phi_v.cols() != m || q_left.size() != m ||
      q_right.size() != m) {
    throw InvalidArgument("bin problem: non-conformable dimensions");
  }
  for (const CMatrix* a : {&phi_x, &phi_v}) {
    const double scale = std::max(a->norm(), 1e-300);
    if ((*a - a->adjoint()).cwiseAbs().maxCoeff() > kHermitianTol * scale) {
      throw InvalidArgument("bin problem: coherence matrix is not Hermitian");
    }
  }
}

double j_mwf(const CVector& w_left, const CVector& w_right, const CMatrix& phi_x, const CMatrix& phi_v,
             const CVector& q_left, const CVector& q_right) {
  BinProblem p{phi_x, phi_v, q_left, q_right};
  p.validate();
  if (w_left.size() != p.num_mics() || w_right.size() != p.num_mics()) throw InvalidArgument("j_mwf: filter size");
  const CVector el = q_left - w_left;
  const CVector er = q_right - w_right;
  const cplx j = el.dot(phi_x * el) + w_left.dot(phi_v * w_left) + er.dot(phi_x * er) + w_right.dot(phi_v * w_right);
  return j.real();
}

cplx binaural_measure(PenaltyKind kind, const CVector& a_left, const CVector& a_right, const CMatrix& phi) {
  if (a_left.size() != phi.rows() || a_right.size() != phi.rows()) throw InvalidArgument("binaural_measure: size");
  const Forms f = forms(a_left, a_right, phi);
  return measure_from(kind, f, std::abs(phi.trace().real()), a_left.norm(), a_right.norm());
}

double j_penalty(PenaltyKind kind, const CVector& w_left, const CVector& w_right, const CVector& q_left,
                 const CVector& q_right, const CMatrix& phi_v) {
  const cplx in = binaural_measure(kind, q_left, q_right, phi_v);
  const cplx out = binaural_measure(kind, w_left, w_right, phi_v);
  return penalty_from(kind, out, in);
}

double j_total(const CVector& w_left, const CVector& w_right, const CMatrix& phi_x, const CMatrix& phi_v,
               const CVector& q_left, const CVector& q_right, std::span<const PenaltyTerm> terms) {
  double j = j_mwf(w_left, w_right, phi_x, phi_v, q_left, q_right);
  for (const PenaltyTerm& t : terms) {
    if (!(t.alpha >= 0.0)) throw InvalidArgument("j_total: weights must be non-negative");
    if (t.alpha == 0.0) continue;
    j += t.alpha * j_penalty(t.kind, w_left, w_right, q_left, q_right, phi_v);
  }
  return j;
}

Eigen::VectorXd pack_filters(const CVector& w_left, const CVector& w_right) {
  const auto m = w_left.size();
  Eigen::VectorXd x(4 * m);
  x.segment(0, m) = w_left.real();
  x.segment(m, m) = w_left.imag();
  x.segment(2 * m, m) = w_right.real();
  x.segment(3 * m, m) = w_right.imag();
  return x;
}

void unpack_filters(const Eigen::VectorXd& x, CVector& w_left, CVector& w_right) {
  const auto m = x.size() / 4;
  w_left.resize(m);
  w_right.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    w_left(i) = cplx(x(i), x(m + i));
    w_right(i) = cplx(x(2 * m + i), x(3 * m + i));
  }
}

AugmentedCost::AugmentedCost(BinProblem problem, std::vector<PenaltyTerm> terms)
    : problem_(std::move(problem)), terms_(std::move(terms)) {
  problem_.validate();
  for (const PenaltyTerm& t : terms_) {
    if (!(t.alpha >= 0.0) || !std::isfinite(t.alpha)) throw InvalidArgument("augmented cost: weights must be finite and >= 0");
    input_measures_.push_back(
        t.alpha > 0.0 ? binaural_measure(t.kind, problem_.q_left, problem_.q_right, problem_.phi_v) : cplx{});
  }
}

double AugmentedCost::value(const Eigen::VectorXd& x) const {
  CVector wl, wr;
  unpack_filters(x, wl, wr);
  const CVector el = problem_.q_left - wl;
  const CVector er = problem_.q_right - wr;
  double j = (el.dot(problem_.phi_x * el) + wl.dot(problem_.phi_v * wl) + er.dot(problem_.phi_x * er) +
              wr.dot(problem_.phi_v * wr))
                 .real();
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (terms_[i].alpha == 0.0) continue;
    const cplx out = binaural_measure(terms_[i].kind, wl, wr, problem_.phi_v);
    j += terms_[i].alpha * penalty_from(terms_[i].kind, out, input_measures_[i]);
  }
  return j;
}

double AugmentedCost::value_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
  CVector wl, wr;
  unpack_filters(x, wl, wr);
  const auto& p = problem_;
  const CMatrix sum = p.phi_x + p.phi_v;
  const CVector el = p.q_left - wl;
  const CVector er = p.q_right - wr;
  double j = (el.dot(p.phi_x * el) + wl.dot(p.phi_v * wl) + er.dot(p.phi_x * er) + wr.dot(p.phi_v * wr)).real();
  // Wirtinger derivatives of J_MWF: (Phi_x + Phi_v) w - Phi_x q per side.
  CVector d_left = sum * wl - p.phi_x * p.q_left;
  CVector d_right = sum * wr - p.phi_x * p.q_right;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (terms_[i].alpha == 0.0) continue;
    j += terms_[i].alpha *
         penalty_and_wirtinger(terms_[i].kind, wl, wr, p.phi_v, input_measures_[i], terms_[i].alpha, d_left, d_right);
  }
  const auto m = wl.size();
  grad.resize(4 * m);
  grad.segment(0, m) = 2.0 * d_left.real();
  grad.segment(m, m) = 2.0 * d_left.imag();
  grad.segment(2 * m, m) = 2.0 * d_right.real();
  grad.segment(3 * m, m) = 2.0 * d_right.imag();
  return j;
}

AugmentedCost::Breakdown AugmentedCost::breakdown(const CVector& w_left, const CVector& w_right) const {
  Breakdown b;
  const auto& p = problem_;
  const CVector el = p.q_left - w_left;
  const CVector er = p.q_right - w_right;
  b.mwf = (el.dot(p.phi_x * el) + w_left.dot(p.phi_v * w_left) + er.dot(p.phi_x * er) +
           w_right.dot(p.phi_v * w_right))
              .real();
  b.total = b.mwf;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const cplx in = terms_[i].alpha > 0.0 ? input_measures_[i]
                                          : binaural_measure(terms_[i].kind, p.q_left, p.q_right, p.phi_v);
    const double ji = penalty_from(terms_[i].kind, binaural_measure(terms_[i].kind, w_left, w_right, p.phi_v), in);
    b.penalties.push_back(ji);
    b.total += terms_[i].alpha * ji;
  }
  return b;
}

Eigen::VectorXd grad_j_total(const CVector& w_left, const CVector& w_right, const CMatrix& phi_x,
                             const CMatrix& phi_v, const CVector& q_left, const CVector& q_right,
                             std::span<const PenaltyTerm> terms) {
  AugmentedCost cost(BinProblem{phi_x, phi_v, q_left, q_right}, {terms.begin(), terms.end()});
  Eigen::VectorXd g;
  cost.value_and_gradient(pack_filters(w_left, w_right), g);
  return g;
}

}  // namespace bmwf
