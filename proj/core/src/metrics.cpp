#include "bmwf/metrics.hpp"

#include <cmath>
#include <numbers>

#include "bmwf/error.hpp"
#include "csv_util.hpp"

namespace bmwf {
namespace {

void check_shapes(const FilterBank& w, const FilterBank& q, const CoherenceStack& phi) {
  if (w.num_bins() != phi.num_bins() || q.num_bins() != phi.num_bins() || w.num_mics() != phi.num_mics() ||
      q.num_mics() != phi.num_mics()) {
    throw InvalidArgument("metrics: filter bank and coherence stack differ in shape");
  }
}

double side_power(const FilterBank& w, Side s, const CMatrix& phi, int k) {
  const CVector& a = w.side(s, k);
  return a.dot(phi * a).real();
}

// Weight of a stored half-spectrum bin in a full-spectrum sum.
double parseval_weight(int k, int num_bins) { return (k == 0 || k == num_bins - 1) ? 1.0 : 2.0; }

std::string fmt(double v) { return std::isfinite(v) ? csv::format_double(v) : std::string("nan"); }

}  // namespace

int split_bin(int fft_bins, double sample_rate) {
  if (fft_bins < 2 || !(sample_rate > 0.0)) throw InvalidArgument("split_bin: bad STFT geometry");
  return static_cast<int>(std::floor(1500.0 * fft_bins / sample_rate));
}

double delta_snr(const FilterBank& w, const FilterBank& q, const CoherenceStack& phi_x,
                 const CoherenceStack& phi_v, Side side) {
  check_shapes(w, q, phi_x);
  check_shapes(w, q, phi_v);
  double out_x = 0.0, out_v = 0.0, in_x = 0.0, in_v = 0.0;
  const int bins = phi_x.num_bins();
  for (int k = 0; k < bins; ++k) {
    const double c = parseval_weight(k, bins);
    out_x += c * side_power(w, side, phi_x.bins[k], k);
    out_v += c * side_power(w, side, phi_v.bins[k], k);
    in_x += c * side_power(q, side, phi_x.bins[k], k);
    in_v += c * side_power(q, side, phi_v.bins[k], k);
  }
  if (!(out_v > 0.0) || !(in_v > 0.0) || !(out_x > 0.0) || !(in_x > 0.0)) {
    throw DegenerateMeasure("delta_snr: zero power sum");
  }
  return power_to_db(out_x / out_v) - power_to_db(in_x / in_v);
}

double delta_ild(const FilterBank& w, const FilterBank& q, const CoherenceStack& phi, int k_split) {
  check_shapes(w, q, phi);
  double ol = 0.0, orr = 0.0, il = 0.0, ir = 0.0;
  for (int k = k_split + 1; k < phi.num_bins(); ++k) {
    ol += side_power(w, Side::kLeft, phi.bins[k], k);
    orr += side_power(w, Side::kRight, phi.bins[k], k);
    il += side_power(q, Side::kLeft, phi.bins[k], k);
    ir += side_power(q, Side::kRight, phi.bins[k], k);
  }
  if (!(ol > 0.0) || !(orr > 0.0) || !(il > 0.0) || !(ir > 0.0)) {
    throw DegenerateMeasure("delta_ild: zero-power side in the high band");
  }
  return power_to_db(ol / orr) - power_to_db(il / ir);
}

ItdResult delta_itd(const FilterBank& w, const FilterBank& q, const CoherenceStack& phi, int k_split,
                    const StftConfig& stft) {
  check_shapes(w, q, phi);
  ItdResult r;
  double acc = 0.0;
  int used = 0;
  const int last = std::min(k_split, phi.num_bins() - 1);
  for (int k = 1; k <= last; ++k) {
    const CMatrix& p = phi.bins[k];
    const cplx out = w.left(k).dot(p * w.right(k));
    const cplx in = q.left(k).dot(p * q.right(k));
    const double ref = std::abs(p.trace().real());
    const double out_scale = ref * w.left(k).norm() * w.right(k).norm();
    const double in_scale = ref * q.left(k).norm() * q.right(k).norm();
    if (!(std::abs(out) > 1e-13 * out_scale) || !(std::abs(in) > 1e-13 * in_scale)) {
      r.excluded_bins.push_back(k);
      continue;
    }
    const double dphi = wrap_angle(std::arg(out) - std::arg(in));
    r.raw_angle_sum += dphi;
    acc += dphi / (2.0 * std::numbers::pi * stft.bin_frequency(k));
    ++used;
  }
  if (used == 0) throw DegenerateMeasure("delta_itd: every low-band cross term vanishes");
  r.delta_ms = 1000.0 * acc / used;
  return r;
}

double eta_ratio(std::span<const double> j_mwf, std::span<const double> j_penalty, std::span<const double> alpha) {
  if (j_mwf.size() != j_penalty.size() || j_mwf.size() != alpha.size()) {
    throw InvalidArgument("eta_ratio: inputs differ in length");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < j_mwf.size(); ++k) {
    if (!(alpha[k] > 0.0)) continue;
    num += j_mwf[k] / alpha[k];
    den += j_penalty[k];
  }
  if (!(den > 0.0)) throw InvalidArgument("eta_ratio: undefined (zero weight or zero penalty sum)");
  return num / den;
}

double eta_ratio(std::span<const double> j_mwf, std::span<const double> j_penalty, double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("eta_ratio: undefined for beta = 0");
  std::vector<double> alpha(j_mwf.size(), beta);
  return eta_ratio(j_mwf, j_penalty, alpha);
}

BinCueError bin_cue_error(const CVector& w_left, const CVector& w_right, const CVector& q_left,
                          const CVector& q_right, const CMatrix& phi, double frequency_hz) {
  const double ol = w_left.dot(phi * w_left).real();
  const double orr = w_right.dot(phi * w_right).real();
  const double il = q_left.dot(phi * q_left).real();
  const double ir = q_right.dot(phi * q_right).real();
  if (!(ol > 0.0) || !(orr > 0.0) || !(il > 0.0) || !(ir > 0.0)) throw DegenerateMeasure("bin_cue_error: zero power");
  BinCueError e;
  e.ild_db = std::abs(power_to_db(ol / orr) - power_to_db(il / ir));
  if (frequency_hz > 0.0) {
    const cplx out = w_left.dot(phi * w_right);
    const cplx in = q_left.dot(phi * q_right);
    e.itd_ms = 1000.0 * std::abs(wrap_angle(std::arg(out) - std::arg(in))) / (2.0 * std::numbers::pi * frequency_hz);
  }
  return e;
}

MetricReport evaluate_metrics(const FilterBank& w, const FilterBank& q, const CoherenceStack& phi_x,
                              const CoherenceStack& phi_v, const StftConfig& stft) {
  MetricReport r;
  r.k_split = split_bin(stft.fft_bins, stft.sample_rate);
  auto guard = [&r](const char* name, auto&& fn) -> double {
    try {
      return fn();
    } catch (const DegenerateMeasure&) {
      if (!r.flags.empty()) r.flags += ';';
      r.flags += name;
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  r.delta_snr_left = guard("snr_l", [&] { return delta_snr(w, q, phi_x, phi_v, Side::kLeft); });
  r.delta_snr_right = guard("snr_r", [&] { return delta_snr(w, q, phi_x, phi_v, Side::kRight); });
  r.delta_ild_speech = guard("ild_s", [&] { return delta_ild(w, q, phi_x, r.k_split); });
  r.delta_ild_noise = guard("ild_n", [&] { return delta_ild(w, q, phi_v, r.k_split); });
  r.delta_itd_speech = guard("itd_s", [&] { return delta_itd(w, q, phi_x, r.k_split, stft).delta_ms; });
  r.delta_itd_noise = guard("itd_n", [&] { return delta_itd(w, q, phi_v, r.k_split, stft).delta_ms; });
  return r;
}

std::string metric_csv_header() {
  return "delta_snr_l_db,delta_snr_r_db,delta_ild_s_db,delta_ild_n_db,delta_itd_s_ms,delta_itd_n_ms,eta,"
         "g_bar_sq_db,snr_bar_in_db,k_s,flags";
}

std::string metric_csv_fields(const MetricReport& r) {
  std::string s;
  for (double v : {r.delta_snr_left, r.delta_snr_right, r.delta_ild_speech, r.delta_ild_noise, r.delta_itd_speech,
                   r.delta_itd_noise, r.eta, r.g_bar_sq_db, r.snr_bar_in_db}) {
    s += fmt(v);
    s += ',';
  }
  s += std::to_string(r.k_split);
  s += ',';
  s += r.flags;
  return s;
}

}  // namespace bmwf
