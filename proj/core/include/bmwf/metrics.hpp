#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bmwf/filter_bank.hpp"
#include "bmwf/stats.hpp"
#include "bmwf/stft.hpp"

namespace bmwf {

/// Highest bin at or below 1500 Hz: floor(1500 K / f_s).
int split_bin(int fft_bins, double sample_rate);

/// Global input-output SNR gain (dB) at one ear, summed over the full
/// spectrum (half-spectrum bins weighted as in Parseval's relation).
double delta_snr(const FilterBank& w, const FilterBank& q, const CoherenceStack& phi_x,
                 const CoherenceStack& phi_v, Side side);

/// Output minus input level difference (dB) over bins split_bin+1 .. K/2.
double delta_ild(const FilterBank& w, const FilterBank& q, const CoherenceStack& phi, int k_split);

struct ItdResult {
  double delta_ms = 0.0;
  /// Literal sum over bins of wrapped output-minus-input phase (radians).
  double raw_angle_sum = 0.0;
  std::vector<int> excluded_bins;
};

/// Mean over bins 1..k_split of wrap(phase_out - phase_in) / (2 pi f_k),
/// where phase = arg(a_L^H Phi a_R). Bins with a vanishing cross term are
/// excluded and listed; throws DegenerateMeasure if all are excluded.
ItdResult delta_itd(const FilterBank& w, const FilterBank& q, const CoherenceStack& phi, int k_split,
                    const StftConfig& stft);

/// Normalized balance between the MSE and the penalty term:
///   eta = sum_k (J_MWF(k) / alpha(k)) / sum_k J_1(k)
/// over bins with alpha(k) > 0. Reduces to sum J_MWF / (beta sum J_1) for a
/// uniform weight beta. Throws InvalidArgument when undefined.
double eta_ratio(std::span<const double> j_mwf, std::span<const double> j_penalty, std::span<const double> alpha);
double eta_ratio(std::span<const double> j_mwf, std::span<const double> j_penalty, double beta);

/// Per-bin noise-cue errors used by the per-bin designer mode.
struct BinCueError {
  double ild_db = 0.0;  // |10 log10 output ratio - 10 log10 input ratio|
  double itd_ms = 0.0;  // |wrapped phase difference| / (2 pi f_k), bins >= 1
};
BinCueError bin_cue_error(const CVector& w_left, const CVector& w_right, const CVector& q_left,
                          const CVector& q_right, const CMatrix& phi, double frequency_hz);

struct MetricReport {
  double delta_snr_left = 0.0;
  double delta_snr_right = 0.0;
  double delta_ild_speech = 0.0;
  double delta_ild_noise = 0.0;
  double delta_itd_speech = 0.0;
  double delta_itd_noise = 0.0;
  double eta = std::numeric_limits<double>::quiet_NaN();
  double g_bar_sq_db = std::numeric_limits<double>::quiet_NaN();
  double snr_bar_in_db = std::numeric_limits<double>::quiet_NaN();
  int k_split = 0;
  /// Empty when every metric is defined; otherwise a ';'-joined list.
  std::string flags;
};

/// Speech metrics against phi_x, noise metrics against phi_v.
MetricReport evaluate_metrics(const FilterBank& w, const FilterBank& q, const CoherenceStack& phi_x,
                              const CoherenceStack& phi_v, const StftConfig& stft);

/// Comma-separated header matching write_metric_fields.
std::string metric_csv_header();
std::string metric_csv_fields(const MetricReport& r);

}  // namespace bmwf
