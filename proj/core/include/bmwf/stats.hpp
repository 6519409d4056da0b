#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "bmwf/linalg.hpp"
#include "bmwf/stft.hpp"

namespace bmwf {

enum class CoherenceKind { kSpeech, kNoise, kNoisy, kNormalizedSpeech, kNormalizedNoise };

/// Per-bin Hermitian M x M spatial covariance matrices.
struct CoherenceStack {
  CoherenceKind kind = CoherenceKind::kNoise;
  std::vector<CMatrix> bins;

  int num_bins() const { return static_cast<int>(bins.size()); }
  int num_mics() const { return bins.empty() ? 0 : static_cast<int>(bins.front().rows()); }

  CoherenceStack scaled(double c) const;
};

/// Second-order power estimates on a (frame, bin) grid, row-major by frame.
struct PowerProfile {
  int num_frames = 0;
  int num_bins = 0;
  std::vector<double> g_sq;        // estimated squared Lombard gain (noise power)
  std::vector<double> sigma_x_sq;  // speech power
  std::vector<double> sigma_v_sq;  // noise power
  double g_bar_sq = 0.0;           // (1/frames) sum over frames and bins of g_sq
  double snr_bar_in = 0.0;         // sum sigma_x_sq / sum sigma_v_sq (linear)

  double g_sq_at(int frame, int bin) const { return g_sq[static_cast<std::size_t>(frame) * num_bins + bin]; }
  /// Per-bin noise power averaged over frames.
  std::vector<double> mean_g_sq_per_bin() const;
  double snr_at(int frame, int bin) const;
};

enum class PowerMode { kBatch, kRecursive };

/// Phi(k) = (1/frames) sum_l s(l,k) s(l,k)^H.
CoherenceStack estimate_coherence(const SpectralFrameSet& frames, CoherenceKind kind = CoherenceKind::kNoise);

/// Phi_x = Phi_y - Phi_v with negative eigenvalues clamped to zero.
CoherenceStack estimate_speech_coherence(const CoherenceStack& phi_y, const CoherenceStack& phi_v);

/// Hermitian part of `a` with negative eigenvalues set to zero.
CMatrix repair_psd(const CMatrix& a);

PowerProfile estimate_power_profile(const SpectralFrameSet& noise_frames, const SpectralFrameSet& speech_frames,
                                    PowerMode mode = PowerMode::kBatch, double forgetting_factor = 0.95);

struct NormalizedStack {
  CoherenceStack normalized;
  std::vector<double> power;  // tr(Phi(k))
  std::vector<int> zero_trace_bins;
};

/// Phi(k) / tr(Phi(k)); zero-trace bins yield a zero matrix and power 0.
NormalizedStack normalize_statistics(const CoherenceStack& phi);

/// Max |A - A^H| and min eigenvalue checks against the spectral norm.
bool is_hermitian(const CMatrix& a, double rel_tol = 1e-12);
bool is_psd(const CMatrix& a, double rel_tol = 1e-10);

/// CSV `bin,row,col,re,im`.
void write_coherence_csv(std::ostream& os, const CoherenceStack& phi);
CoherenceStack read_coherence_csv(std::istream& is, CoherenceKind kind);
void save_coherence_csv(const std::string& path, const CoherenceStack& phi);
CoherenceStack load_coherence_csv(const std::string& path, CoherenceKind kind);

}  // namespace bmwf
