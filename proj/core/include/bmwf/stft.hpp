#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bmwf/linalg.hpp"

namespace bmwf {

/// Frame/FFT geometry for the analysis-synthesis pair. The defaults give
/// 8 ms frames at 16 kHz, zero-padded to a 256-point DFT with 50% overlap.
struct StftConfig {
  int frame_len = 128;
  int fft_bins = 256;
  int hop = 64;
  double sample_rate = 16000.0;

  /// Throws InvalidArgument unless hop == frame_len/2, K >= frame_len,
  /// frame_len is even and the sample rate is positive.
  void validate() const;

  int num_bins() const { return fft_bins / 2 + 1; }
  double bin_frequency(int k) const { return k * sample_rate / fft_bins; }
  double frame_duration_ms() const { return 1000.0 * frame_len / sample_rate; }
};

/// Periodic sqrt-Hann window of the given length.
std::vector<double> sqrt_hann(int length);

/// Real multichannel time signal, channel-major.
struct MultiSignal {
  double sample_rate = 16000.0;
  std::vector<std::vector<double>> channels;

  int num_channels() const { return static_cast<int>(channels.size()); }
  std::size_t length() const { return channels.empty() ? 0 : channels.front().size(); }

  static MultiSignal zeros(int channels, std::size_t length, double sample_rate);
};

/// Non-negative-frequency STFT coefficients indexed (frame, bin, mic).
/// Storage is frame-major so that the mic vector y(frame, bin) is contiguous.
class SpectralFrameSet {
 public:
  SpectralFrameSet() = default;
  SpectralFrameSet(StftConfig config, int num_frames, int num_mics);

  const StftConfig& config() const { return config_; }
  int num_frames() const { return num_frames_; }
  int num_bins() const { return num_bins_; }
  int num_mics() const { return num_mics_; }

  cplx& at(int frame, int bin, int mic) { return data_[index(frame, bin, mic)]; }
  cplx at(int frame, int bin, int mic) const { return data_[index(frame, bin, mic)]; }

  /// The M-vector of all mics at (frame, bin).
  Eigen::Map<CVector> mic_vector(int frame, int bin) {
    return {data_.data() + index(frame, bin, 0), num_mics_};
  }
  Eigen::Map<const CVector> mic_vector(int frame, int bin) const {
    return {data_.data() + index(frame, bin, 0), num_mics_};
  }

  std::span<const cplx> data() const { return data_; }
  std::span<cplx> data() { return data_; }

  /// Multiplies every coefficient by a real scalar.
  SpectralFrameSet scaled(double c) const;

 private:
  std::size_t index(int frame, int bin, int mic) const {
    return (static_cast<std::size_t>(frame) * num_bins_ + bin) * num_mics_ + mic;
  }

  StftConfig config_{};
  int num_frames_ = 0;
  int num_bins_ = 0;
  int num_mics_ = 0;
  std::vector<cplx> data_;
};

/// Number of full frames that fit in `length` samples.
int frame_count(std::size_t length, const StftConfig& config);

SpectralFrameSet stft_analyze(const MultiSignal& signal, const StftConfig& config);

/// Weighted overlap-add synthesis; output length (frames-1)*hop + frame_len.
MultiSignal stft_synthesize(const SpectralFrameSet& frames);

class FilterBank;

/// Binaural outputs x_L = w_L^H y and x_R = w_R^H y per (frame, bin).
/// The result has two channels: 0 = left, 1 = right.
SpectralFrameSet apply_filters(const SpectralFrameSet& y, const FilterBank& w);

}  // namespace bmwf
