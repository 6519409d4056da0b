#include "bmwf/stft.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "bmwf/error.hpp"
#include "bmwf/filter_bank.hpp"
#include "fft.hpp"

namespace bmwf {

void StftConfig::validate() const {
  if (frame_len < 2 || frame_len % 2 != 0) throw InvalidArgument("stft: frame_len must be even and >= 2");
  if (hop != frame_len / 2) throw InvalidArgument("stft: hop must equal frame_len/2");
  if (fft_bins < frame_len) throw InvalidArgument("stft: fft_bins must be >= frame_len");
  if (fft_bins % 2 != 0) throw InvalidArgument("stft: fft_bins must be even");
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw InvalidArgument("stft: sample_rate must be positive");
}

std::vector<double> sqrt_hann(int length) {
  std::vector<double> w(length);
  for (int n = 0; n < length; ++n) {
    w[n] = std::sqrt(0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / length)));
  }
  return w;
}

MultiSignal MultiSignal::zeros(int channels, std::size_t length, double sample_rate) {
  MultiSignal s;
  s.sample_rate = sample_rate;
  s.channels.assign(channels, std::vector<double>(length, 0.0));
  return s;
}

SpectralFrameSet::SpectralFrameSet(StftConfig config, int num_frames, int num_mics)
    : config_(config),
      num_frames_(num_frames),
      num_bins_(config.num_bins()),
      num_mics_(num_mics),
      data_(static_cast<std::size_t>(num_frames) * config.num_bins() * num_mics) {
  if (num_frames < 0 || num_mics < 1) throw InvalidArgument("SpectralFrameSet: bad dimensions");
}

SpectralFrameSet SpectralFrameSet::scaled(double c) const {
  SpectralFrameSet out = *this;
  for (cplx& v : out.data_) v *= c;
  return out;
}

int frame_count(std::size_t length, const StftConfig& config) {
  if (length < static_cast<std::size_t>(config.frame_len)) return 0;
  return static_cast<int>((length - config.frame_len) / config.hop) + 1;
}

SpectralFrameSet stft_analyze(const MultiSignal& signal, const StftConfig& config) {
  config.validate();
  const int mics = signal.num_channels();
  if (mics < 1) throw InvalidArgument("stft_analyze: no channels");
  const std::size_t len = signal.length();
  for (const auto& ch : signal.channels) {
    if (ch.size() != len) throw InvalidArgument("stft_analyze: channels differ in length");
    for (double v : ch) {
      if (!std::isfinite(v)) throw InvalidArgument("stft_analyze: non-finite sample");
    }
  }
  const int frames = frame_count(len, config);
  if (frames < 1) throw InvalidArgument("stft_analyze: signal shorter than one frame");

  const auto window = sqrt_hann(config.frame_len);
  SpectralFrameSet out(config, frames, mics);
  std::vector<double> buf(config.fft_bins);
  std::vector<cplx> spec(config.num_bins());
  for (int m = 0; m < mics; ++m) {
    const auto& x = signal.channels[m];
    for (int l = 0; l < frames; ++l) {
      const std::size_t start = static_cast<std::size_t>(l) * config.hop;
      std::fill(buf.begin(), buf.end(), 0.0);
      for (int n = 0; n < config.frame_len; ++n) buf[n] = window[n] * x[start + n];
      fft::forward(buf, spec);
      for (int k = 0; k < config.num_bins(); ++k) out.at(l, k, m) = spec[k];
    }
  }
  return out;
}

MultiSignal stft_synthesize(const SpectralFrameSet& frames) {
  const StftConfig& config = frames.config();
  config.validate();
  if (frames.num_bins() != config.num_bins()) throw InvalidArgument("stft_synthesize: inconsistent K/frame_len");
  const int count = frames.num_frames();
  const std::size_t len =
      count == 0 ? 0 : static_cast<std::size_t>(count - 1) * config.hop + config.frame_len;
  MultiSignal out = MultiSignal::zeros(frames.num_mics(), len, config.sample_rate);
  const auto window = sqrt_hann(config.frame_len);
  std::vector<cplx> spec(config.num_bins());
  std::vector<double> buf(config.fft_bins);
  for (int m = 0; m < frames.num_mics(); ++m) {
    auto& y = out.channels[m];
    // Frames are accumulated in increasing order for a fixed summation order.
    for (int l = 0; l < count; ++l) {
      for (int k = 0; k < config.num_bins(); ++k) spec[k] = frames.at(l, k, m);
      fft::inverse(spec, buf);
      const std::size_t start = static_cast<std::size_t>(l) * config.hop;
      for (int n = 0; n < config.frame_len; ++n) y[start + n] += window[n] * buf[n];
    }
  }
  return out;
}

SpectralFrameSet apply_filters(const SpectralFrameSet& y, const FilterBank& w) {
  if (w.num_mics() != y.num_mics() || w.num_bins() != y.num_bins()) {
    throw InvalidArgument("apply_filters: dimension mismatch (filters " + std::to_string(w.num_mics()) +
                          "x" + std::to_string(w.num_bins()) + ", frames " +
                          std::to_string(y.num_mics()) + "x" + std::to_string(y.num_bins()) + ")");
  }
  SpectralFrameSet out(y.config(), y.num_frames(), 2);
  for (int l = 0; l < y.num_frames(); ++l) {
    for (int k = 0; k < y.num_bins(); ++k) {
      const auto v = y.mic_vector(l, k);
      out.at(l, k, 0) = w.left(k).dot(v);
      out.at(l, k, 1) = w.right(k).dot(v);
    }
  }
  return out;
}

}  // namespace bmwf
