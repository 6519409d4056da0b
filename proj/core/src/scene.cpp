#include "bmwf/scene.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <random>

#include "bmwf/error.hpp"
#include "bmwf/wav.hpp"
#include "fft.hpp"

namespace bmwf {
namespace {

constexpr double kPi = std::numbers::pi;

// Hann-windowed sinc centred at `delay` samples.
std::vector<double> fractional_delay(double delay, int length) {
  constexpr int kHalfWidth = 12;
  std::vector<double> h(length, 0.0);
  for (int n = 0; n < length; ++n) {
    const double t = n - delay;
    if (std::abs(t) >= kHalfWidth) continue;
    const double sinc = t == 0.0 ? 1.0 : std::sin(kPi * t) / (kPi * t);
    const double win = 0.5 * (1.0 + std::cos(kPi * t / kHalfWidth));
    h[n] = sinc * win;
  }
  return h;
}

void one_pole_lowpass(std::vector<double>& x, double pole) {
  double state = 0.0;
  for (double& v : x) {
    state = (1.0 - pole) * v + pole * state;
    v = state;
  }
}

// splitmix64, used to derive independent stream seeds from one user seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void pad_to(MultiSignal& s, std::size_t length) {
  for (auto& ch : s.channels) ch.resize(length, 0.0);
}

}  // namespace

void SceneConfig::validate() const {
  if (mics_left < 1 || mics_right < 1 || num_mics() < 2) throw InvalidArgument("scene: need at least one mic per side");
  for (double az : {speech_azimuth_deg, noise_azimuth_deg}) {
    if (!(az >= -90.0 && az <= 90.0)) throw InvalidArgument("scene: azimuth must lie in [-90, 90]");
  }
  if (!(speech_distance_m > 0.0) || !(noise_distance_m > 0.0)) throw InvalidArgument("scene: distances must be positive");
  if (!(sample_rate > 0.0)) throw InvalidArgument("scene: sample_rate must be positive");
  if (!std::isfinite(snr_in_db) || !std::isfinite(lombard_gain_sq_db)) throw InvalidArgument("scene: SNR and gain must be finite");
  if (!(duration_s > 0.0)) throw InvalidArgument("scene: duration must be positive");
  if (std::isnan(sensor_noise_db) || sensor_noise_db == std::numeric_limits<double>::infinity()) {
    throw InvalidArgument("scene: sensor_noise_db must be finite or -inf");
  }
  if (ref_mic_left < 0 || ref_mic_left >= num_mics() || resolved_ref_right() >= num_mics()) {
    throw InvalidArgument("scene: reference mic out of range");
  }
}

std::vector<MicPosition> default_mic_array(int mics_left, int mics_right, double spacing_m) {
  std::vector<MicPosition> mics;
  for (int i = 0; i < mics_left; ++i) mics.push_back({Side::kLeft, -spacing_m * i});
  for (int i = 0; i < mics_right; ++i) mics.push_back({Side::kRight, -spacing_m * i});
  return mics;
}

double woodworth_delay(double azimuth_deg, const HeadModel& model) {
  const double th = azimuth_deg * kPi / 180.0;
  return model.head_radius_m / model.speed_of_sound * (th + std::sin(th));
}

namespace {

// Exponentially decaying Gaussian tail starting a few taps after the direct path.
// Seeded from the azimuth and mic index, so a response is a pure function of geometry.
void add_tail(std::vector<double>& h, double delay, double azimuth_deg, std::size_t mic, const HeadModel& model,
              double sample_rate) {
  const int start = static_cast<int>(std::ceil(delay)) + 4;
  const int n = static_cast<int>(h.size());
  if (start >= n) return;
  double direct = 0.0;
  for (double v : h) direct += v * v;
  const double decay = std::log(1000.0) / (model.tail_t60_ms * 1e-3 * sample_rate);  // amplitude per sample
  std::mt19937_64 rng(mix_seed(std::bit_cast<std::uint64_t>(azimuth_deg), 1000 + mic));
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> tail(n, 0.0);
  double energy = 0.0;
  for (int i = start; i < n; ++i) {
    tail[i] = g(rng) * std::exp(-decay * (i - start));
    energy += tail[i] * tail[i];
  }
  if (!(energy > 0.0)) return;
  const double scale = std::sqrt(db_to_power(model.tail_level_db) * direct / energy);
  for (int i = start; i < n; ++i) h[i] += scale * tail[i];
}

}  // namespace

HrirSet synth_hrir(double azimuth_deg, const std::vector<MicPosition>& mics, const HeadModel& model,
                   double distance_m, double sample_rate) {
  if (!(std::abs(azimuth_deg) <= 90.0)) throw InvalidArgument("synth_hrir: |azimuth| must not exceed 90 degrees");
  if (!(model.head_radius_m > 0.0) || !(model.speed_of_sound > 0.0)) {
    throw InvalidArgument("synth_hrir: head radius and speed of sound must be positive");
  }
  if (!(distance_m > 0.0)) throw InvalidArgument("synth_hrir: distance must be positive");
  if (model.hrir_length < 8) throw InvalidArgument("synth_hrir: hrir_length too short");
  if (std::isnan(model.tail_level_db) || model.tail_level_db == std::numeric_limits<double>::infinity() ||
      !(model.tail_t60_ms > 0.0)) {
    throw InvalidArgument("synth_hrir: tail level must be finite or -inf and t60 positive");
  }

  const double th = azimuth_deg * kPi / 180.0;
  const double itd = woodworth_delay(azimuth_deg, model);
  const double pole = model.shadow_pole_max * std::abs(std::sin(th));
  const double gain = 1.0 / distance_m;

  HrirSet set;
  set.azimuth_deg = azimuth_deg;
  set.distance_m = distance_m;
  for (const MicPosition& mic : mics) {
    // The left ear lags by +itd/2 and the right by -itd/2; itd < 0 for left sources.
    const double ear = mic.side == Side::kLeft ? 0.5 * itd : -0.5 * itd;
    const double along = -mic.forward_offset_m * std::cos(th) / model.speed_of_sound;
    const double delay = model.onset_samples + (ear + along) * sample_rate;
    if (delay < 0.0 || delay > model.hrir_length - 1) throw InvalidArgument("synth_hrir: delay exceeds response length");
    auto h = fractional_delay(delay, model.hrir_length);
    const bool far_ear = (azimuth_deg < 0.0 && mic.side == Side::kRight) ||
                         (azimuth_deg > 0.0 && mic.side == Side::kLeft);
    if (far_ear) one_pole_lowpass(h, pole);
    if (std::isfinite(model.tail_level_db)) add_tail(h, delay, azimuth_deg, set.responses.size(), model, sample_rate);
    for (double& v : h) v *= gain;
    set.responses.push_back(std::move(h));
  }
  return set;
}

HrirSet load_hrir(const std::string& path, int num_mics) {
  MultiSignal s = read_wav(path);
  if (s.num_channels() != num_mics) {
    throw IoError(path + ": channel count mismatch (file has " + std::to_string(s.num_channels()) +
                  ", expected " + std::to_string(num_mics) + ")");
  }
  HrirSet set;
  set.responses = std::move(s.channels);
  for (const auto& h : set.responses) {
    for (double v : h) {
      if (!std::isfinite(v)) throw IoError(path + ": non-finite HRIR sample");
    }
  }
  return set;
}

MultiSignal render_source(const std::vector<double>& dry, const HrirSet& hrirs, double sample_rate) {
  if (dry.empty() || hrirs.num_mics() == 0 || hrirs.length() == 0) throw InvalidArgument("render_source: empty input");
  const std::size_t taps = hrirs.length();
  const std::size_t len = dry.size() + taps - 1;
  MultiSignal out = MultiSignal::zeros(hrirs.num_mics(), len, sample_rate);
  for (int m = 0; m < hrirs.num_mics(); ++m) {
    const auto& h = hrirs.responses[m];
    if (h.size() != taps) throw InvalidArgument("render_source: responses differ in length");
    auto& y = out.channels[m];
    for (std::size_t n = 0; n < dry.size(); ++n) {
      const double d = dry[n];
      if (d == 0.0) continue;
      for (std::size_t j = 0; j < taps; ++j) y[n + j] += d * h[j];
    }
  }
  return out;
}

double total_power(const MultiSignal& s) {
  const std::size_t n = s.length();
  if (n == 0) return 0.0;
  double acc = 0.0;
  for (const auto& ch : s.channels) {
    for (double v : ch) acc += v * v;
  }
  return acc / static_cast<double>(n);
}

MixedScene mix_scene(const MultiSignal& x, const MultiSignal& v, double snr_in_db, double g_sq_db) {
  if (x.num_channels() != v.num_channels() || x.length() != v.length()) {
    throw InvalidArgument("mix_scene: speech and noise must have equal shapes");
  }
  const double px = total_power(x);
  const double pv = total_power(v);
  if (!(pv > 0.0)) throw InvalidArgument("mix_scene: zero noise power");
  if (!(px > 0.0)) throw InvalidArgument("mix_scene: zero speech power");

  MixedScene out;
  out.speech_gain = std::sqrt(db_to_power(snr_in_db) * pv / px);
  out.lombard_gain = std::pow(10.0, g_sq_db / 20.0);
  const double gx = out.lombard_gain * out.speech_gain;
  const double gv = out.lombard_gain;
  out.x = MultiSignal::zeros(x.num_channels(), x.length(), x.sample_rate);
  out.v = out.x;
  out.y = out.x;
  for (int m = 0; m < x.num_channels(); ++m) {
    for (std::size_t n = 0; n < x.length(); ++n) {
      const double xs = gx * x.channels[m][n];
      const double vs = gv * v.channels[m][n];
      out.x.channels[m][n] = xs;
      out.v.channels[m][n] = vs;
      out.y.channels[m][n] = xs + vs;
    }
  }
  return out;
}

std::vector<double> gen_speech_shaped_noise(const std::vector<double>& envelope_source, std::size_t length,
                                            std::uint64_t seed) {
  if (length == 0) throw InvalidArgument("gen_speech_shaped_noise: length must be positive");
  constexpr std::size_t kMinSource = 256;
  if (envelope_source.size() < kMinSource) {
    throw InvalidArgument("gen_speech_shaped_noise: envelope source shorter than 256 samples");
  }

  // Welch estimate of the source power spectrum (Hann, 50% overlap).
  std::size_t nfft = 1024;
  while (nfft > envelope_source.size()) nfft /= 2;
  const std::size_t hop = nfft / 2;
  std::vector<double> win(nfft);
  for (std::size_t n = 0; n < nfft; ++n) win[n] = 0.5 * (1.0 - std::cos(2.0 * kPi * n / nfft));
  std::vector<double> psd(nfft / 2 + 1, 0.0);
  std::vector<double> seg(nfft);
  std::vector<cplx> spec(nfft / 2 + 1);
  std::size_t segments = 0;
  for (std::size_t start = 0; start + nfft <= envelope_source.size(); start += hop) {
    for (std::size_t n = 0; n < nfft; ++n) seg[n] = win[n] * envelope_source[start + n];
    fft::forward(seg, spec);
    for (std::size_t k = 0; k < psd.size(); ++k) psd[k] += std::norm(spec[k]);
    ++segments;
  }
  for (double& p : psd) p /= static_cast<double>(segments);

  // Third-octave smoothing: each bin averages over [f 2^-1/6, f 2^1/6].
  const double band = std::pow(2.0, 1.0 / 6.0);
  std::vector<double> mag(psd.size());
  for (std::size_t k = 1; k < psd.size(); ++k) {
    const auto lo = static_cast<std::size_t>(std::max(1.0, std::floor(k / band)));
    const auto hi = std::min(psd.size() - 1, static_cast<std::size_t>(std::ceil(k * band)));
    double acc = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) acc += psd[j];
    mag[k] = std::sqrt(acc / static_cast<double>(hi - lo + 1));
  }
  mag[0] = mag.size() > 1 ? mag[1] : 0.0;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(length);
  for (double& v : noise) v = normal(rng);

  // Shape in one long DFT, interpolating the smoothed magnitude in frequency.
  auto shaped = fft::forward(noise);
  for (std::size_t k = 0; k < shaped.size(); ++k) {
    const double pos = static_cast<double>(k) * nfft / static_cast<double>(length);
    const auto i0 = std::min(mag.size() - 1, static_cast<std::size_t>(pos));
    const std::size_t i1 = std::min(mag.size() - 1, i0 + 1);
    const double frac = std::clamp(pos - static_cast<double>(i0), 0.0, 1.0);
    shaped[k] *= (1.0 - frac) * mag[i0] + frac * mag[i1];
  }
  std::vector<double> out(length);
  fft::inverse(shaped, out);

  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(length);
  double var = 0.0;
  for (double v : out) var += (v - mean) * (v - mean);
  var /= static_cast<double>(length);
  if (!(var > 0.0)) throw InvalidArgument("gen_speech_shaped_noise: envelope source has no energy");
  const double inv_std = 1.0 / std::sqrt(var);
  for (double& v : out) v = (v - mean) * inv_std;
  return out;
}

std::vector<double> speech_spectrum_reference(std::size_t length, double sample_rate, std::uint64_t seed) {
  // White noise through a 120 Hz high-pass and a 600 Hz low-pass with a
  // -26 dB high-frequency floor: a rough long-term speech spectrum.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double hp = std::exp(-2.0 * kPi * 120.0 / sample_rate);
  const double lp = std::exp(-2.0 * kPi * 600.0 / sample_rate);
  std::vector<double> out(length);
  double hp_x = 0.0, hp_y = 0.0, lp_y = 0.0;
  for (double& o : out) {
    const double w = normal(rng);
    hp_y = hp * (hp_y + w - hp_x);
    hp_x = w;
    lp_y = (1.0 - lp) * hp_y + lp * lp_y;
    o = lp_y + 0.05 * hp_y;
  }
  return out;
}

DrySources make_dry_sources(const SceneConfig& config, std::uint64_t seed) {
  const auto length = static_cast<std::size_t>(std::llround(config.duration_s * config.sample_rate));
  if (length < 256) throw InvalidArgument("scene: duration too short");
  const auto reference = speech_spectrum_reference(std::max<std::size_t>(length, 16384), config.sample_rate,
                                                   mix_seed(seed, 0));
  DrySources dry;
  dry.speech = gen_speech_shaped_noise(reference, length, mix_seed(seed, 1));
  dry.noise = gen_speech_shaped_noise(reference, length, mix_seed(seed, 2));
  std::mt19937_64 phase_rng(mix_seed(seed, 3));
  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * kPi)(phase_rng);
  for (std::size_t n = 0; n < length; ++n) {
    const double t = static_cast<double>(n) / config.sample_rate;
    const double env = 1.0 - config.speech_modulation_depth * 0.5 *
                                 (1.0 + std::cos(2.0 * kPi * config.speech_modulation_hz * t + phase));
    dry.speech[n] *= env;
  }
  return dry;
}

SpatialScene render_scene(const SceneConfig& config, std::uint64_t seed) {
  config.validate();
  const int mics = config.num_mics();
  HrirSet speech_hrir;
  HrirSet noise_hrir;
  if (!config.speech_hrir_path.empty() || !config.noise_hrir_path.empty()) {
    if (config.speech_hrir_path.empty() || config.noise_hrir_path.empty()) {
      throw InvalidArgument("scene: both speech and noise HRIR files are required");
    }
    speech_hrir = load_hrir(config.speech_hrir_path, mics);
    noise_hrir = load_hrir(config.noise_hrir_path, mics);
  } else {
    const auto array = default_mic_array(config.mics_left, config.mics_right, config.head.mic_spacing_m);
    speech_hrir = synth_hrir(config.speech_azimuth_deg, array, config.head, config.speech_distance_m, config.sample_rate);
    noise_hrir = synth_hrir(config.noise_azimuth_deg, array, config.head, config.noise_distance_m, config.sample_rate);
  }
  const DrySources dry = make_dry_sources(config, seed);
  SpatialScene scene;
  scene.speech = render_source(dry.speech, speech_hrir, config.sample_rate);
  scene.noise = render_source(dry.noise, noise_hrir, config.sample_rate);
  const std::size_t len = std::max(scene.speech.length(), scene.noise.length());
  pad_to(scene.speech, len);
  pad_to(scene.noise, len);
  const double pv = total_power(scene.noise);
  if (!(pv > 0.0)) throw InvalidArgument("scene: noise HRIR produces no power");
  if (std::isfinite(config.sensor_noise_db)) {
    // Independent white noise per mic, level relative to the mean per-mic
    // power of the noise image.
    const double sd = std::sqrt(db_to_power(config.sensor_noise_db) * pv / mics);
    std::mt19937_64 rng(mix_seed(seed, 4));
    std::normal_distribution<double> normal(0.0, sd);
    for (auto& ch : scene.noise.channels) {
      for (double& v : ch) v += normal(rng);
    }
  }
  const double pv_total = total_power(scene.noise);
  const double inv = 1.0 / std::sqrt(pv_total);
  for (auto& ch : scene.noise.channels) {
    for (double& v : ch) v *= inv;
  }
  return scene;
}

}  // namespace bmwf
