#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <limits>
#include <vector>

#include "bmwf/filter_bank.hpp"
#include "bmwf/stft.hpp"

namespace bmwf {

/// Minimal spherical-head model used to synthesize deterministic HRIRs:
/// Woodworth interaural delay, a one-pole head-shadow low-pass on the far
/// ear, and a 1/r distance gain.
struct HeadModel {
  double head_radius_m = 0.0875;
  double speed_of_sound = 343.0;
  int hrir_length = 512;
  /// Common onset delay (samples) so fractional-delay kernels stay causal.
  double onset_samples = 24.0;
  /// Pole of the far-ear shadow filter at |azimuth| = 90 degrees.
  double shadow_pole_max = 0.6;
  /// Spacing between consecutive mics of one hearing aid, front to back.
  double mic_spacing_m = 0.0075;
  /// Energy of the diffuse tail relative to the direct part, in dB; -inf gives a dry response.
  /// The tail is independent per mic, so speech coherence stays full rank.
  double tail_level_db = -25.0;
  /// 60 dB decay time of the tail.
  double tail_t60_ms = 30.0;
};

struct MicPosition {
  Side side = Side::kLeft;
  /// Offset along the look direction; negative is behind the frontal mic.
  double forward_offset_m = 0.0;
};

/// Left mics first (front to back), then right mics.
std::vector<MicPosition> default_mic_array(int mics_left, int mics_right, double spacing_m);

struct HrirSet {
  std::vector<std::vector<double>> responses;  // one per mic
  double azimuth_deg = 0.0;
  double distance_m = 1.0;

  int num_mics() const { return static_cast<int>(responses.size()); }
  std::size_t length() const { return responses.empty() ? 0 : responses.front().size(); }
};

struct SceneConfig {
  double speech_azimuth_deg = 0.0;
  double speech_distance_m = 0.8;
  double noise_azimuth_deg = -60.0;
  double noise_distance_m = 3.0;
  int mics_left = 3;
  int mics_right = 3;
  double sample_rate = 16000.0;
  double snr_in_db = -5.0;
  double lombard_gain_sq_db = 0.0;
  double duration_s = 3.0;
  /// Spatially white sensor noise added to the noise image, in dB relative
  /// to its mean per-mic power; -inf disables it.
  double sensor_noise_db = -std::numeric_limits<double>::infinity();
  HeadModel head{};
  /// Measured HRIR files (M-channel WAV per source); synthetic model when empty.
  std::string speech_hrir_path;
  std::string noise_hrir_path;
  /// Depth of the 4 Hz amplitude modulation applied to the speech proxy.
  double speech_modulation_depth = 0.9;
  double speech_modulation_hz = 4.0;
  int ref_mic_left = 0;
  int ref_mic_right = -1;  // -1 selects the frontal right mic (index mics_left)

  int num_mics() const { return mics_left + mics_right; }
  int resolved_ref_right() const { return ref_mic_right < 0 ? mics_left : ref_mic_right; }
  void validate() const;
};

/// Spherical-head HRIRs for one source position. Throws for |azimuth| > 90.
HrirSet synth_hrir(double azimuth_deg, const std::vector<MicPosition>& mics,
                   const HeadModel& model, double distance_m, double sample_rate);

/// Woodworth interaural delay (seconds); negative when the left ear leads.
double woodworth_delay(double azimuth_deg, const HeadModel& model);

/// Loads an M-channel WAV whose channel m is the response of mic m.
HrirSet load_hrir(const std::string& path, int num_mics);

/// Full linear convolution of `dry` with every response.
MultiSignal render_source(const std::vector<double>& dry, const HrirSet& hrirs, double sample_rate);

/// Total power: mean over samples of the squared norm across channels.
double total_power(const MultiSignal& s);

struct MixedScene {
  MultiSignal y;
  MultiSignal x;  // scaled speech component
  MultiSignal v;  // scaled noise component
  double speech_gain = 1.0;  // gamma
  double lombard_gain = 1.0;  // g
};

/// Scales speech to the requested SNR (noise held fixed), then applies the
/// common Lombard gain g = 10^(g_sq_db/20) to both: y = g(gamma x + v).
MixedScene mix_scene(const MultiSignal& x, const MultiSignal& v, double snr_in_db, double g_sq_db);

/// Seeded Gaussian noise shaped to the third-octave-smoothed magnitude
/// spectrum of `envelope_source`, normalized to zero mean and unit variance.
std::vector<double> gen_speech_shaped_noise(const std::vector<double>& envelope_source,
                                            std::size_t length, std::uint64_t seed);

/// Fixed long-term speech-like spectrum reference (band-limited coloured
/// noise) used as the envelope source for the bundled generators.
std::vector<double> speech_spectrum_reference(std::size_t length, double sample_rate, std::uint64_t seed);

/// Dry source pair for the synthetic scene: a 4 Hz modulated speech proxy
/// and an independent speech-shaped interferer.
struct DrySources {
  std::vector<double> speech;
  std::vector<double> noise;
};
DrySources make_dry_sources(const SceneConfig& config, std::uint64_t seed);

/// Spatialized (unmixed) speech and noise images; noise normalized to unit total power.
struct SpatialScene {
  MultiSignal speech;
  MultiSignal noise;
};
SpatialScene render_scene(const SceneConfig& config, std::uint64_t seed);

}  // namespace bmwf
