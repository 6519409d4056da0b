#include "bmwf/pipeline.hpp"

#include "bmwf/error.hpp"

namespace bmwf {

std::string to_string(SpeechEstimate e) { return e == SpeechEstimate::kOracle ? "oracle" : "subtract"; }

SpeechEstimate parse_speech_estimate(const std::string& name) {
  if (name == "oracle") return SpeechEstimate::kOracle;
  if (name == "subtract") return SpeechEstimate::kSubtract;
  throw InvalidArgument("unknown speech estimate '" + name + "'");
}

SceneAnalysis analyze_signals(const MultiSignal& y, const MultiSignal& v, const StftConfig& stft, int ref_left,
                              int ref_right, SpeechEstimate mode) {
  if (y.channels.size() != v.channels.size()) throw InvalidArgument("analyze: noisy and noise channel counts differ");
  MultiSignal x = y;
  for (std::size_t m = 0; m < y.channels.size(); ++m) {
    if (y.channels[m].size() != v.channels[m].size()) throw InvalidArgument("analyze: noisy and noise lengths differ");
    for (std::size_t n = 0; n < x.channels[m].size(); ++n) x.channels[m][n] -= v.channels[m][n];
  }
  const SpectralFrameSet yf = stft_analyze(y, stft);
  const SpectralFrameSet vf = stft_analyze(v, stft);
  const SpectralFrameSet xf = stft_analyze(x, stft);

  SceneAnalysis a;
  a.frames = yf.num_frames();
  a.phi_x_oracle = estimate_coherence(xf, CoherenceKind::kSpeech);
  a.stats.phi_v = estimate_coherence(vf, CoherenceKind::kNoise);
  a.stats.phi_x = mode == SpeechEstimate::kOracle
                      ? a.phi_x_oracle
                      : estimate_speech_coherence(estimate_coherence(yf, CoherenceKind::kNoisy), a.stats.phi_v);
  a.power = estimate_power_profile(vf, xf, PowerMode::kBatch);
  a.stats.noise_power.resize(a.stats.phi_v.num_bins());
  for (int k = 0; k < a.stats.phi_v.num_bins(); ++k) a.stats.noise_power[k] = a.stats.phi_v.bins[k].trace().real();
  a.stats.ref_left = ref_left;
  a.stats.ref_right = ref_right;
  a.stats.validate();
  return a;
}

SceneAnalysis analyze_scene(const SpatialScene& scene, double snr_in_db, double g_sq_db, const StftConfig& stft,
                            int ref_left, int ref_right, SpeechEstimate mode) {
  const MixedScene mix = mix_scene(scene.speech, scene.noise, snr_in_db, g_sq_db);
  return analyze_signals(mix.y, mix.v, stft, ref_left, ref_right, mode);
}

MultiSignal process_signal(const MultiSignal& y, const FilterBank& w, const StftConfig& stft) {
  const SpectralFrameSet yf = stft_analyze(y, stft);
  MultiSignal out = stft_synthesize(apply_filters(yf, w));
  const std::size_t len = y.channels.empty() ? 0 : y.channels.front().size();
  for (auto& c : out.channels) c.resize(len, 0.0);
  return out;
}

}  // namespace bmwf
