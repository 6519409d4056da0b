#pragma once

#include "bmwf/scene.hpp"
#include "bmwf/solver.hpp"
#include "bmwf/stats.hpp"
#include "bmwf/stft.hpp"

namespace bmwf {

/// How the solver's speech coherence is obtained.
enum class SpeechEstimate {
  kOracle,    // from the clean speech component
  kSubtract,  // repair_psd(Phi_y - Phi_v)
};

std::string to_string(SpeechEstimate e);
SpeechEstimate parse_speech_estimate(const std::string& name);

struct SceneAnalysis {
  /// Statistics handed to the solver.
  SceneStatistics stats;
  /// Speech coherence from the clean component, used for speech metrics.
  CoherenceStack phi_x_oracle;
  PowerProfile power;
  int frames = 0;
};

/// STFT of y, v and x = y - v, followed by coherence and power estimation.
/// y and v must have the same shape.
SceneAnalysis analyze_signals(const MultiSignal& y, const MultiSignal& v, const StftConfig& stft, int ref_left,
                              int ref_right, SpeechEstimate mode = SpeechEstimate::kOracle);

/// Mixes a rendered scene and analyzes it.
SceneAnalysis analyze_scene(const SpatialScene& scene, double snr_in_db, double g_sq_db, const StftConfig& stft,
                            int ref_left, int ref_right, SpeechEstimate mode = SpeechEstimate::kOracle);

/// Processes y with a filter bank: STFT, per-bin filtering, WOLA synthesis.
/// Output is trimmed to the input length.
MultiSignal process_signal(const MultiSignal& y, const FilterBank& w, const StftConfig& stft);

}  // namespace bmwf
