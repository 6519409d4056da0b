#pragma once

#include <string>
#include <vector>

#include "bmwf/error.hpp"
#include "bmwf/solver.hpp"
#include "bmwf/stats.hpp"
#include "bmwf/stft.hpp"

namespace bmwf {

enum class DesignMode { kScalar, kPerBin };

std::string to_string(DesignMode mode);
DesignMode parse_design_mode(const std::string& name);

struct DesignSpec {
  double snr_worst_db = -5.0;
  double ild_max_db = 2.0;
  double itd_max_ms = 2.0;
  double beta_min = 1e-6;
  double beta_step = 1.2589254117941673;  // 10^0.1
  double beta_max = 1e3;
  DesignMode mode = DesignMode::kScalar;
  /// Allowed increase of a cue error between consecutive grid steps, as a
  /// fraction of max(threshold, previous value), before the monotone-trend
  /// check aborts.
  double monotone_tol = 0.05;

  void validate() const;
  /// beta_min * beta_step^i for all values not above beta_max.
  std::vector<double> grid() const;
};

struct DesignStep {
  double beta = 0.0;
  double ild_db = 0.0;  // |delta ILD_N|
  double itd_ms = 0.0;  // |delta ITD_N|
};

/// Designed trade-off constants plus the metadata needed to reproduce them.
struct BetaProfile {
  std::vector<double> beta;
  /// Per-bin noise power of the design scene; MWF-ITF uses the fixed weight
  /// alpha(k) = beta(k) * ref_noise_power(k).
  std::vector<double> ref_noise_power;
  std::vector<PenaltyKind> kinds{PenaltyKind::kITF};
  bool dynamic = true;
  double achieved_ild_db = 0.0;
  double achieved_itd_ms = 0.0;
  DesignSpec spec;
  std::vector<DesignStep> trace;

  int num_bins() const { return static_cast<int>(beta.size()); }
  /// MWF-ITF-R: alpha = beta(k) * g^2.
  MethodSpec robust_method() const;
  /// MWF-ITF: alpha = beta(k) * ref_noise_power(k), independent of the input.
  MethodSpec fixed_method() const;
  MethodSpec method(Method m) const;
  void validate() const;
};

/// Thresholds unreachable on the search grid. Carries the best step seen.
class DesignFailure : public Error {
 public:
  DesignFailure(const std::string& what, DesignStep best)
      : Error(what, ExitCode::kDesignFailure), best_(best) {}
  const DesignStep& best() const noexcept { return best_; }

 private:
  DesignStep best_;
};

/// Smallest grid beta whose solution meets both noise-cue thresholds on the
/// given scene statistics (expected at snr_worst). Scalar mode applies one
/// beta to every bin and tests the global cue errors; per-bin mode tests
/// each bin's own cue errors. Throws DesignFailure when beta_max is
/// reached, or when a cue error grows along the grid in scalar mode.
BetaProfile design_beta(const SceneStatistics& stats, const StftConfig& stft, const std::vector<PenaltyKind>& kinds,
                        const DesignSpec& spec, const SolverOptions& options, int workers = 1);

/// Per-(frame, bin) weights, laid out like PowerProfile: dynamic profiles
/// give beta(k) * g^2(l, k), fixed ones beta(k).
std::vector<double> resolve_alpha(const BetaProfile& profile, const PowerProfile& power);

std::string beta_profile_to_json(const BetaProfile& profile);
BetaProfile beta_profile_from_json(const std::string& text);
void save_beta_profile(const std::string& path, const BetaProfile& profile);
BetaProfile load_beta_profile(const std::string& path);

}  // namespace bmwf
