#include "bmwf/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "bmwf/error.hpp"
#include "csv_util.hpp"

namespace bmwf {

CoherenceStack CoherenceStack::scaled(double c) const {
  CoherenceStack out = *this;
  for (auto& m : out.bins) m *= c;
  return out;
}

std::vector<double> PowerProfile::mean_g_sq_per_bin() const {
  std::vector<double> out(num_bins, 0.0);
  if (num_frames == 0) return out;
  for (int l = 0; l < num_frames; ++l) {
    for (int k = 0; k < num_bins; ++k) out[k] += g_sq_at(l, k);
  }
  for (double& v : out) v /= num_frames;
  return out;
}

double PowerProfile::snr_at(int frame, int bin) const {
  const std::size_t i = static_cast<std::size_t>(frame) * num_bins + bin;
  return sigma_v_sq[i] > 0.0 ? sigma_x_sq[i] / sigma_v_sq[i] : 0.0;
}

CoherenceStack estimate_coherence(const SpectralFrameSet& frames, CoherenceKind kind) {
  if (frames.num_frames() < 1) throw InvalidArgument("estimate_coherence: zero frames");
  const int mics = frames.num_mics();
  CoherenceStack out;
  out.kind = kind;
  out.bins.assign(frames.num_bins(), CMatrix::Zero(mics, mics));
  for (int k = 0; k < frames.num_bins(); ++k) {
    CMatrix& acc = out.bins[k];
    for (int l = 0; l < frames.num_frames(); ++l) {
      const auto s = frames.mic_vector(l, k);
      acc.noalias() += s * s.adjoint();
    }
    acc /= static_cast<double>(frames.num_frames());
    // Exact Hermitian symmetry (the outer-product sum is symmetric up to rounding).
    acc = (0.5 * (acc + acc.adjoint())).eval();
  }
  return out;
}

CMatrix repair_psd(const CMatrix& a) {
  const CMatrix h = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(h);
  if (eig.info() != Eigen::Success) throw SolverError("repair_psd: eigendecomposition failed");
  Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  if ((lambda.array() == eig.eigenvalues().array()).all()) return h;
  CMatrix out = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().adjoint();
  return 0.5 * (out + out.adjoint());
}

CoherenceStack estimate_speech_coherence(const CoherenceStack& phi_y, const CoherenceStack& phi_v) {
  if (phi_y.num_bins() != phi_v.num_bins() || phi_y.num_mics() != phi_v.num_mics()) {
    throw InvalidArgument("estimate_speech_coherence: dimension mismatch");
  }
  CoherenceStack out;
  out.kind = CoherenceKind::kSpeech;
  out.bins.reserve(phi_y.bins.size());
  for (std::size_t k = 0; k < phi_y.bins.size(); ++k) out.bins.push_back(repair_psd(phi_y.bins[k] - phi_v.bins[k]));
  return out;
}

PowerProfile estimate_power_profile(const SpectralFrameSet& noise_frames, const SpectralFrameSet& speech_frames,
                                    PowerMode mode, double forgetting_factor) {
  if (noise_frames.num_frames() < 1 || speech_frames.num_frames() < 1) {
    throw InvalidArgument("estimate_power_profile: empty inputs");
  }
  if (noise_frames.num_frames() != speech_frames.num_frames() ||
      noise_frames.num_bins() != speech_frames.num_bins()) {
    throw InvalidArgument("estimate_power_profile: speech and noise frames are not aligned");
  }
  if (mode == PowerMode::kRecursive && !(forgetting_factor > 0.0 && forgetting_factor < 1.0)) {
    throw InvalidArgument("estimate_power_profile: forgetting factor must lie in (0, 1)");
  }
  const int frames = noise_frames.num_frames();
  const int bins = noise_frames.num_bins();
  const std::size_t n = static_cast<std::size_t>(frames) * bins;
  PowerProfile p;
  p.num_frames = frames;
  p.num_bins = bins;
  p.g_sq.assign(n, 0.0);
  p.sigma_x_sq.assign(n, 0.0);
  p.sigma_v_sq.assign(n, 0.0);

  auto inst = [](const SpectralFrameSet& f, int l, int k) { return f.mic_vector(l, k).squaredNorm(); };

  if (mode == PowerMode::kBatch) {
    for (int k = 0; k < bins; ++k) {
      double sv = 0.0, sx = 0.0;
      for (int l = 0; l < frames; ++l) {
        sv += inst(noise_frames, l, k);
        sx += inst(speech_frames, l, k);
      }
      sv /= frames;
      sx /= frames;
      for (int l = 0; l < frames; ++l) {
        const std::size_t i = static_cast<std::size_t>(l) * bins + k;
        p.sigma_v_sq[i] = sv;
        p.sigma_x_sq[i] = sx;
      }
    }
  } else {
    const double ff = forgetting_factor;
    for (int k = 0; k < bins; ++k) {
      double sv = inst(noise_frames, 0, k);
      double sx = inst(speech_frames, 0, k);
      for (int l = 0; l < frames; ++l) {
        if (l > 0) {
          sv = ff * sv + (1.0 - ff) * inst(noise_frames, l, k);
          sx = ff * sx + (1.0 - ff) * inst(speech_frames, l, k);
        }
        const std::size_t i = static_cast<std::size_t>(l) * bins + k;
        p.sigma_v_sq[i] = sv;
        p.sigma_x_sq[i] = sx;
      }
    }
  }
  p.g_sq = p.sigma_v_sq;

  double sum_g = 0.0, sum_x = 0.0, sum_v = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_g += p.g_sq[i];
    sum_x += p.sigma_x_sq[i];
    sum_v += p.sigma_v_sq[i];
  }
  p.g_bar_sq = sum_g / frames;
  p.snr_bar_in = sum_v > 0.0 ? sum_x / sum_v : 0.0;
  return p;
}

NormalizedStack normalize_statistics(const CoherenceStack& phi) {
  NormalizedStack out;
  out.normalized.kind = phi.kind == CoherenceKind::kSpeech ? CoherenceKind::kNormalizedSpeech
                        : phi.kind == CoherenceKind::kNoise ? CoherenceKind::kNormalizedNoise
                                                            : phi.kind;
  out.normalized.bins.reserve(phi.bins.size());
  out.power.reserve(phi.bins.size());
  for (std::size_t k = 0; k < phi.bins.size(); ++k) {
    const double tr = phi.bins[k].trace().real();
    if (tr > 0.0) {
      out.normalized.bins.push_back(phi.bins[k] / tr);
      out.power.push_back(tr);
    } else {
      out.normalized.bins.push_back(CMatrix::Zero(phi.bins[k].rows(), phi.bins[k].cols()));
      out.power.push_back(0.0);
      out.zero_trace_bins.push_back(static_cast<int>(k));
    }
  }
  return out;
}

bool is_hermitian(const CMatrix& a, double rel_tol) {
  const double scale = a.norm();
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= rel_tol * std::max(scale, 1e-300);
}

bool is_psd(const CMatrix& a, double rel_tol) {
  const CMatrix h = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(h, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -rel_tol * std::max(a.norm(), 1e-300);
}

void write_coherence_csv(std::ostream& os, const CoherenceStack& phi) {
  os << "bin,row,col,re,im\n";
  for (int k = 0; k < phi.num_bins(); ++k) {
    const CMatrix& m = phi.bins[k];
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) {
        os << k << ',' << r << ',' << c << ',' << csv::format_double(m(r, c).real()) << ','
           << csv::format_double(m(r, c).imag()) << '\n';
      }
    }
  }
}

CoherenceStack read_coherence_csv(std::istream& is, CoherenceKind kind) {
  std::string line;
  if (!std::getline(is, line) || csv::trim(line) != "bin,row,col,re,im") {
    throw IoError("coherence CSV: missing header 'bin,row,col,re,im'");
  }
  std::map<std::tuple<int, int, int>, cplx> entries;
  int max_k = -1, max_r = -1;
  while (std::getline(is, line)) {
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 5) throw IoError("coherence CSV: expected 5 fields: " + line);
    const int k = csv::parse_int(f[0]);
    const int r = csv::parse_int(f[1]);
    const int c = csv::parse_int(f[2]);
    if (k < 0 || r < 0 || c < 0) throw IoError("coherence CSV: negative index: " + line);
    entries[{k, r, c}] = cplx(csv::parse_double(f[3]), csv::parse_double(f[4]));
    max_k = std::max(max_k, k);
    max_r = std::max({max_r, r, c});
  }
  if (max_k < 0) throw IoError("coherence CSV: no rows");
  const int mics = max_r + 1;
  if (entries.size() != static_cast<std::size_t>(max_k + 1) * mics * mics) {
    throw IoError("coherence CSV: incomplete stack");
  }
  CoherenceStack out;
  out.kind = kind;
  out.bins.assign(max_k + 1, CMatrix::Zero(mics, mics));
  for (const auto& [key, value] : entries) {
    const auto [k, r, c] = key;
    out.bins[k](r, c) = value;
  }
  return out;
}

void save_coherence_csv(const std::string& path, const CoherenceStack& phi) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  write_coherence_csv(os, phi);
  if (!os) throw IoError("write failed: " + path);
}

CoherenceStack load_coherence_csv(const std::string& path, CoherenceKind kind) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path);
  return read_coherence_csv(is, kind);
}

}  // namespace bmwf
