#pragma once

// Thin wrapper over FFTW's real transforms. Plans are created once per size
// (planning is not thread-safe in FFTW, execution is).

#include <span>
#include <vector>

#include "bmwf/linalg.hpp"

namespace bmwf::fft {

/// Unnormalized forward real DFT of length in.size(); writes n/2+1 bins.
void forward(std::span<const double> in, std::span<cplx> out);

/// Inverse real DFT with 1/n normalization; `in` holds n/2+1 bins.
void inverse(std::span<const cplx> in, std::span<double> out);

inline std::vector<cplx> forward(std::span<const double> in) {
  std::vector<cplx> out(in.size() / 2 + 1);
  forward(in, out);
  return out;
}

}  // namespace bmwf::fft
