#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

#include "bmwf/error.hpp"

namespace bmwf::fft {
namespace {

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// Plans live for the duration of the process.
fftw_plan get_plan(int n, bool inverse) {
  static std::map<std::pair<int, bool>, fftw_plan> plans;
  std::lock_guard<std::mutex> lock(plan_mutex());
  const auto key = std::make_pair(n, inverse);
  if (auto it = plans.find(key); it != plans.end()) return it->second;
  std::vector<double> r(n);
  std::vector<fftw_complex> c(n / 2 + 1);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT;
  fftw_plan p = inverse ? fftw_plan_dft_c2r_1d(n, c.data(), r.data(), flags)
                        : fftw_plan_dft_r2c_1d(n, r.data(), c.data(), flags);
  if (p == nullptr) throw Error("FFTW planning failed for size " + std::to_string(n));
  plans.emplace(key, p);
  return p;
}

}  // namespace

void forward(std::span<const double> in, std::span<cplx> out) {
  const int n = static_cast<int>(in.size());
  if (n < 1 || out.size() != in.size() / 2 + 1) throw InvalidArgument("fft::forward: bad sizes");
  std::vector<double> buf(in.begin(), in.end());
  fftw_execute_dft_r2c(get_plan(n, false), buf.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void inverse(std::span<const cplx> in, std::span<double> out) {
  const int n = static_cast<int>(out.size());
  if (n < 1 || in.size() != out.size() / 2 + 1) throw InvalidArgument("fft::inverse: bad sizes");
  std::vector<cplx> buf(in.begin(), in.end());
  fftw_execute_dft_c2r(get_plan(n, true), reinterpret_cast<fftw_complex*>(buf.data()),
                       out.data());
  const double scale = 1.0 / n;
  for (double& v : out) v *= scale;
}

}  // namespace bmwf::fft
