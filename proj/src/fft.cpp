#include "aat/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>

namespace aat {
namespace {

std::mutex g_plan_mutex;

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
  double* real = nullptr;
  fftw_complex* cplx = nullptr;
};

// One scratch buffer + plan pair per transform size. Guarded by g_plan_mutex
// for the whole execute since plans are tied to their buffers.
PlanPair& plans_for(int n) {
  static std::map<int, PlanPair> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  PlanPair p;
  p.real = fftw_alloc_real(n);
  p.cplx = fftw_alloc_complex(n / 2 + 1);
  p.fwd = fftw_plan_dft_r2c_1d(n, p.real, p.cplx, FFTW_ESTIMATE);
  p.inv = fftw_plan_dft_c2r_1d(n, p.cplx, p.real, FFTW_ESTIMATE);
  return cache.emplace(n, p).first->second;
}

int pow2_at_least(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

std::vector<std::complex<double>> rfft(const std::vector<double>& in, int n) {
  if (n <= 0 || static_cast<int>(in.size()) > n)
    throw std::invalid_argument("rfft: bad transform size");
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  PlanPair& p = plans_for(n);
  std::memset(p.real, 0, sizeof(double) * n);
  std::memcpy(p.real, in.data(), sizeof(double) * in.size());
  fftw_execute(p.fwd);
  std::vector<std::complex<double>> out(n / 2 + 1);
  std::memcpy(out.data(), p.cplx, sizeof(fftw_complex) * out.size());
  return out;
}

std::vector<double> irfft_unscaled(const std::vector<std::complex<double>>& in,
                                   int n) {
  if (static_cast<int>(in.size()) != n / 2 + 1)
    throw std::invalid_argument("irfft: spectrum size mismatch");
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  PlanPair& p = plans_for(n);
  std::memcpy(p.cplx, in.data(), sizeof(fftw_complex) * in.size());
  fftw_execute(p.inv);
  return std::vector<double>(p.real, p.real + n);
}

std::vector<double> irfft(const std::vector<std::complex<double>>& in, int n) {
  std::vector<double> out = irfft_unscaled(in, n);
  const double scale = 1.0 / n;
  for (double& v : out) v *= scale;
  return out;
}

std::vector<double> fft_convolve(const std::vector<double>& a,
                                 const std::vector<double>& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("fft_convolve: empty input");
  const int out_len = static_cast<int>(a.size() + b.size()) - 1;
  const int n = pow2_at_least(out_len);
  auto fa = rfft(a, n);
  auto fb = rfft(b, n);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  auto full = irfft(fa, n);
  full.resize(out_len);
  return full;
}

}  // namespace aat
