#include "aat/mfcc.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

#include "aat/fft.hpp"

namespace aat {
namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

Mat build_filterbank(const FeatureConfig& cfg) {
  const int n_bins = cfg.n_fft / 2 + 1;
  Mat fb(cfg.n_mels, n_bins);
  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(cfg.fmax_hz);
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double fl = edges[m], fc = edges[m + 1], fr = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
      double w = 0.0;
      if (f > fl && f < fc)
        w = (f - fl) / (fc - fl);
      else if (f >= fc && f < fr)
        w = (fr - f) / (fr - fc);
      fb.at(m, k) = w;
    }
  }
  return fb;
}

// Orthonormal DCT-II, n_coeffs x n_mels.
Mat build_dct(int n_coeffs, int n_mels) {
  Mat dct(n_coeffs, n_mels);
  for (int k = 0; k < n_coeffs; ++k) {
    const double scale =
        k == 0 ? std::sqrt(1.0 / n_mels) : std::sqrt(2.0 / n_mels);
    for (int m = 0; m < n_mels; ++m)
      dct.at(k, m) = scale * std::cos(M_PI * k * (2 * m + 1) / (2.0 * n_mels));
  }
  return dct;
}

std::mutex g_cache_mutex;

const Mat& cached_dct(const FeatureConfig& cfg) {
  static std::map<std::pair<int, int>, Mat> cache;
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  const auto key = std::make_pair(cfg.n_coeffs, cfg.n_mels);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, build_dct(cfg.n_coeffs, cfg.n_mels)).first;
  return it->second;
}

}  // namespace

const Mat& mel_filterbank(const FeatureConfig& cfg) {
  static std::map<std::tuple<int, int, int, int>, Mat> cache;
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  const auto key =
      std::make_tuple(cfg.sample_rate, cfg.n_fft, cfg.n_mels,
                      static_cast<int>(cfg.fmax_hz));
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, build_filterbank(cfg)).first;
  return it->second;
}

int mfcc_frame_count(int n_samples, const FeatureConfig& cfg) {
  return stft_frame_count(n_samples, cfg.frame_len, cfg.hop);
}

MfccContext mfcc_forward(const AudioClip& clip, const FeatureConfig& cfg) {
  const int n_frames = mfcc_frame_count(clip.size(), cfg);
  if (n_frames <= 0) throw std::invalid_argument("mfcc: input too short");

  const int n_bins = cfg.n_fft / 2 + 1;
  const auto window = hann_window(cfg.frame_len);
  const Mat& fb = mel_filterbank(cfg);
  const Mat& dct = cached_dct(cfg);

  MfccContext ctx;
  ctx.cfg = cfg;
  ctx.n_frames = n_frames;
  ctx.n_samples = clip.size();
  ctx.spectra.resize(static_cast<std::size_t>(n_frames) * n_bins);
  ctx.mel_energy = Mat(n_frames, cfg.n_mels);
  ctx.feats = Mat(n_frames, cfg.n_coeffs);

  std::vector<double> frame(cfg.frame_len);
  std::vector<double> log_mel(cfg.n_mels);
  for (int f = 0; f < n_frames; ++f) {
    const double* src = clip.samples.data() + static_cast<std::size_t>(f) * cfg.hop;
    for (int i = 0; i < cfg.frame_len; ++i) frame[i] = src[i] * window[i];
    auto bins = rfft(frame, cfg.n_fft);
    std::copy(bins.begin(), bins.end(),
              ctx.spectra.begin() + static_cast<std::size_t>(f) * n_bins);
    for (int m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      const double* w = fb.row(m);
      for (int k = 0; k < n_bins; ++k) e += w[k] * std::norm(bins[k]);
      ctx.mel_energy.at(f, m) = e;
      log_mel[m] = std::log(std::max(e, cfg.log_floor));
    }
    for (int k = 0; k < cfg.n_coeffs; ++k) {
      double c = 0.0;
      const double* row = dct.row(k);
      for (int m = 0; m < cfg.n_mels; ++m) c += row[m] * log_mel[m];
      ctx.feats.at(f, k) = c;
    }
  }
  return ctx;
}

Mat mfcc(const AudioClip& clip, const FeatureConfig& cfg) {
  return mfcc_forward(clip, cfg).feats;
}

std::vector<double> mfcc_backward(const MfccContext& ctx, const Mat& grad_feats) {
  const FeatureConfig& cfg = ctx.cfg;
  if (grad_feats.rows != ctx.n_frames || grad_feats.cols != cfg.n_coeffs)
    throw std::invalid_argument("mfcc_backward: gradient shape mismatch");

  const int n_bins = cfg.n_fft / 2 + 1;
  const auto window = hann_window(cfg.frame_len);
  const Mat& fb = mel_filterbank(cfg);
  const Mat& dct = cached_dct(cfg);

  std::vector<double> grad_x(ctx.n_samples, 0.0);
  std::vector<double> g_log(cfg.n_mels);
  std::vector<double> g_power(n_bins);
  std::vector<std::complex<double>> g_spec(n_bins);

  for (int f = 0; f < ctx.n_frames; ++f) {
    // DCT transpose.
    for (int m = 0; m < cfg.n_mels; ++m) {
      double g = 0.0;
      for (int k = 0; k < cfg.n_coeffs; ++k) g += dct.at(k, m) * grad_feats.at(f, k);
      // log with floor guard: zero gradient at the floor.
      const double e = ctx.mel_energy.at(f, m);
      g_log[m] = e > cfg.log_floor ? g / e : 0.0;
    }
    // Filterbank transpose.
    for (int k = 0; k < n_bins; ++k) {
      double g = 0.0;
      for (int m = 0; m < cfg.n_mels; ++m) g += fb.at(m, k) * g_log[m];
      g_power[k] = g;
    }
    // Power-spectrum adjoint: dL/dx_n = sum_k g_k * 2 Re(X_k e^{i w k n}).
    // The unnormalized c2r transform supplies interior bins doubled via
    // Hermitian symmetry; DC and Nyquist need the explicit factor 2.
    const std::complex<double>* spec =
        ctx.spectra.data() + static_cast<std::size_t>(f) * n_bins;
    for (int k = 0; k < n_bins; ++k) g_spec[k] = g_power[k] * spec[k];
    g_spec[0] *= 2.0;
    g_spec[n_bins - 1] *= 2.0;
    const auto g_frame = irfft_unscaled(g_spec, cfg.n_fft);
    double* dst = grad_x.data() + static_cast<std::size_t>(f) * cfg.hop;
    for (int i = 0; i < cfg.frame_len; ++i) dst[i] += g_frame[i] * window[i];
  }
  return grad_x;
}

}  // namespace aat
