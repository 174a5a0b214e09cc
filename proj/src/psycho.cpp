#include "aat/psycho.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "aat/fft.hpp"

namespace aat {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Hann equivalent-noise-bandwidth gain over the 3-bin power sum; subtracted
// so a calibrated tone's masker level equals its peak SPL.
const double kEnbwCorrectionDb = 10.0 * std::log10(1.5);

double db_to_power(double db) { return std::pow(10.0, db / 10.0); }
double power_to_db(double p) {
  return p > 0.0 ? 10.0 * std::log10(p) : -kInf;
}

// Frequency-dependent neighborhood half-width for tonal peak detection,
// in bins (MPEG Model-1 index ranges).
int tonal_neighborhood(int k) {
  if (k < 63) return 3;
  if (k < 127) return 4;
  return 6;
}

// Two-slope spreading function, Delta-z in [-3, 8) Bark.
double spreading_db(double dz, double masker_spl) {
  if (dz < -3.0 || dz >= 8.0) return -kInf;
  if (dz < -1.0) return 17.0 * dz - 0.4 * masker_spl + 11.0;
  if (dz < 0.0) return (0.4 * masker_spl + 6.0) * dz;
  if (dz < 1.0) return -17.0 * dz;
  return -(dz - 1.0) * (17.0 - 0.15 * masker_spl) - 17.0;
}

}  // namespace

double bark_scale(double f_hz) {
  return 13.0 * std::atan(0.00076 * f_hz) +
         3.5 * std::atan((f_hz / 7500.0) * (f_hz / 7500.0));
}

double quiet_threshold_db(double f_hz) {
  if (f_hz <= 20.0 || f_hz >= 18000.0) return kInf;
  const double f = f_hz / 1000.0;
  return 3.64 * std::pow(f, -0.8) -
         6.5 * std::exp(-0.6 * (f - 3.3) * (f - 3.3)) +
         1e-3 * f * f * f * f;
}

std::vector<double> quiet_threshold(const std::vector<double>& bin_freqs_hz) {
  std::vector<double> out(bin_freqs_hz.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = quiet_threshold_db(bin_freqs_hz[i]);
  return out;
}

std::vector<double> bin_frequencies(int n_bins, int n_fft, int sample_rate) {
  std::vector<double> f(n_bins);
  for (int k = 0; k < n_bins; ++k)
    f[k] = static_cast<double>(k) * sample_rate / n_fft;
  return f;
}

std::vector<Masker> find_tonal_maskers(const double* frame_spl, int n_bins,
                                       int n_fft, int sample_rate) {
  std::vector<Masker> maskers;
  for (int k = 2; k < n_bins - 6; ++k) {
    const double p = frame_spl[k];
    if (p <= kSplFloorDb + 1.0) continue;
    // An inaudible peak cannot mask anything; this also discards numerical
    // leakage around the SPL floor.
    if (p < quiet_threshold_db(static_cast<double>(k) * sample_rate / n_fft))
      continue;
    if (!(p > frame_spl[k - 1] && p >= frame_spl[k + 1])) continue;
    const int half = tonal_neighborhood(k);
    bool prominent = true;
    for (int j = 2; j <= half && prominent; ++j)
      prominent = (p - frame_spl[k - j] >= 7.0) && (p - frame_spl[k + j] >= 7.0);
    if (!prominent) continue;
    const double power = db_to_power(frame_spl[k - 1]) + db_to_power(p) +
                         db_to_power(frame_spl[k + 1]);
    Masker m;
    m.bin = k;
    m.spl = power_to_db(power) - kEnbwCorrectionDb;
    m.kind = MaskerKind::kTonal;
    m.bark = bark_scale(static_cast<double>(k) * sample_rate / n_fft);
    maskers.push_back(m);
  }
  return maskers;
}

std::vector<Masker> find_noise_maskers(const double* frame_spl, int n_bins,
                                       int n_fft, int sample_rate,
                                       const std::vector<Masker>& tonal) {
  // Bins claimed by tonal maskers (peak +- its detection neighborhood).
  std::vector<char> excluded(n_bins, 0);
  for (const Masker& t : tonal) {
    const int half = tonal_neighborhood(t.bin);
    for (int k = std::max(0, t.bin - half);
         k <= std::min(n_bins - 1, t.bin + half); ++k)
      excluded[k] = 1;
  }

  std::vector<Masker> maskers;
  int k = 1;
  while (k < n_bins) {
    const int band = static_cast<int>(
        bark_scale(static_cast<double>(k) * sample_rate / n_fft));
    double power = 0.0;
    double log_bin_sum = 0.0;
    int count = 0;
    int last = k;
    for (; last < n_bins; ++last) {
      const double f = static_cast<double>(last) * sample_rate / n_fft;
      if (static_cast<int>(bark_scale(f)) != band) break;
      if (!excluded[last]) power += db_to_power(frame_spl[last]);
      log_bin_sum += std::log(static_cast<double>(last));
      ++count;
    }
    Masker m;
    m.bin = static_cast<int>(std::lround(std::exp(log_bin_sum / count)));
    m.bin = std::clamp(m.bin, k, last - 1);
    m.spl = power_to_db(power) - kEnbwCorrectionDb;
    m.kind = MaskerKind::kNoise;
    m.bark = bark_scale(static_cast<double>(m.bin) * sample_rate / n_fft);
    if (m.spl < kSplFloorDb) m.spl = kSplFloorDb;
    maskers.push_back(m);
    k = last;
  }
  return maskers;
}

std::vector<Masker> decimate_maskers(const std::vector<Masker>& maskers,
                                     const std::vector<double>& quiet) {
  std::vector<Masker> kept;
  for (const Masker& m : maskers) {
    if (m.bin < 0 || m.bin >= static_cast<int>(quiet.size())) continue;
    if (m.spl < quiet[m.bin]) continue;
    if (!kept.empty() && m.bark - kept.back().bark < 0.5) {
      if (m.spl > kept.back().spl) kept.back() = m;
      continue;
    }
    kept.push_back(m);
  }
  return kept;
}

std::vector<double> global_threshold(const std::vector<Masker>& maskers,
                                     const std::vector<double>& quiet,
                                     const std::vector<double>& bin_barks) {
  std::vector<double> out(quiet.size());
  for (std::size_t i = 0; i < quiet.size(); ++i) {
    double power = std::isinf(quiet[i]) ? kInf : db_to_power(quiet[i]);
    for (const Masker& m : maskers) {
      const double dz = bin_barks[i] - m.bark;
      const double sf = spreading_db(dz, m.spl);
      if (std::isinf(sf)) continue;
      const double index = m.kind == MaskerKind::kTonal
                               ? -6.025 - 0.275 * m.bark
                               : -2.025 - 0.175 * m.bark;
      power += db_to_power(m.spl + index + sf);
    }
    out[i] = power_to_db(power);
  }
  return out;
}

std::vector<Masker> frame_maskers(const double* frame_spl, int n_bins,
                                  int n_fft, int sample_rate,
                                  const std::vector<double>& quiet) {
  auto tonal = find_tonal_maskers(frame_spl, n_bins, n_fft, sample_rate);
  auto noise = find_noise_maskers(frame_spl, n_bins, n_fft, sample_rate, tonal);
  std::vector<Masker> all;
  all.reserve(tonal.size() + noise.size());
  std::merge(tonal.begin(), tonal.end(), noise.begin(), noise.end(),
             std::back_inserter(all),
             [](const Masker& a, const Masker& b) { return a.bin < b.bin; });
  return decimate_maskers(all, quiet);
}

MaskingThresholdGrid compute_masking_grid(const AudioClip& x,
                                          const PsychoParams& params) {
  const Spectrogram spec = stft(x, params.frame_len, params.hop);
  const SplGrid spl = spl_normalize(spec);
  const auto freqs = bin_frequencies(spec.n_bins, params.frame_len, x.sample_rate);
  const auto quiet = quiet_threshold(freqs);
  std::vector<double> barks(freqs.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) barks[i] = bark_scale(freqs[i]);

  MaskingThresholdGrid grid;
  grid.frame_len = params.frame_len;
  grid.hop = params.hop;
  grid.sample_rate = x.sample_rate;
  grid.offset_db = spl.offset_db;
  grid.thresholds = Mat(spec.n_frames, spec.n_bins);
  for (int f = 0; f < spec.n_frames; ++f) {
    const auto maskers = frame_maskers(spl.values.data() +
                                           static_cast<std::size_t>(f) * spec.n_bins,
                                       spec.n_bins, params.frame_len,
                                       x.sample_rate, quiet);
    const auto row = global_threshold(maskers, quiet, barks);
    std::copy(row.begin(), row.end(), grid.thresholds.row(f));
  }
  return grid;
}

namespace {

// Shared forward pass of the loss; optionally accumulates the gradient.
double loss_impl(const AudioClip& delta, const MaskingThresholdGrid& grid,
                 const PsychoParams& params, std::vector<double>* grad_out) {
  const Spectrogram spec = stft(delta, grid.frame_len, grid.hop);
  if (spec.n_frames != grid.thresholds.rows)
    throw std::invalid_argument(
        "perceptual_loss: delta framing does not match threshold grid");

  const int n_bins = spec.n_bins;
  const double nyquist = grid.sample_rate / 2.0;
  int n_used_bins = 0;
  for (int k = 0; k < n_bins; ++k) {
    const double f = static_cast<double>(k) * grid.sample_rate / grid.frame_len;
    if (f <= params.nyquist_guard * nyquist) ++n_used_bins;
  }
  const double n_cells = static_cast<double>(spec.n_frames) * n_used_bins;

  const auto window = hann_window(grid.frame_len);
  if (grad_out) grad_out->assign(delta.size(), 0.0);

  double total = 0.0;
  std::vector<std::complex<double>> g_spec(n_bins);
  for (int f = 0; f < spec.n_frames; ++f) {
    bool any_active = false;
    std::fill(g_spec.begin(), g_spec.end(), std::complex<double>(0.0, 0.0));
    for (int k = 0; k < n_used_bins; ++k) {
      const double p = spec.power(f, k);
      const double spl =
          p > 0.0 ? std::max(kSplFloorDb, grid.offset_db + 10.0 * std::log10(p))
                  : kSplFloorDb;
      const double thr = grid.thresholds.at(f, k);
      if (spl <= thr) continue;
      total += params.mode == PerceptualMode::kMeanExcess ? spl - thr : spl;
      if (grad_out && p > 0.0) {
        // d(spl)/d(power) = 10 / (ln 10 * power); hinge slope is 1 in both
        // modes when active.
        const double g_power = (10.0 / std::log(10.0)) / p / n_cells;
        g_spec[k] = g_power * spec.at(f, k);
        any_active = true;
      }
    }
    if (grad_out && any_active) {
      g_spec[0] *= 2.0;
      g_spec[n_bins - 1] *= 2.0;
      const auto g_frame = irfft_unscaled(g_spec, grid.frame_len);
      double* dst = grad_out->data() + static_cast<std::size_t>(f) * grid.hop;
      for (int i = 0; i < grid.frame_len; ++i) dst[i] += g_frame[i] * window[i];
    }
  }
  return total / n_cells;
}

}  // namespace

double perceptual_loss(const AudioClip& delta, const MaskingThresholdGrid& grid,
                       const PsychoParams& params) {
  return loss_impl(delta, grid, params, nullptr);
}

PerceptualLoss perceptual_loss_grad(const AudioClip& delta,
                                    const MaskingThresholdGrid& grid,
                                    const PsychoParams& params) {
  PerceptualLoss result;
  result.value = loss_impl(delta, grid, params, &result.grad);
  return result;
}

}  // namespace aat
