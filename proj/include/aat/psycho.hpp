#pragma once

#include <vector>

#include "aat/audio.hpp"
#include "aat/mat.hpp"

namespace aat {

enum class MaskerKind { kTonal, kNoise };

struct Masker {
  int bin = 0;
  double spl = 0.0;  // dB SPL
  MaskerKind kind = MaskerKind::kTonal;
  double bark = 0.0;
};

// Precomputed global masking threshold of the original audio. Immutable
// during the attack loop.
struct MaskingThresholdGrid {
  Mat thresholds;  // frames x bins, dB SPL
  int frame_len = 512;
  int hop = 256;
  int sample_rate = 16000;
  double offset_db = 0.0;  // SPL normalization offset of the source signal
};

// Perceptual-loss averaging rule. The compound loss uses the hinge-excess
// mean; the raw-SPL reading of the regularizer is kept selectable.
enum class PerceptualMode { kMeanExcess, kMeanExceedingSpl };

struct PsychoParams {
  int frame_len = 512;
  int hop = 256;
  PerceptualMode mode = PerceptualMode::kMeanExcess;
  double nyquist_guard = 0.95;  // bins above this fraction are excluded
};

// Bark transform z(f) = 13 atan(0.00076 f) + 3.5 atan((f/7500)^2).
double bark_scale(double f_hz);

// Absolute threshold of hearing; +inf outside (20, 18000) Hz.
double quiet_threshold_db(double f_hz);
std::vector<double> quiet_threshold(const std::vector<double>& bin_freqs_hz);

// Center frequencies of the analysis bins.
std::vector<double> bin_frequencies(int n_bins, int n_fft, int sample_rate);

// Local maxima standing >= 7 dB above their frequency-dependent
// neighborhoods. Masker level is the power sum of the peak and its two
// neighbors, compensated for the Hann window's noise bandwidth so a
// calibrated tone reads back at its own SPL.
std::vector<Masker> find_tonal_maskers(const double* frame_spl, int n_bins,
                                       int n_fft, int sample_rate);

// One masker per critical band from the power sum of bins outside the tonal
// exclusion neighborhoods, placed at the band's geometric-mean bin.
std::vector<Masker> find_noise_maskers(const double* frame_spl, int n_bins,
                                       int n_fft, int sample_rate,
                                       const std::vector<Masker>& tonal);

// Drops maskers below the quiet threshold; of any two within 0.5 Bark the
// louder survives. `maskers` must be sorted by bin.
std::vector<Masker> decimate_maskers(const std::vector<Masker>& maskers,
                                     const std::vector<double>& quiet);

// Power sum of the quiet threshold and all individual masking thresholds.
std::vector<double> global_threshold(const std::vector<Masker>& maskers,
                                     const std::vector<double>& quiet,
                                     const std::vector<double>& bin_barks);

// Full per-frame analysis of the original clip.
MaskingThresholdGrid compute_masking_grid(const AudioClip& x,
                                          const PsychoParams& params = {});

// Maskers of one frame after decimation (diagnostics / CSV export).
std::vector<Masker> frame_maskers(const double* frame_spl, int n_bins,
                                  int n_fft, int sample_rate,
                                  const std::vector<double>& quiet);

struct PerceptualLoss {
  double value = 0.0;
  std::vector<double> grad;  // dL/d(delta samples)
};

// p(delta): mean hinge excess of the perturbation's SPL over the precomputed
// threshold, measured on the original signal's normalization offset.
// Throws if delta's framing does not match the grid.
double perceptual_loss(const AudioClip& delta, const MaskingThresholdGrid& grid,
                       const PsychoParams& params = {});

PerceptualLoss perceptual_loss_grad(const AudioClip& delta,
                                    const MaskingThresholdGrid& grid,
                                    const PsychoParams& params = {});

}  // namespace aat
