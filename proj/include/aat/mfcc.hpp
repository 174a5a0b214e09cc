#pragma once

#include <complex>
#include <vector>

#include "aat/audio.hpp"
#include "aat/mat.hpp"

namespace aat {

struct FeatureConfig {
  int sample_rate = 16000;
  int frame_len = 400;  // 25 ms
  int hop = 160;        // 10 ms
  int n_fft = 512;
  int n_mels = 40;
  int n_coeffs = 20;
  double fmin_hz = 20.0;
  double fmax_hz = 8000.0;
  double log_floor = 1e-10;
};

// Saved activations needed to backpropagate through the feature pipeline.
struct MfccContext {
  FeatureConfig cfg;
  int n_frames = 0;
  int n_samples = 0;
  std::vector<std::complex<double>> spectra;  // frames x (n_fft/2+1)
  Mat mel_energy;                             // frames x n_mels, pre-log
  Mat feats;                                  // frames x n_coeffs
};

// Number of feature frames for a clip of n samples (0 if too short).
int mfcc_frame_count(int n_samples, const FeatureConfig& cfg);

// Hann window -> zero-padded FFT power -> mel filterbank -> log -> DCT-II.
// Throws std::invalid_argument if the clip is shorter than one frame.
Mat mfcc(const AudioClip& clip, const FeatureConfig& cfg);

MfccContext mfcc_forward(const AudioClip& clip, const FeatureConfig& cfg);

// dL/d(samples) given dL/d(feats). Wherever a mel energy hit the log floor the
// local gradient is zero.
std::vector<double> mfcc_backward(const MfccContext& ctx, const Mat& grad_feats);

// Triangular HTK-mel filterbank weights, n_mels x (n_fft/2+1).
const Mat& mel_filterbank(const FeatureConfig& cfg);

}  // namespace aat
