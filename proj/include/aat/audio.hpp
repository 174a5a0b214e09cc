#pragma once

#include <complex>
#include <string>
#include <vector>

namespace aat {

// Mono waveform, samples nominally in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;

  int size() const { return static_cast<int>(samples.size()); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Complex STFT frames, one row per frame, frame_len/2 + 1 bins per row.
struct Spectrogram {
  std::vector<std::complex<double>> bins;  // row-major frames x n_bins
  int n_frames = 0;
  int n_bins = 0;
  int frame_len = 0;
  int hop = 0;
  std::string window = "hann";

  std::complex<double>& at(int frame, int bin) {
    return bins[static_cast<std::size_t>(frame) * n_bins + bin];
  }
  const std::complex<double>& at(int frame, int bin) const {
    return bins[static_cast<std::size_t>(frame) * n_bins + bin];
  }
  double power(int frame, int bin) const { return std::norm(at(frame, bin)); }
};

// Per-(frame, bin) levels in dB SPL under the 96 dB normalization convention.
struct SplGrid {
  std::vector<double> values;  // row-major frames x n_bins
  int n_frames = 0;
  int n_bins = 0;
  double offset_db = 0.0;  // additive normalization applied to 10*log10(power)

  double& at(int frame, int bin) {
    return values[static_cast<std::size_t>(frame) * n_bins + bin];
  }
  double at(int frame, int bin) const {
    return values[static_cast<std::size_t>(frame) * n_bins + bin];
  }
};

struct Rir;  // rir.hpp

constexpr double kSplFloorDb = -200.0;
constexpr double kSplAnchorDb = 96.0;

std::vector<double> hann_window(int n);

// Number of analysis frames, or 0 if the clip is shorter than one frame.
int stft_frame_count(int n_samples, int frame_len, int hop);

// Hann-windowed STFT. frame_len must be a power of two, 0 < hop <= frame_len.
// Throws std::invalid_argument if the clip is shorter than one frame.
Spectrogram stft(const AudioClip& clip, int frame_len, int hop);

// Overlap-add inverse with synthesis windowing; interior samples reconstruct
// the input, edges are attenuated by partial window coverage.
AudioClip istft(const Spectrogram& spec, int sample_rate);

// Normalization offset mapping the grid's peak power to 96 dB SPL.
double spl_offset(const Spectrogram& spec);

// PSD in dB SPL with the global max at 96 dB; all-zero input maps to the
// -200 dB floor.
SplGrid spl_normalize(const Spectrogram& spec);

// Same, but with a caller-provided normalization offset (used to measure a
// perturbation on the original signal's scale).
SplGrid spl_with_offset(const Spectrogram& spec, double offset_db);

// Full linear convolution truncated to len(clip). Throws on empty RIR or
// sample-rate mismatch.
AudioClip convolve(const AudioClip& clip, const Rir& rir);

// Truncated-convolution adjoint: given dL/d(output), returns dL/d(input).
std::vector<double> convolve_adjoint(const std::vector<double>& grad_out,
                                     const Rir& rir);

// 20*log10(rms(signal)/rms(noise)). Throws on length mismatch or zero noise.
double snr_db(const AudioClip& signal, const AudioClip& noise);

// 16-bit PCM mono WAV. Samples are mapped to [-1, 1] by division by 32768.
AudioClip read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioClip& clip);

// Two-dimensional grids as CSV (debugging aid).
void write_csv(const std::string& path, const std::vector<double>& values,
               int n_rows, int n_cols);

}  // namespace aat
