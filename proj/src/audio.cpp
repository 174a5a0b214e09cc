#include "aat/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "aat/fft.hpp"
#include "aat/rir.hpp"

namespace aat {
namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

double rms(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc / v.size());
}

void put_u32(std::ofstream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

void put_u16(std::ofstream& os, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

std::uint32_t get_u32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) { return p[0] | (p[1] << 8); }

}  // namespace

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);  // periodic form
  return w;
}

int stft_frame_count(int n_samples, int frame_len, int hop) {
  if (n_samples < frame_len) return 0;
  return (n_samples - frame_len) / hop + 1;
}

Spectrogram stft(const AudioClip& clip, int frame_len, int hop) {
  if (!is_pow2(frame_len))
    throw std::invalid_argument("stft: frame_len must be a power of two");
  if (hop <= 0 || hop > frame_len)
    throw std::invalid_argument("stft: need 0 < hop <= frame_len");
  if (clip.size() < frame_len)
    throw std::invalid_argument("stft: input too short");

  const int n_frames = stft_frame_count(clip.size(), frame_len, hop);
  const int n_bins = frame_len / 2 + 1;
  const auto window = hann_window(frame_len);

  Spectrogram spec;
  spec.n_frames = n_frames;
  spec.n_bins = n_bins;
  spec.frame_len = frame_len;
  spec.hop = hop;
  spec.bins.resize(static_cast<std::size_t>(n_frames) * n_bins);

  std::vector<double> frame(frame_len);
  for (int f = 0; f < n_frames; ++f) {
    const double* src = clip.samples.data() + static_cast<std::size_t>(f) * hop;
    for (int i = 0; i < frame_len; ++i) frame[i] = src[i] * window[i];
    auto bins = rfft(frame, frame_len);
    std::copy(bins.begin(), bins.end(),
              spec.bins.begin() + static_cast<std::size_t>(f) * n_bins);
  }
  return spec;
}

AudioClip istft(const Spectrogram& spec, int sample_rate) {
  if (spec.n_frames <= 0) throw std::invalid_argument("istft: empty spectrogram");
  const int frame_len = spec.frame_len;
  const int hop = spec.hop;
  const auto window = hann_window(frame_len);
  const int n_samples = (spec.n_frames - 1) * hop + frame_len;

  std::vector<double> acc(n_samples, 0.0);
  std::vector<double> wsum(n_samples, 0.0);
  std::vector<std::complex<double>> bins(spec.n_bins);
  for (int f = 0; f < spec.n_frames; ++f) {
    std::copy(spec.bins.begin() + static_cast<std::size_t>(f) * spec.n_bins,
              spec.bins.begin() + static_cast<std::size_t>(f + 1) * spec.n_bins,
              bins.begin());
    auto frame = irfft(bins, frame_len);
    const int off = f * hop;
    for (int i = 0; i < frame_len; ++i) {
      acc[off + i] += frame[i] * window[i];
      wsum[off + i] += window[i] * window[i];
    }
  }
  AudioClip out;
  out.sample_rate = sample_rate;
  out.samples.resize(n_samples);
  for (int i = 0; i < n_samples; ++i)
    out.samples[i] = wsum[i] > 1e-12 ? acc[i] / wsum[i] : 0.0;
  return out;
}

double spl_offset(const Spectrogram& spec) {
  double max_power = 0.0;
  for (const auto& b : spec.bins) max_power = std::max(max_power, std::norm(b));
  if (max_power <= 0.0) return 0.0;
  return kSplAnchorDb - 10.0 * std::log10(max_power);
}

SplGrid spl_with_offset(const Spectrogram& spec, double offset_db) {
  if (spec.bins.empty()) throw std::invalid_argument("spl: empty spectrogram");
  SplGrid grid;
  grid.n_frames = spec.n_frames;
  grid.n_bins = spec.n_bins;
  grid.offset_db = offset_db;
  grid.values.resize(spec.bins.size());
  for (std::size_t i = 0; i < spec.bins.size(); ++i) {
    const double p = std::norm(spec.bins[i]);
    grid.values[i] =
        p > 0.0 ? std::max(kSplFloorDb, offset_db + 10.0 * std::log10(p))
                : kSplFloorDb;
  }
  return grid;
}

SplGrid spl_normalize(const Spectrogram& spec) {
  return spl_with_offset(spec, spl_offset(spec));
}

AudioClip convolve(const AudioClip& clip, const Rir& rir) {
  if (rir.taps.empty()) throw std::invalid_argument("convolve: empty RIR");
  if (clip.sample_rate != rir.sample_rate)
    throw std::invalid_argument("convolve: sample-rate mismatch");
  auto full = fft_convolve(clip.samples, rir.taps);
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(full.begin(), full.begin() + clip.size());
  return out;
}

std::vector<double> convolve_adjoint(const std::vector<double>& grad_out,
                                     const Rir& rir) {
  // y[t] = sum_tau x[tau] r[t - tau], truncated to len(x);
  // dL/dx[tau] = sum_t g[t] r[t - tau], i.e. correlation of g with r.
  std::vector<double> r_rev(rir.taps.rbegin(), rir.taps.rend());
  auto full = fft_convolve(grad_out, r_rev);
  const int lag0 = static_cast<int>(rir.taps.size()) - 1;
  return std::vector<double>(full.begin() + lag0,
                             full.begin() + lag0 + grad_out.size());
}

double snr_db(const AudioClip& signal, const AudioClip& noise) {
  if (signal.size() != noise.size())
    throw std::invalid_argument("snr_db: length mismatch");
  const double noise_rms = rms(noise.samples);
  if (noise_rms <= 0.0)
    throw std::domain_error("snr_db: zero noise (infinite SNR)");
  return 20.0 * std::log10(rms(signal.samples) / noise_rms);
}

AudioClip read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_wav: cannot open " + path);
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  if (data.size() < 44 || std::memcmp(data.data(), "RIFF", 4) != 0 ||
      std::memcmp(data.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("read_wav: not a RIFF/WAVE file: " + path);

  std::size_t pos = 12;
  int sample_rate = 0, channels = 0, bits = 0;
  const unsigned char* pcm = nullptr;
  std::size_t pcm_len = 0;
  while (pos + 8 <= data.size()) {
    const std::uint32_t chunk_len = get_u32(data.data() + pos + 4);
    if (std::memcmp(data.data() + pos, "fmt ", 4) == 0 && chunk_len >= 16) {
      const unsigned char* f = data.data() + pos + 8;
      channels = get_u16(f + 2);
      sample_rate = static_cast<int>(get_u32(f + 4));
      bits = get_u16(f + 14);
    } else if (std::memcmp(data.data() + pos, "data", 4) == 0) {
      pcm = data.data() + pos + 8;
      pcm_len = std::min<std::size_t>(chunk_len, data.size() - pos - 8);
    }
    pos += 8 + chunk_len + (chunk_len & 1);
  }
  if (!pcm || channels != 1 || bits != 16)
    throw std::runtime_error("read_wav: expected 16-bit mono PCM: " + path);

  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.resize(pcm_len / 2);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    const std::int16_t s =
        static_cast<std::int16_t>(pcm[2 * i] | (pcm[2 * i + 1] << 8));
    clip.samples[i] = s / 32768.0;
  }
  return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_wav: cannot open " + path);
  const std::uint32_t data_len = static_cast<std::uint32_t>(clip.size()) * 2;
  os.write("RIFF", 4);
  put_u32(os, 36 + data_len);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16);
  put_u16(os, 1);  // PCM
  put_u16(os, 1);  // mono
  put_u32(os, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(os, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(os, 2);
  put_u16(os, 16);
  os.write("data", 4);
  put_u32(os, data_len);
  for (double s : clip.samples) {
    const int v = std::clamp(static_cast<int>(std::lround(s * 32768.0)),
                             -32768, 32767);
    put_u16(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
}

void write_csv(const std::string& path, const std::vector<double>& values,
               int n_rows, int n_cols) {
  if (static_cast<std::size_t>(n_rows) * n_cols != values.size())
    throw std::invalid_argument("write_csv: shape mismatch");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_csv: cannot open " + path);
  char buf[64];
  for (int r = 0; r < n_rows; ++r) {
    for (int c = 0; c < n_cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g",
                    values[static_cast<std::size_t>(r) * n_cols + c]);
      os << buf << (c + 1 == n_cols ? '\n' : ',');
    }
  }
}

}  // namespace aat
