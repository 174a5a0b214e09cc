#include "aat/rir.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aat {
namespace {

constexpr int kSincHalfWidth = 4;  // 8-tap interpolation kernel

double distance(const double a[3], const double b[3]) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Hann-windowed sinc, support |u| < kSincHalfWidth.
double sinc_win_exact(double u) {
  if (std::abs(u) >= kSincHalfWidth) return 0.0;
  const double w = 0.5 + 0.5 * std::cos(M_PI * u / kSincHalfWidth);
  if (std::abs(u) < 1e-12) return w;
  const double pu = M_PI * u;
  return w * std::sin(pu) / pu;
}

// Dense lookup table; the kernel is evaluated ~10^6 times per RIR and the
// trig calls dominate generation time otherwise. 512 samples per unit keeps
// the linear-interpolation error below 1e-5.
constexpr int kSincRes = 512;
const std::vector<double>& sinc_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(2 * kSincHalfWidth * kSincRes + 2);
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = sinc_win_exact(static_cast<double>(i) / kSincRes - kSincHalfWidth);
    return t;
  }();
  return table;
}

inline double sinc_win(double u) {
  const double pos = (u + kSincHalfWidth) * kSincRes;
  if (pos <= 0.0 || pos >= 2 * kSincHalfWidth * kSincRes) return 0.0;
  const int idx = static_cast<int>(pos);
  const double frac = pos - idx;
  const auto& t = sinc_table();
  return t[idx] + frac * (t[idx + 1] - t[idx]);
}

}  // namespace

double sabine_absorption(const RoomConfig& cfg) {
  const double lx = cfg.dims[0], ly = cfg.dims[1], lz = cfg.dims[2];
  const double volume = lx * ly * lz;
  const double surface = 2.0 * (lx * ly + lx * lz + ly * lz);
  const double alpha = 0.161 * volume / (surface * cfg.rt60);
  return std::clamp(alpha, 1e-4, 1.0 - 1e-4);
}

Rir generate_rir(const RoomConfig& cfg, int sample_rate) {
  for (int a = 0; a < 3; ++a) {
    if (cfg.dims[a] <= 0.0) throw std::invalid_argument("generate_rir: bad dims");
    if (cfg.source_pos[a] <= 0.0 || cfg.source_pos[a] >= cfg.dims[a] ||
        cfg.listener_pos[a] <= 0.0 || cfg.listener_pos[a] >= cfg.dims[a])
      throw std::invalid_argument("generate_rir: position outside room");
  }
  if (cfg.rt60 <= 0.0) throw std::invalid_argument("generate_rir: bad rt60");

  const double alpha = sabine_absorption(cfg);
  const double refl = std::sqrt(1.0 - alpha);

  const double direct_d = distance(cfg.source_pos, cfg.listener_pos);
  const double t_max = cfg.rt60;
  const double d_max = kSpeedOfSound * t_max;
  const int n_taps =
      std::max(static_cast<int>(std::ceil(t_max * sample_rate)),
               static_cast<int>(direct_d / kSpeedOfSound * sample_rate) + 32) +
      kSincHalfWidth + 1;

  // Reflection-coefficient powers, precomputed.
  const int max_refl = 6 * static_cast<int>(d_max / (2.0 * std::min(
                               {cfg.dims[0], cfg.dims[1], cfg.dims[2]})) + 2) + 6;
  std::vector<double> refl_pow(max_refl + 1);
  refl_pow[0] = 1.0;
  for (int i = 1; i <= max_refl; ++i) refl_pow[i] = refl_pow[i - 1] * refl;

  std::vector<double> taps(n_taps, 0.0);
  const double fs = static_cast<double>(sample_rate);
  const double d_max2 = d_max * d_max;

  // Per-axis image coordinates (relative to the listener) with reflection
  // counts, sorted by |coordinate| so each nesting level can break as soon as
  // the partial squared distance leaves the d_max sphere.
  struct AxisImage {
    double coord;
    int refl;
  };
  std::vector<AxisImage> axis[3];
  for (int a = 0; a < 3; ++a) {
    const int n_lim = static_cast<int>(d_max / (2.0 * cfg.dims[a])) + 1;
    axis[a].reserve(2 * (2 * n_lim + 1));
    for (int n = -n_lim; n <= n_lim; ++n)
      for (int q = 0; q <= 1; ++q) {
        const double c = (1 - 2 * q) * cfg.source_pos[a] +
                         2.0 * n * cfg.dims[a] - cfg.listener_pos[a];
        if (c * c > d_max2) continue;
        axis[a].push_back({c, std::abs(n - q) + std::abs(n)});
      }
    std::sort(axis[a].begin(), axis[a].end(),
              [](const AxisImage& l, const AxisImage& r) {
                return std::abs(l.coord) < std::abs(r.coord);
              });
  }

  for (const AxisImage& x : axis[0]) {
    const double ix2 = x.coord * x.coord;
    if (ix2 > d_max2) break;
    for (const AxisImage& y : axis[1]) {
      const double ixy2 = ix2 + y.coord * y.coord;
      if (ixy2 > d_max2) break;
      const int rxy = x.refl + y.refl;
      for (const AxisImage& z : axis[2]) {
        const double d2 = ixy2 + z.coord * z.coord;
        if (d2 > d_max2) break;
        const double d = std::sqrt(d2);
        const int order = rxy + z.refl;
        const double amp = refl_pow[std::min(order, max_refl)] /
                           (4.0 * M_PI * std::max(d, 0.01));
        const double delay = d / kSpeedOfSound * fs;
        if (order >= 2) {
          // The late field is a dense statistical sum of thousands of
          // overlapping arrivals; sub-sample timing of an individual image
          // is inaudible there, so skip the interpolation kernel.
          const int j = static_cast<int>(delay + 0.5);
          if (j < n_taps) taps[j] += amp;
          continue;
        }
        const int lo =
            static_cast<int>(std::floor(delay)) - kSincHalfWidth + 1;
        for (int j = std::max(lo, 0);
             j < std::min(lo + 2 * kSincHalfWidth, n_taps); ++j)
          taps[j] += amp * sinc_win(j - delay);
      }
    }
  }

  // Enforce causality: the interpolation kernel must not leak energy ahead of
  // the direct-path arrival.
  const int direct_tap =
      static_cast<int>(std::floor(direct_d / kSpeedOfSound * fs));
  for (int j = 0; j < std::min(direct_tap, n_taps); ++j) taps[j] = 0.0;

  double peak = 0.0;
  for (double t : taps) peak = std::max(peak, std::abs(t));
  if (peak > 0.0)
    for (double& t : taps) t /= peak;

  Rir rir;
  rir.sample_rate = sample_rate;
  rir.taps = std::move(taps);
  return rir;
}

std::vector<double> schroeder_decay_db(const Rir& rir) {
  if (rir.taps.empty()) throw std::invalid_argument("schroeder: empty RIR");
  std::vector<double> energy(rir.taps.size());
  double acc = 0.0;
  for (int i = static_cast<int>(rir.taps.size()) - 1; i >= 0; --i) {
    acc += rir.taps[i] * rir.taps[i];
    energy[i] = acc;
  }
  const double total = energy[0];
  if (total <= 0.0) throw std::invalid_argument("schroeder: silent RIR");
  std::vector<double> db(energy.size());
  for (std::size_t i = 0; i < energy.size(); ++i)
    db[i] = energy[i] > 0.0 ? 10.0 * std::log10(energy[i] / total) : -1e9;
  return db;
}

double measure_rt60(const Rir& rir) {
  const auto db = schroeder_decay_db(rir);
  int t1 = -1, t2 = -1;
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (t1 < 0 && db[i] <= -5.0) t1 = static_cast<int>(i);
    if (t2 < 0 && db[i] <= -35.0) {
      t2 = static_cast<int>(i);
      break;
    }
  }
  if (t1 < 0 || t2 < 0 || t2 - t1 < 8)
    throw std::domain_error("measure_rt60: insufficient decay range");

  // Least-squares line on the -5..-35 dB segment, extrapolated to -60 dB.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = t2 - t1 + 1;
  for (int i = t1; i <= t2; ++i) {
    const double x = static_cast<double>(i) / rir.sample_rate;
    sx += x;
    sy += db[i];
    sxx += x * x;
    sxy += x * db[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  if (slope >= 0.0)
    throw std::domain_error("measure_rt60: non-decaying energy curve");
  return -60.0 / slope;
}

RoomConfig sample_room(const RoomRanges& ranges, Rng& rng) {
  for (int a = 0; a < 3; ++a) {
    if (ranges.dims_lo[a] > ranges.dims_hi[a] ||
        ranges.dims_lo[a] <= 2.0 * ranges.wall_clearance)
      throw std::invalid_argument("sample_room: invalid dimension range");
  }
  if (ranges.rt60_lo > ranges.rt60_hi || ranges.rt60_lo <= 0.0)
    throw std::invalid_argument("sample_room: invalid rt60 range");
  if (ranges.min_separation > ranges.max_separation)
    throw std::invalid_argument("sample_room: invalid separation range");

  constexpr int kMaxRetries = 200;
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    RoomConfig cfg;
    for (int a = 0; a < 3; ++a)
      cfg.dims[a] = rng.uniform(ranges.dims_lo[a], ranges.dims_hi[a]);
    cfg.rt60 = rng.uniform(ranges.rt60_lo, ranges.rt60_hi);
    for (int a = 0; a < 3; ++a) {
      const double lo = ranges.wall_clearance;
      const double hi = cfg.dims[a] - ranges.wall_clearance;
      cfg.source_pos[a] =
          lo + (hi - lo) * rng.uniform(ranges.src_frac_lo[a], ranges.src_frac_hi[a]);
      cfg.listener_pos[a] =
          lo + (hi - lo) * rng.uniform(ranges.lis_frac_lo[a], ranges.lis_frac_hi[a]);
    }
    const double sep = distance(cfg.source_pos, cfg.listener_pos);
    if (sep >= ranges.min_separation && sep <= ranges.max_separation)
      return cfg;
  }
  throw std::runtime_error("sample_room: no valid placement in ranges");
}

RirPool::RirPool(RoomRanges ranges, int sample_rate)
    : mode_(PoolMode::kDynamic), ranges_(ranges), sample_rate_(sample_rate) {}

RirPool::RirPool(RoomRanges ranges, int size, RoomMode room_mode, Rng& rng,
                 int sample_rate)
    : mode_(PoolMode::kFixed), ranges_(ranges), sample_rate_(sample_rate) {
  if (size <= 0) throw std::invalid_argument("RirPool: empty fixed pool");
  rirs_.reserve(size);
  rooms_.reserve(size);
  RoomRanges member_ranges = ranges;
  if (room_mode == RoomMode::kOneRoom) {
    // Fix dims and rt60 once; members differ only in placement.
    const RoomConfig shared = sample_room(ranges, rng);
    for (int a = 0; a < 3; ++a) {
      member_ranges.dims_lo[a] = shared.dims[a];
      member_ranges.dims_hi[a] = shared.dims[a];
    }
    member_ranges.rt60_lo = shared.rt60;
    member_ranges.rt60_hi = shared.rt60;
  }
  for (int i = 0; i < size; ++i) {
    const RoomConfig cfg = sample_room(member_ranges, rng);
    rooms_.push_back(cfg);
    rirs_.push_back(generate_rir(cfg, sample_rate));
  }
}

RirPool::RirPool(std::vector<Rir> rirs)
    : mode_(PoolMode::kFixed), rirs_(std::move(rirs)) {
  if (rirs_.empty()) throw std::invalid_argument("RirPool: empty fixed pool");
  sample_rate_ = rirs_.front().sample_rate;
}

Rir RirPool::draw(Rng& rng) const { return draw(rng, nullptr); }

Rir RirPool::draw(Rng& rng, RoomConfig* room_out) const {
  if (mode_ == PoolMode::kDynamic) {
    const RoomConfig cfg = sample_room(ranges_, rng);
    if (room_out) *room_out = cfg;
    return generate_rir(cfg, sample_rate_);
  }
  if (rirs_.empty()) throw std::runtime_error("RirPool: empty fixed pool");
  const std::size_t idx = rng.below(rirs_.size());
  if (room_out && idx < rooms_.size()) *room_out = rooms_[idx];
  return rirs_[idx];
}

Rir identity_rir(int sample_rate) {
  Rir rir;
  rir.sample_rate = sample_rate;
  rir.taps = {1.0};
  return rir;
}

}  // namespace aat
