#pragma once

#include <string>
#include <vector>

#include "aat/rng.hpp"

namespace aat {

constexpr double kSpeedOfSound = 343.0;  // m/s

// One sampled room: shoebox dimensions, source/listener positions, target
// reverberation time.
struct RoomConfig {
  double dims[3] = {5.0, 4.0, 3.0};        // meters
  double source_pos[3] = {1.0, 1.0, 1.5};  // meters
  double listener_pos[3] = {3.0, 2.0, 1.5};
  double rt60 = 0.4;  // seconds
};

// Finite impulse response, peak-normalized to magnitude 1.
struct Rir {
  std::vector<double> taps;
  int sample_rate = 16000;
};

struct RoomRanges {
  double dims_lo[3] = {3.0, 3.0, 2.5};
  double dims_hi[3] = {8.0, 6.0, 3.5};
  // Near-field desk scenario: a device microphone within arm's reach in a
  // moderately damped room. Wider rt60 ranges and far microphones are still
  // expressible per pool (the reverberation sweep uses them); they are just
  // not the default draw distribution.
  double rt60_lo = 0.2;
  double rt60_hi = 0.5;
  double wall_clearance = 0.1;  // meters, min distance to any wall
  // Position ranges as fractions of the usable (clearance-inset) box.
  double src_frac_lo[3] = {0.0, 0.0, 0.0};
  double src_frac_hi[3] = {1.0, 1.0, 1.0};
  double lis_frac_lo[3] = {0.0, 0.0, 0.0};
  double lis_frac_hi[3] = {1.0, 1.0, 1.0};
  double min_separation = 0.3;  // meters between source and listener
  double max_separation = 1.5;  // meters between source and listener
};

// Uniform sampling within ranges; positions are rejection-resampled until the
// clearance invariant holds. Throws after bounded retries if no placement
// fits.
RoomConfig sample_room(const RoomRanges& ranges, Rng& rng);

// Image-source simulation with uniform Sabine absorption and 8-tap
// windowed-sinc fractional delays. Deterministic in cfg.
Rir generate_rir(const RoomConfig& cfg, int sample_rate = 16000);

// Sabine absorption for the config's geometry, clamped to (0, 1).
double sabine_absorption(const RoomConfig& cfg);

// RT60 via Schroeder backward integration, linear fit on the -5..-35 dB
// segment extrapolated to 60 dB. Throws if the decay range is insufficient.
double measure_rt60(const Rir& rir);

// Schroeder decay curve in dB, normalized to 0 dB at t=0.
std::vector<double> schroeder_decay_db(const Rir& rir);

enum class PoolMode { kDynamic, kFixed };
enum class RoomMode { kOneRoom, kVariousRooms };

// Source of RIRs for the EOT loop: either a frozen pool or fresh image-source
// draws per call.
class RirPool {
 public:
  // Dynamic pool: every draw samples a new room.
  explicit RirPool(RoomRanges ranges, int sample_rate = 16000);

  // Fixed pool of `size` pre-generated RIRs. In one-room mode all members
  // share dims and rt60 and differ only in source/listener placement.
  RirPool(RoomRanges ranges, int size, RoomMode room_mode, Rng& rng,
          int sample_rate = 16000);

  // Existing RIRs (e.g. loaded from disk).
  explicit RirPool(std::vector<Rir> rirs);

  Rir draw(Rng& rng) const;
  // As draw(), but also reports the room (dynamic mode only fills room_out).
  Rir draw(Rng& rng, RoomConfig* room_out) const;

  PoolMode mode() const { return mode_; }
  int size() const { return static_cast<int>(rirs_.size()); }
  const std::vector<RoomConfig>& rooms() const { return rooms_; }

 private:
  PoolMode mode_ = PoolMode::kDynamic;
  RoomRanges ranges_;
  int sample_rate_ = 16000;
  std::vector<Rir> rirs_;         // fixed mode only
  std::vector<RoomConfig> rooms_;  // fixed mode only
};

// Unit impulse; convolution identity, handy for degenerate transforms.
Rir identity_rir(int sample_rate = 16000);

}  // namespace aat
