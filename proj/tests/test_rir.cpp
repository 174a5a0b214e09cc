#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <vector>

#include "aat/rir.hpp"

using namespace aat;

namespace {

RoomRanges point_ranges(const RoomConfig& cfg) {
  RoomRanges r;
  for (int a = 0; a < 3; ++a) {
    r.dims_lo[a] = r.dims_hi[a] = cfg.dims[a];
    const double usable_lo = r.wall_clearance;
    const double usable = cfg.dims[a] - 2.0 * r.wall_clearance;
    r.src_frac_lo[a] = r.src_frac_hi[a] = (cfg.source_pos[a] - usable_lo) / usable;
    r.lis_frac_lo[a] = r.lis_frac_hi[a] =
        (cfg.listener_pos[a] - usable_lo) / usable;
  }
  r.rt60_lo = r.rt60_hi = cfg.rt60;
  r.max_separation = 100.0;  // the collapsed point decides the separation
  return r;
}

int first_nonzero_tap(const Rir& rir, double tol = 1e-9) {
  for (std::size_t i = 0; i < rir.taps.size(); ++i)
    if (std::abs(rir.taps[i]) > tol) return static_cast<int>(i);
  return -1;
}

double direct_delay_taps(const RoomConfig& cfg, int sr = 16000) {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double diff = cfg.source_pos[a] - cfg.listener_pos[a];
    d2 += diff * diff;
  }
  return std::sqrt(d2) * sr / kSpeedOfSound;
}

}  // namespace

TEST_CASE("sample_room with collapsed ranges returns that exact room") {
  RoomConfig want;
  want.dims[0] = 6.0; want.dims[1] = 4.5; want.dims[2] = 3.0;
  want.source_pos[0] = 1.2; want.source_pos[1] = 1.0; want.source_pos[2] = 1.4;
  want.listener_pos[0] = 4.0; want.listener_pos[1] = 3.2; want.listener_pos[2] = 1.6;
  want.rt60 = 0.45;
  Rng rng(5);
  const RoomConfig got = sample_room(point_ranges(want), rng);
  for (int a = 0; a < 3; ++a) {
    CHECK(got.dims[a] == doctest::Approx(want.dims[a]).epsilon(1e-12));
    CHECK(got.source_pos[a] == doctest::Approx(want.source_pos[a]).epsilon(1e-9));
    CHECK(got.listener_pos[a] ==
          doctest::Approx(want.listener_pos[a]).epsilon(1e-9));
  }
  CHECK(got.rt60 == doctest::Approx(0.45).epsilon(1e-12));
}

TEST_CASE("sample_room respects the rt60 interval and is deterministic") {
  RoomRanges r;
  r.rt60_lo = 0.4;
  r.rt60_hi = 0.5;
  Rng a(77), b(77);
  for (int i = 0; i < 50; ++i) {
    const RoomConfig ca = sample_room(r, a);
    const RoomConfig cb = sample_room(r, b);
    CHECK(ca.rt60 >= 0.4);
    CHECK(ca.rt60 <= 0.5);
    CHECK(ca.rt60 == cb.rt60);
    CHECK(std::memcmp(ca.dims, cb.dims, sizeof ca.dims) == 0);
    for (int ax = 0; ax < 3; ++ax) {
      CHECK(ca.source_pos[ax] > r.wall_clearance - 1e-12);
      CHECK(ca.source_pos[ax] < ca.dims[ax] - r.wall_clearance + 1e-12);
    }
  }
}

TEST_CASE("impossible placement errors after bounded retries") {
  RoomRanges r;
  for (int a = 0; a < 3; ++a) {
    r.dims_lo[a] = r.dims_hi[a] = 3.0;
    r.src_frac_lo[a] = r.src_frac_hi[a] = 0.5;
    r.lis_frac_lo[a] = r.lis_frac_hi[a] = 0.5;  // coincident: violates separation
  }
  Rng rng(1);
  CHECK_THROWS(sample_room(r, rng));
}

TEST_CASE("direct path delay lands at d*fs/343 within one tap") {
  RoomConfig cfg;
  cfg.dims[0] = 8.0; cfg.dims[1] = 6.0; cfg.dims[2] = 3.5;
  cfg.source_pos[0] = 1.0; cfg.source_pos[1] = 1.0; cfg.source_pos[2] = 1.5;
  cfg.listener_pos[0] = 4.43; cfg.listener_pos[1] = 1.0; cfg.listener_pos[2] = 1.5;
  cfg.rt60 = 0.3;
  const Rir rir = generate_rir(cfg);
  // 3.43 m at 16 kHz -> tap 160
  CHECK(std::abs(first_nonzero_tap(rir) - 160) <= 1);
  // peak normalized
  double peak = 0.0;
  for (double t : rir.taps) peak = std::max(peak, std::abs(t));
  CHECK(peak == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(static_cast<int>(rir.taps.size()) >= static_cast<int>(0.3 * 16000));
}

TEST_CASE("near-total absorption leaves only the direct impulse") {
  RoomConfig cfg;
  cfg.dims[0] = 4.0; cfg.dims[1] = 3.0; cfg.dims[2] = 2.5;
  cfg.source_pos[0] = 1.0; cfg.source_pos[1] = 1.0; cfg.source_pos[2] = 1.2;
  cfg.listener_pos[0] = 3.0; cfg.listener_pos[1] = 2.0; cfg.listener_pos[2] = 1.2;
  const double volume = 4.0 * 3.0 * 2.5;
  const double surface = 2.0 * (4.0 * 3.0 + 4.0 * 2.5 + 3.0 * 2.5);
  cfg.rt60 = 0.161 * volume / surface / 0.999;  // Sabine absorption ~ 0.999
  const Rir rir = generate_rir(cfg);
  const double delay = direct_delay_taps(cfg);
  double outside = 0.0;
  for (std::size_t i = 0; i < rir.taps.size(); ++i)
    if (std::abs(static_cast<double>(i) - delay) > 8.0)
      outside = std::max(outside, std::abs(rir.taps[i]));
  // reflection magnitude scales with sqrt(1 - absorption) ~ 0.03 here
  CHECK(outside < 0.05);
}

TEST_CASE("sabine absorption stays in (0,1)") {
  RoomConfig cfg;
  cfg.rt60 = 0.2;
  CHECK(sabine_absorption(cfg) > 0.0);
  CHECK(sabine_absorption(cfg) < 1.0);
  cfg.rt60 = 5.0;
  CHECK(sabine_absorption(cfg) > 0.0);
}

TEST_CASE("measure_rt60 on synthetic exponential decay") {
  for (double T : {0.25, 0.4, 0.7}) {
    Rir rir;
    rir.taps.resize(static_cast<std::size_t>(1.5 * T * 16000));
    for (std::size_t i = 0; i < rir.taps.size(); ++i) {
      const double t = static_cast<double>(i) / 16000.0;
      rir.taps[i] = std::exp(-6.9077552789821 * t / T);
    }
    CHECK(measure_rt60(rir) == doctest::Approx(T).epsilon(0.05));
    // scale invariance
    Rir scaled = rir;
    for (auto& v : scaled.taps) v *= 2.0;
    CHECK(measure_rt60(scaled) == doctest::Approx(measure_rt60(rir)).epsilon(1e-9));
  }
}

TEST_CASE("measure_rt60 rejects an impulse") {
  CHECK_THROWS(measure_rt60(identity_rir()));
}

TEST_CASE("schroeder decay is nonincreasing") {
  RoomConfig cfg;
  cfg.rt60 = 0.5;
  const Rir rir = generate_rir(cfg);
  const auto decay = schroeder_decay_db(rir);
  for (std::size_t i = 1; i < decay.size(); ++i)
    CHECK(decay[i] <= decay[i - 1] + 1e-9);
}

TEST_CASE("random rooms: causality, delay, rt60 accuracy") {
  RoomRanges ranges;
  Rng rng(2024);
  for (int i = 0; i < 25; ++i) {
    const RoomConfig cfg = sample_room(ranges, rng);
    const Rir rir = generate_rir(cfg);
    const double delay = direct_delay_taps(cfg);
    const int first = first_nonzero_tap(rir);
    CHECK(first >= static_cast<int>(std::floor(delay)) - 1);
    CHECK(std::abs(first - delay) <= 1.5);
    CHECK(measure_rt60(rir) == doctest::Approx(cfg.rt60).epsilon(0.20));
  }
}

TEST_CASE("rir pools") {
  RoomRanges ranges;
  SUBCASE("fixed pool of one always returns that rir") {
    Rng build(3);
    RirPool pool(ranges, 1, RoomMode::kVariousRooms, build);
    Rng draw(4);
    const Rir a = pool.draw(draw);
    const Rir b = pool.draw(draw);
    REQUIRE(a.taps.size() == b.taps.size());
    for (std::size_t i = 0; i < a.taps.size(); ++i) CHECK(a.taps[i] == b.taps[i]);
  }
  SUBCASE("one-room pool members share dims and rt60, not positions") {
    Rng build(5);
    RirPool pool(ranges, 8, RoomMode::kOneRoom, build);
    const auto& rooms = pool.rooms();
    REQUIRE(rooms.size() == 8);
    bool positions_differ = false;
    for (std::size_t i = 1; i < rooms.size(); ++i) {
      CHECK(rooms[i].rt60 == rooms[0].rt60);
      for (int a = 0; a < 3; ++a) CHECK(rooms[i].dims[a] == rooms[0].dims[a]);
      if (rooms[i].source_pos[0] != rooms[0].source_pos[0]) positions_differ = true;
    }
    CHECK(positions_differ);
  }
  SUBCASE("dynamic draws come from distinct rooms") {
    RirPool pool(ranges);
    Rng rng(6);
    RoomConfig r1, r2;
    pool.draw(rng, &r1);
    pool.draw(rng, &r2);
    CHECK(r1.rt60 != r2.rt60);
  }
  SUBCASE("empty fixed pool is rejected") {
    CHECK_THROWS(RirPool(std::vector<Rir>{}));
  }
}
