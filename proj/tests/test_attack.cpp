#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "aat/attack.hpp"
#include "aat/rng.hpp"
#include "aat/synth.hpp"

using namespace aat;

namespace {

AudioClip noisy_tone(int n, std::uint64_t seed) {
  Rng rng(seed);
  AudioClip c;
  c.samples.resize(n);
  for (int i = 0; i < n; ++i)
    c.samples[i] = 0.3 * std::sin(2.0 * M_PI * 440.0 * i / 16000.0) +
                   rng.normal(0.0, 0.01);
  return c;
}

}  // namespace

TEST_CASE("alpha streak scheduler") {
  AttackConfig cfg;
  SUBCASE("fifteen straight successes bump alpha by the factor") {
    AlphaState s{0.3, 0};
    for (int i = 0; i < 15; ++i) s = update_alpha(s, true, cfg);
    CHECK(s.alpha == doctest::Approx(0.33).epsilon(1e-12));
    CHECK(s.streak == 0);
  }
  SUBCASE("one hundred failures cannot push alpha below the initial value") {
    AlphaState s{0.3, 0};
    for (int i = 0; i < 100; ++i) s = update_alpha(s, false, cfg);
    CHECK(s.alpha == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(s.streak == 0);
    // and again: stays pinned at the floor
    for (int i = 0; i < 100; ++i) s = update_alpha(s, false, cfg);
    CHECK(s.alpha == doctest::Approx(0.3).epsilon(1e-12));
  }
  SUBCASE("a broken streak restarts in the other direction") {
    AlphaState s{0.3, 0};
    for (int i = 0; i < 14; ++i) s = update_alpha(s, true, cfg);
    CHECK(s.streak == 14);
    s = update_alpha(s, false, cfg);
    CHECK(s.streak == -1);
    CHECK(s.alpha == doctest::Approx(0.3).epsilon(1e-12));
  }
  SUBCASE("alpha decreases once above the floor") {
    AlphaState s{0.3 * 1.1 * 1.1, 0};
    for (int i = 0; i < 100; ++i) s = update_alpha(s, false, cfg);
    CHECK(s.alpha == doctest::Approx(0.33).epsilon(1e-9));
  }
}

TEST_CASE("perturbation clipping") {
  CHECK(clip_perturbation({0.5, -0.5}, 0.2) == std::vector<double>{0.2, -0.2});
  CHECK(clip_perturbation({0.1, -0.05}, 0.2) ==
        std::vector<double>{0.1, -0.05});
  CHECK_THROWS(clip_perturbation({0.1}, 0.0));
  AttackConfig cfg;
  cfg.epsilon = -1.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("offset shifting") {
  AudioClip c;
  c.samples = {1, 2, 3, 4};
  CHECK(apply_offset(c, 2).samples == std::vector<double>{0, 0, 1, 2});
  CHECK(apply_offset(c, 0).samples == c.samples);
  CHECK(apply_offset(c, 4).samples == std::vector<double>{0, 0, 0, 0});
}

TEST_CASE("length normalization") {
  CHECK(beta(16000, 16000) == doctest::Approx(1.0));
  CHECK(beta(4 * 16000, 16000) == doctest::Approx(0.5));
  CHECK(beta(4000, 16000) == doctest::Approx(2.0));
}

TEST_CASE("degenerate EOT copies equal the zero-prepended input") {
  AttackConfig cfg;
  cfg.variant = AttackVariant::kRobust;
  cfg.noise_sigma = 0.0;
  cfg.max_offset = 0;
  cfg.eot_copies = 3;
  RirPool pool({identity_rir()});
  AudioClip adv = noisy_tone(800, 1);
  Rng rng(2);
  const auto copies = eot_transform(adv, pool, cfg, rng);
  REQUIRE(copies.size() == 3);
  for (const auto& copy : copies) {
    REQUIRE(copy.audio.size() == adv.size());
    for (int i = 0; i < adv.size(); ++i)
      CHECK(copy.audio.samples[i] == doctest::Approx(adv.samples[i]).epsilon(1e-12));
  }
}

TEST_CASE("dynamic pool: the copies of one iteration see distinct rooms") {
  AttackConfig cfg;
  cfg.variant = AttackVariant::kRobust;
  RirPool pool((RoomRanges()));
  AudioClip adv = noisy_tone(800, 3);
  Rng rng(4);
  const auto copies = eot_transform(adv, pool, cfg, rng);
  REQUIRE(copies.size() == 8);
  for (std::size_t i = 1; i < copies.size(); ++i)
    CHECK(copies[i].room.rt60 != copies[0].room.rt60);
}

TEST_CASE("compound loss composition") {
  Rng mrng(5);
  const VictimModel model = VictimModel::init(mrng, FeatureConfig{}, 12);
  const AudioClip x = noisy_tone(1600, 6);
  const auto target = TranscriptionTarget::from_text("go", model.vocab);
  const MaskingThresholdGrid grid = compute_masking_grid(x);

  std::vector<double> delta(x.size(), 0.0);
  Rng drng(7);
  for (auto& d : delta) d = drng.normal(0.0, 0.001);

  SUBCASE("alpha = 0 leaves only the model loss") {
    AttackConfig cfg;
    cfg.variant = AttackVariant::kBase;
    const auto eval = compound_loss(model, x, delta, delta, nullptr, target,
                                    &grid, 0.0, 1.0, cfg);
    CHECK(eval.regularizer == 0.0);
    CHECK(eval.total_loss == eval.model_loss);
  }
  SUBCASE("silent delta has zero perceptual regularizer") {
    AttackConfig cfg;
    cfg.variant = AttackVariant::kPsychoacoustic;
    std::vector<double> zero(x.size(), 0.0);
    const auto eval = compound_loss(model, x, zero, zero, nullptr, target,
                                    &grid, 0.3, 1.0, cfg);
    CHECK(eval.regularizer == 0.0);
  }
  SUBCASE("l2 regularizer equals alpha*beta*norm") {
    AttackConfig cfg;
    cfg.variant = AttackVariant::kBase;
    const auto eval = compound_loss(model, x, delta, delta, nullptr, target,
                                    &grid, 0.5, 2.0, cfg);
    double norm = 0.0;
    for (double d : delta) norm += d * d;
    CHECK(eval.regularizer ==
          doctest::Approx(0.5 * 2.0 * std::sqrt(norm)).epsilon(1e-12));
  }
}

TEST_CASE("gradient through the full robust pipeline matches finite differences") {
  Rng mrng(8);
  const VictimModel model = VictimModel::init(mrng, FeatureConfig{}, 12);
  const AudioClip x = noisy_tone(3200, 9);  // 0.2 s
  const auto target = TranscriptionTarget::from_text("go", model.vocab);
  const MaskingThresholdGrid grid = compute_masking_grid(x);

  AttackConfig cfg;
  cfg.variant = AttackVariant::kRobust;
  cfg.eot_copies = 2;
  cfg.max_offset = 160;

  // Frozen transformation draws: rebuilding the copies from the same RNG seed
  // reproduces identical noise, RIRs, and offsets for any delta.
  Rng build(10);
  RirPool pool((RoomRanges()));
  const Rir rir_a = pool.draw(build);
  const Rir rir_b = pool.draw(build);
  RirPool frozen({rir_a, rir_b});

  std::vector<double> delta(x.size(), 0.0);
  Rng drng(11);
  for (auto& d : delta) d = drng.normal(0.0, 0.0005);

  auto total_loss = [&](const std::vector<double>& dl) {
    AudioClip adv = x;
    for (int i = 0; i < x.size(); ++i) adv.samples[i] += dl[i];
    Rng t(12);
    const auto copies = eot_transform(adv, frozen, cfg, t);
    return compound_loss(model, x, dl, dl, &copies, target, &grid, 0.3, 1.0,
                         cfg);
  };

  const auto eval = total_loss(delta);
  const double h = 1e-6;
  Rng pick(13);
  int checked = 0;
  while (checked < 8) {
    const int i = static_cast<int>(pick.below(delta.size()));
    auto dp = delta, dm = delta;
    dp[i] += h;
    dm[i] -= h;
    const double fd =
        (total_loss(dp).total_loss - total_loss(dm).total_loss) / (2 * h);
    if (std::abs(fd) < 1e-7) continue;
    CHECK(std::abs(eval.grad_delta[i] - fd) / std::max(std::abs(fd), 1e-7) <
          1e-3);
    ++checked;
  }
}

TEST_CASE("success predicates") {
  const std::vector<std::string> target = {"open", "the", "door"};
  const std::vector<std::string> other = {"close", "the", "door"};
  SUBCASE("all copies match") {
    std::vector<std::vector<std::string>> t(8, target);
    const auto r = success_check(AttackVariant::kRobust, t, target);
    CHECK(r.success);
    CHECK(r.per_rir_success_count == 8);
  }
  SUBCASE("four of eight is not a majority") {
    std::vector<std::vector<std::string>> t(4, target);
    t.insert(t.end(), 4, other);
    const auto r = success_check(AttackVariant::kRobust, t, target);
    CHECK_FALSE(r.success);
    CHECK(r.per_rir_success_count == 4);
  }
  SUBCASE("clean variant needs the exact phrase") {
    CHECK_FALSE(success_check(AttackVariant::kBase, {other}, target).success);
    CHECK(success_check(AttackVariant::kBase, {target}, target).success);
  }
}

TEST_CASE("trivial target succeeds immediately with a silent perturbation") {
  Rng mrng(14);
  const VictimModel model = VictimModel::init(mrng, FeatureConfig{}, 12);
  const AudioClip x = noisy_tone(2400, 15);
  const auto target =
      TranscriptionTarget::from_text(join_words(transcribe(model, x)),
                                     model.vocab);
  AttackConfig cfg;
  cfg.variant = AttackVariant::kBase;
  cfg.min_iterations = 3;
  RirPool pool((RoomRanges()));
  std::vector<TraceRow> trace;
  const AttackResult res = run_attack(x, target, model, pool, cfg, &trace);
  CHECK(res.success_found);
  CHECK(trace[0].success);
  double norm = 0.0;
  for (double d : res.best_delta) norm += d * d;
  CHECK(std::sqrt(norm) < 1e-9);
  CHECK(std::isinf(res.snr_db));
}

TEST_CASE("run_attack is deterministic and keeps delta inside epsilon") {
  Rng mrng(16);
  const VictimModel model = VictimModel::init(mrng, FeatureConfig{}, 12);
  const AudioClip x = noisy_tone(1600, 17);
  const auto target = TranscriptionTarget::from_text("go", model.vocab);
  AttackConfig cfg;
  cfg.variant = AttackVariant::kRobust;
  cfg.eot_copies = 2;
  cfg.success_min_copies = 2;
  cfg.min_iterations = 4;
  cfg.epsilon = 0.01;
  cfg.seed = 3;
  RirPool pool((RoomRanges()));
  std::vector<TraceRow> t1, t2;
  const AttackResult a = run_attack(x, target, model, pool, cfg, &t1);
  const AttackResult b = run_attack(x, target, model, pool, cfg, &t2);
  CHECK(a.iterations_run == 4);
  REQUIRE(a.best_delta.size() == b.best_delta.size());
  for (std::size_t i = 0; i < a.best_delta.size(); ++i) {
    CHECK(a.best_delta[i] == b.best_delta[i]);
    CHECK(std::abs(a.best_delta[i]) <= 0.01 + 1e-15);
  }
  REQUIRE(t1.size() == t2.size());
  for (std::size_t i = 0; i < t1.size(); ++i) CHECK(t1[i].loss == t2[i].loss);
}
