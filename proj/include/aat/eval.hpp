#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aat/attack.hpp"
#include "aat/audio.hpp"
#include "aat/model.hpp"
#include "aat/rir.hpp"
#include "aat/rng.hpp"

namespace aat {

// Simulated-environment settings. The seed lives in its own domain so
// evaluation never replays an attack-time draw.
struct EvalConfig {
  int n_transforms = 10;
  double noise_sigma = 0.001;
  int max_offset = 160;
  RoomRanges ranges;
  std::uint64_t seed = 9001;
};

struct EvalRecord {
  int example_id = 0;
  std::string variant;
  std::string target;
  double wer_to_target = 0.0;  // mean over the transformed copies, percent
  double snr_db = 0.0;
  bool success_found = false;
  std::vector<std::string> transcripts;  // one per transformation
};

// n independent (RIR, offset, noise) draws applied to adv; same operators as
// eot_transform. Deterministic given rng's state.
std::vector<AudioClip> simulate_environment(const AudioClip& adv,
                                            const RirPool& pool,
                                            const EvalConfig& cfg, Rng& rng);

// Transforms the finished adversarial clip (x + best_delta), transcribes each
// copy, and scores WER against the target phrase.
EvalRecord evaluate_example(const VictimModel& model, const AudioClip& x,
                            const AttackResult& result,
                            const std::string& variant_label,
                            const std::string& target_text,
                            const EvalConfig& cfg, int example_id);

// One row per (variant, target) pair, in first-appearance order.
struct EvalSummary {
  std::string variant;
  std::string target;
  int n_examples = 0;
  double mean_wer = 0.0;          // over all examples and copies
  double mean_snr_db = 0.0;       // over successfully generated examples only
  double success_rate = 0.0;      // percent of examples with success_found
};

std::vector<EvalSummary> summarize(const std::vector<EvalRecord>& records);

// Reverberation-interval sweep: robust attacks trained with rt60 drawn from
// each interval, all evaluated in rooms fixed at true_rt60.
struct SweepRow {
  double rt60_lo = 0.0;
  double rt60_hi = 0.0;
  double mean_wer = 0.0;
};

std::vector<SweepRow> sweep_reverberation(
    const std::vector<AudioClip>& corpus, const TranscriptionTarget& target,
    const VictimModel& model, const std::vector<std::pair<double, double>>& intervals,
    double true_rt60, const AttackConfig& attack_cfg, const EvalConfig& eval_cfg);

// Fixed-vs-dynamic RIR pool comparison.
struct PoolSpec {
  std::string name;      // "dynamic", "32-one-room", "128-various", ...
  bool dynamic = true;
  int size = 0;          // fixed pools only
  RoomMode mode = RoomMode::kVariousRooms;
};

struct PoolRow {
  std::string name;
  int n_success = 0;       // successfully generated attacks
  double mean_wer = 0.0;   // over successful attacks only
  double correct_rate = 0.0;  // percent of transformed copies decoding exactly
};

std::vector<PoolRow> compare_pools(const std::vector<AudioClip>& corpus,
                                   const TranscriptionTarget& target,
                                   const VictimModel& model,
                                   const std::vector<PoolSpec>& specs,
                                   const AttackConfig& attack_cfg,
                                   const EvalConfig& eval_cfg);

void write_records_csv(const std::string& path,
                       const std::vector<EvalRecord>& records);

}  // namespace aat
