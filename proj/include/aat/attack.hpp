#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aat/audio.hpp"
#include "aat/model.hpp"
#include "aat/psycho.hpp"
#include "aat/rir.hpp"

namespace aat {

enum class AttackVariant { kBase, kRobust, kPsychoacoustic, kCombined };

std::string variant_name(AttackVariant v);
AttackVariant variant_from_name(const std::string& name);
bool variant_uses_eot(AttackVariant v);
bool variant_uses_psycho(AttackVariant v);

struct AttackConfig {
  AttackVariant variant = AttackVariant::kBase;
  double epsilon = 0.0;        // amplitude units; 0 derives from snr_floor_db
  double snr_floor_db = 10.0;  // eps = max|x| * 10^(-snr_floor/20)
  double learning_rate = 0.002;
  int min_iterations = 5000;
  double alpha_init = 0.3;
  double alpha_factor = 1.1;
  int inc_streak = 15;
  int dec_streak = 100;
  int eot_copies = 8;
  double noise_sigma = 0.001;
  int max_offset = 160;       // samples, one feature hop
  int ref_length = 16000;     // len(x_ref) for the beta normalization
  int success_min_copies = 5; // majority of 8
  PerceptualMode perceptual_mode = PerceptualMode::kMeanExcess;
  std::uint64_t seed = 1;

  // Throws std::invalid_argument on violated invariants (epsilon >= 0,
  // alpha_factor > 1, inc_streak < dec_streak, positive iterations...).
  void validate() const;
};

struct AlphaState {
  double alpha = 0.3;
  int streak = 0;  // positive = consecutive successes
};

// Streak scheduler: success extends the positive streak, failure the
// negative one; a direction change restarts the counter at +-1; hitting
// +inc_streak multiplies alpha by alpha_factor, hitting -dec_streak divides,
// floored at alpha_init. The counter resets after either trigger.
AlphaState update_alpha(AlphaState state, bool success, const AttackConfig& cfg);

// Elementwise symmetric clamp to [-epsilon, +epsilon].
std::vector<double> clip_perturbation(const std::vector<double>& delta,
                                      double epsilon);

// Right shift by k samples, zero-filled head, length preserved.
AudioClip apply_offset(const AudioClip& clip, int k);

// Length normalization sqrt(len_ref / len_x).
double beta(int len_x, int len_ref);

// One EOT copy plus the draws needed to backpropagate through it.
struct EotCopy {
  AudioClip audio;
  Rir rir;
  int offset = 0;
  RoomConfig room;
};

// Noise + fresh RIR + zero prepend (max_offset samples) + random offset,
// drawn per copy from `rng`.
std::vector<EotCopy> eot_transform(const AudioClip& adv, const RirPool& pool,
                                   const AttackConfig& cfg, Rng& rng);

struct IterationEval {
  double total_loss = 0.0;
  double model_loss = 0.0;      // mean over copies (or clean loss)
  double regularizer = 0.0;     // alpha * beta * (p(delta) or ||delta||_2)
  double perceptibility = 0.0;  // the unweighted p(delta) or ||delta||_2
  std::vector<double> grad_delta;
  // Greedy transcripts: one per EOT copy, or a single entry for the clean
  // adversarial example in non-EOT variants.
  std::vector<std::vector<std::string>> transcripts;
};

// Compound loss with exact reverse-mode gradient w.r.t. the raw perturbation.
// `copies` is required for EOT variants and ignored otherwise; `grid` is
// required for psychoacoustic variants.
IterationEval compound_loss(const VictimModel& model, const AudioClip& x,
                            const std::vector<double>& delta_raw,
                            const std::vector<double>& delta_bar,
                            const std::vector<EotCopy>* copies,
                            const TranscriptionTarget& target,
                            const MaskingThresholdGrid* grid, double alpha,
                            double beta_val, const AttackConfig& cfg);

struct SuccessCheck {
  bool success = false;
  int per_rir_success_count = 0;
};

// Exact target match: on the clean adversarial example for non-EOT variants,
// majority-of-copies for EOT variants.
SuccessCheck success_check(AttackVariant variant,
                           const std::vector<std::vector<std::string>>& transcripts,
                           const std::vector<std::string>& target_words);

struct TraceRow {
  int iteration = 0;
  double loss = 0.0;
  double alpha = 0.0;
  int streak = 0;
  bool success = false;
  int per_rir_count = 0;
};

struct AttackResult {
  std::vector<double> best_delta;  // clipped perturbation, len(x)
  int iterations_run = 0;
  bool success_found = false;
  int per_rir_success_count = 0;
  double final_alpha = 0.0;
  double snr_db = 0.0;  // +inf when the perturbation is identically zero
  double perceptual_loss = 0.0;
  std::vector<std::string> transcript_clean;
  std::vector<std::string> transcripts_transformed;  // per copy, best iteration
};

// The integrated single-loop attack. Runs exactly cfg.min_iterations
// iterations; a run without any successful iteration is not an error.
AttackResult run_attack(const AudioClip& x, const TranscriptionTarget& target,
                        const VictimModel& model, const RirPool& pool,
                        const AttackConfig& cfg,
                        std::vector<TraceRow>* trace = nullptr);

}  // namespace aat
