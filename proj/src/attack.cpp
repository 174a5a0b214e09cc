#include "aat/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace aat {
namespace {

double l2_norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

std::string variant_name(AttackVariant v) {
  switch (v) {
    case AttackVariant::kBase: return "base";
    case AttackVariant::kRobust: return "robust";
    case AttackVariant::kPsychoacoustic: return "psychoacoustic";
    case AttackVariant::kCombined: return "combined";
  }
  return "?";
}

AttackVariant variant_from_name(const std::string& name) {
  if (name == "base") return AttackVariant::kBase;
  if (name == "robust") return AttackVariant::kRobust;
  if (name == "psychoacoustic" || name == "psy")
    return AttackVariant::kPsychoacoustic;
  if (name == "combined") return AttackVariant::kCombined;
  throw std::invalid_argument("unknown attack variant: " + name);
}

bool variant_uses_eot(AttackVariant v) {
  return v == AttackVariant::kRobust || v == AttackVariant::kCombined;
}

bool variant_uses_psycho(AttackVariant v) {
  return v == AttackVariant::kPsychoacoustic || v == AttackVariant::kCombined;
}

void AttackConfig::validate() const {
  if (epsilon < 0.0) throw std::invalid_argument("config: epsilon must be >= 0");
  if (epsilon == 0.0 && snr_floor_db <= 0.0)
    throw std::invalid_argument("config: need epsilon > 0 or snr_floor_db > 0");
  if (learning_rate <= 0.0)
    throw std::invalid_argument("config: learning_rate must be positive");
  if (min_iterations <= 0)
    throw std::invalid_argument("config: min_iterations must be positive");
  if (alpha_factor <= 1.0)
    throw std::invalid_argument("config: alpha_factor must exceed 1");
  if (inc_streak <= 0 || dec_streak <= 0 || inc_streak >= dec_streak)
    throw std::invalid_argument("config: need 0 < inc_streak < dec_streak");
  if (eot_copies <= 0) throw std::invalid_argument("config: eot_copies");
  if (noise_sigma < 0.0) throw std::invalid_argument("config: noise_sigma");
  if (max_offset < 0) throw std::invalid_argument("config: max_offset");
  if (ref_length <= 0) throw std::invalid_argument("config: ref_length");
  if (success_min_copies <= 0 || success_min_copies > eot_copies)
    throw std::invalid_argument("config: success_min_copies out of range");
}

AlphaState update_alpha(AlphaState state, bool success,
                        const AttackConfig& cfg) {
  if (success) {
    state.streak = state.streak >= 0 ? state.streak + 1 : 1;
    if (state.streak >= cfg.inc_streak) {
      state.alpha *= cfg.alpha_factor;
      state.streak = 0;
    }
  } else {
    state.streak = state.streak <= 0 ? state.streak - 1 : -1;
    if (-state.streak >= cfg.dec_streak) {
      state.alpha = std::max(state.alpha / cfg.alpha_factor, cfg.alpha_init);
      state.streak = 0;
    }
  }
  return state;
}

std::vector<double> clip_perturbation(const std::vector<double>& delta,
                                      double epsilon) {
  if (epsilon <= 0.0)
    throw std::invalid_argument("clip_perturbation: epsilon must be positive");
  std::vector<double> out(delta.size());
  for (std::size_t i = 0; i < delta.size(); ++i)
    out[i] = std::clamp(delta[i], -epsilon, epsilon);
  return out;
}

AudioClip apply_offset(const AudioClip& clip, int k) {
  if (k < 0) throw std::invalid_argument("apply_offset: negative offset");
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(clip.size(), 0.0);
  for (int i = k; i < clip.size(); ++i) out.samples[i] = clip.samples[i - k];
  return out;
}

double beta(int len_x, int len_ref) {
  if (len_x <= 0 || len_ref <= 0)
    throw std::invalid_argument("beta: lengths must be positive");
  return std::sqrt(static_cast<double>(len_ref) / len_x);
}

std::vector<EotCopy> eot_transform(const AudioClip& adv, const RirPool& pool,
                                   const AttackConfig& cfg, Rng& rng) {
  std::vector<EotCopy> copies;
  copies.reserve(cfg.eot_copies);
  for (int c = 0; c < cfg.eot_copies; ++c) {
    EotCopy copy;
    AudioClip noisy = adv;
    if (cfg.noise_sigma > 0.0)
      for (double& s : noisy.samples) s += rng.normal(0.0, cfg.noise_sigma);
    copy.rir = pool.draw(rng, &copy.room);
    AudioClip reverbed = convolve(noisy, copy.rir);
    // The prepended zero block gives the random offset room to shift into.
    AudioClip padded;
    padded.sample_rate = reverbed.sample_rate;
    padded.samples.assign(cfg.max_offset, 0.0);
    padded.samples.insert(padded.samples.end(), reverbed.samples.begin(),
                          reverbed.samples.end());
    copy.offset = cfg.max_offset > 0
                      ? static_cast<int>(rng.below(cfg.max_offset + 1))
                      : 0;
    copy.audio = apply_offset(padded, copy.offset);
    copies.push_back(std::move(copy));
  }
  return copies;
}

SuccessCheck success_check(
    AttackVariant variant,
    const std::vector<std::vector<std::string>>& transcripts,
    const std::vector<std::string>& target_words) {
  SuccessCheck result;
  for (const auto& t : transcripts)
    if (t == target_words) ++result.per_rir_success_count;
  if (variant_uses_eot(variant)) {
    // Majority rule; the threshold is config-exposed via success_min_copies
    // (checked by the caller against its config). Here: strictly more than
    // half of the provided transcripts.
    result.success =
        2 * result.per_rir_success_count > static_cast<int>(transcripts.size());
  } else {
    result.success =
        !transcripts.empty() && transcripts.front() == target_words;
  }
  return result;
}

IterationEval compound_loss(const VictimModel& model, const AudioClip& x,
                            const std::vector<double>& delta_raw,
                            const std::vector<double>& delta_bar,
                            const std::vector<EotCopy>* copies,
                            const TranscriptionTarget& target,
                            const MaskingThresholdGrid* grid, double alpha,
                            double beta_val, const AttackConfig& cfg) {
  const int len = x.size();
  IterationEval eval;
  eval.grad_delta.assign(len, 0.0);

  if (variant_uses_eot(cfg.variant)) {
    if (!copies || copies->empty())
      throw std::invalid_argument("compound_loss: EOT variant needs copies");
    const double inv_n = 1.0 / copies->size();
    for (const EotCopy& copy : *copies) {
      const ForwardContext ctx = forward_ctx(model, copy.audio);
      Mat grad_logits;
      eval.model_loss +=
          inv_n * ctc_loss(ctx.logits, target.token_ids, &grad_logits);
      eval.transcripts.push_back(greedy_words(ctx.logits, model.vocab));
      const auto g_audio = backward_to_input(model, ctx, grad_logits);
      // Adjoints of offset (left shift), zero prepend (head crop), and
      // truncated convolution (correlation). Gaussian noise is additive, its
      // adjoint is the identity.
      const int padded_len = static_cast<int>(g_audio.size());
      std::vector<double> g_conv(len, 0.0);
      for (int j = 0; j < len; ++j) {
        const int src = j + cfg.max_offset + copy.offset;
        if (src < padded_len) g_conv[j] = g_audio[src];
      }
      const auto g_adv = convolve_adjoint(g_conv, copy.rir);
      for (int j = 0; j < len; ++j) eval.grad_delta[j] += inv_n * g_adv[j];
    }
  } else {
    AudioClip adv = x;
    for (int j = 0; j < len; ++j) adv.samples[j] += delta_bar[j];
    const ForwardContext ctx = forward_ctx(model, adv);
    Mat grad_logits;
    eval.model_loss = ctc_loss(ctx.logits, target.token_ids, &grad_logits);
    eval.transcripts.push_back(greedy_words(ctx.logits, model.vocab));
    eval.grad_delta = backward_to_input(model, ctx, grad_logits);
  }

  const double weight = alpha * beta_val;
  if (variant_uses_psycho(cfg.variant)) {
    if (!grid)
      throw std::invalid_argument(
          "compound_loss: psychoacoustic variant needs a masking grid");
    AudioClip delta_clip;
    delta_clip.sample_rate = x.sample_rate;
    delta_clip.samples = delta_raw;
    PsychoParams params;
    params.frame_len = grid->frame_len;
    params.hop = grid->hop;
    params.mode = cfg.perceptual_mode;
    const PerceptualLoss p = perceptual_loss_grad(delta_clip, *grid, params);
    eval.perceptibility = p.value;
    eval.regularizer = weight * p.value;
    if (weight != 0.0)
      for (int j = 0; j < len; ++j) eval.grad_delta[j] += weight * p.grad[j];
  } else {
    const double norm = l2_norm(delta_raw);
    eval.perceptibility = norm;
    eval.regularizer = weight * norm;
    if (weight != 0.0 && norm > 1e-12) {
      const double scale = weight / norm;
      for (int j = 0; j < len; ++j)
        eval.grad_delta[j] += scale * delta_raw[j];
    }
  }
  eval.total_loss = eval.model_loss + eval.regularizer;
  return eval;
}

AttackResult run_attack(const AudioClip& x, const TranscriptionTarget& target,
                        const VictimModel& model, const RirPool& pool,
                        const AttackConfig& cfg, std::vector<TraceRow>* trace) {
  cfg.validate();
  const int len = x.size();
  if (len <= 0) throw std::invalid_argument("run_attack: empty input");

  double max_abs = 0.0;
  for (double s : x.samples) max_abs = std::max(max_abs, std::abs(s));
  const double eps = cfg.epsilon > 0.0
                         ? cfg.epsilon
                         : std::max(max_abs, 1e-6) *
                               std::pow(10.0, -cfg.snr_floor_db / 20.0);

  // The masking threshold of the original audio is computed once and stays
  // constant across all iterations.
  const MaskingThresholdGrid grid = compute_masking_grid(x);
  const double beta_val = beta(len, cfg.ref_length);
  const auto target_words = split_words(target.text);

  Rng master(cfg.seed);
  std::vector<double> delta(len, 0.0);
  AlphaState alpha_state{cfg.alpha_init, 0};

  AttackResult result;
  result.per_rir_success_count = 0;
  bool have_best = false;
  double best_percept = std::numeric_limits<double>::infinity();

  if (trace) trace->reserve(cfg.min_iterations);

  for (int iter = 0; iter < cfg.min_iterations; ++iter) {
    const auto delta_bar = clip_perturbation(delta, eps);
    AudioClip adv = x;
    for (int j = 0; j < len; ++j) adv.samples[j] += delta_bar[j];

    std::vector<EotCopy> copies;
    Rng iter_rng = master.stream(static_cast<std::uint64_t>(iter));
    if (variant_uses_eot(cfg.variant))
      copies = eot_transform(adv, pool, cfg, iter_rng);

    const IterationEval eval = compound_loss(
        model, x, delta, delta_bar, copies.empty() ? nullptr : &copies, target,
        &grid, alpha_state.alpha, beta_val, cfg);

    SuccessCheck check = success_check(cfg.variant, eval.transcripts,
                                       target_words);
    if (variant_uses_eot(cfg.variant))
      check.success = check.per_rir_success_count >= cfg.success_min_copies;

    if (check.success) result.success_found = true;

    // Best candidate: maximal per-RIR success count, ties broken by least
    // perceptibility; only successful iterations are eligible.
    if (check.success &&
        (check.per_rir_success_count > result.per_rir_success_count ||
         (check.per_rir_success_count == result.per_rir_success_count &&
          eval.perceptibility < best_percept))) {
      result.per_rir_success_count = check.per_rir_success_count;
      best_percept = eval.perceptibility;
      result.best_delta = delta_bar;
      result.transcripts_transformed.clear();
      if (variant_uses_eot(cfg.variant))
        for (const auto& t : eval.transcripts)
          result.transcripts_transformed.push_back(join_words(t));
      have_best = true;
    }

    if (trace)
      trace->push_back({iter, eval.total_loss, alpha_state.alpha,
                        alpha_state.streak, check.success,
                        check.per_rir_success_count});

    alpha_state = update_alpha(alpha_state, check.success, cfg);

    // Descend along the sup-normalized gradient so learning_rate is a
    // per-sample amplitude step. Raw CTC gradients through the log-mel front
    // end span several orders of magnitude across clips and iterations; an
    // unnormalized step either stalls or blows far past the clipping box.
    double gmax = 0.0;
    for (int j = 0; j < len; ++j)
      gmax = std::max(gmax, std::abs(eval.grad_delta[j]));
    if (gmax > 0.0) {
      const double step = cfg.learning_rate / gmax;
      for (int j = 0; j < len; ++j) delta[j] -= step * eval.grad_delta[j];
    }
    result.iterations_run = iter + 1;
  }

  if (!have_best) result.best_delta = clip_perturbation(delta, eps);
  result.final_alpha = alpha_state.alpha;

  AudioClip best_adv = x;
  AudioClip delta_clip;
  delta_clip.sample_rate = x.sample_rate;
  delta_clip.samples = result.best_delta;
  for (int j = 0; j < len; ++j) best_adv.samples[j] += result.best_delta[j];
  result.transcript_clean = transcribe(model, best_adv);

  const double dnorm = l2_norm(result.best_delta);
  result.snr_db = dnorm > 0.0 ? snr_db(x, delta_clip)
                              : std::numeric_limits<double>::infinity();
  PsychoParams params;
  params.mode = cfg.perceptual_mode;
  result.perceptual_loss = perceptual_loss(delta_clip, grid, params);
  return result;
}

}  // namespace aat
