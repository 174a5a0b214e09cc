#include "aat/eval.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "aat/ctc.hpp"
#include "aat/wer.hpp"

namespace aat {

std::vector<AudioClip> simulate_environment(const AudioClip& adv,
                                            const RirPool& pool,
                                            const EvalConfig& cfg, Rng& rng) {
  if (cfg.n_transforms < 1)
    throw std::invalid_argument("simulate_environment: n_transforms >= 1");
  std::vector<AudioClip> out;
  out.reserve(cfg.n_transforms);
  for (int i = 0; i < cfg.n_transforms; ++i) {
    AudioClip noisy = adv;
    if (cfg.noise_sigma > 0.0)
      for (double& s : noisy.samples) s += rng.normal(0.0, cfg.noise_sigma);
    const Rir rir = pool.draw(rng);
    AudioClip reverbed = convolve(noisy, rir);
    AudioClip padded;
    padded.sample_rate = reverbed.sample_rate;
    padded.samples.assign(cfg.max_offset, 0.0);
    padded.samples.insert(padded.samples.end(), reverbed.samples.begin(),
                          reverbed.samples.end());
    const int k = cfg.max_offset > 0
                      ? static_cast<int>(rng.below(cfg.max_offset + 1))
                      : 0;
    out.push_back(apply_offset(padded, k));
  }
  return out;
}

EvalRecord evaluate_example(const VictimModel& model, const AudioClip& x,
                            const AttackResult& result,
                            const std::string& variant_label,
                            const std::string& target_text,
                            const EvalConfig& cfg, int example_id) {
  if (static_cast<int>(result.best_delta.size()) != x.size())
    throw std::invalid_argument("evaluate_example: delta/clip length mismatch");

  AudioClip adv = x;
  for (int j = 0; j < x.size(); ++j) adv.samples[j] += result.best_delta[j];

  // Seed stream keyed by example id keeps draws reproducible and disjoint
  // across examples regardless of evaluation order.
  Rng rng = Rng(cfg.seed).stream(static_cast<std::uint64_t>(example_id));
  RirPool pool(cfg.ranges);
  const auto copies = simulate_environment(adv, pool, cfg, rng);

  EvalRecord rec;
  rec.example_id = example_id;
  rec.variant = variant_label;
  rec.target = target_text;
  rec.snr_db = result.snr_db;
  rec.success_found = result.success_found;
  double wer_sum = 0.0;
  for (const AudioClip& copy : copies) {
    const auto hyp = transcribe(model, copy);
    rec.transcripts.push_back(join_words(hyp));
    wer_sum += wer(split_words(target_text), hyp);
  }
  rec.wer_to_target = wer_sum / copies.size();
  return rec;
}

std::vector<EvalSummary> summarize(const std::vector<EvalRecord>& records) {
  std::vector<EvalSummary> rows;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::vector<double> snr_sums;
  std::vector<int> snr_counts;
  for (const EvalRecord& rec : records) {
    const auto key = std::make_pair(rec.variant, rec.target);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rows.size()).first;
      rows.push_back({rec.variant, rec.target, 0, 0.0, 0.0, 0.0});
      snr_sums.push_back(0.0);
      snr_counts.push_back(0);
    }
    EvalSummary& row = rows[it->second];
    ++row.n_examples;
    row.mean_wer += rec.wer_to_target;
    if (rec.success_found) {
      row.success_rate += 1.0;
      if (std::isfinite(rec.snr_db)) {
        snr_sums[it->second] += rec.snr_db;
        ++snr_counts[it->second];
      }
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].mean_wer /= rows[i].n_examples;
    rows[i].success_rate = 100.0 * rows[i].success_rate / rows[i].n_examples;
    rows[i].mean_snr_db = snr_counts[i] > 0 ? snr_sums[i] / snr_counts[i] : 0.0;
  }
  return rows;
}

std::vector<SweepRow> sweep_reverberation(
    const std::vector<AudioClip>& corpus, const TranscriptionTarget& target,
    const VictimModel& model,
    const std::vector<std::pair<double, double>>& intervals, double true_rt60,
    const AttackConfig& attack_cfg, const EvalConfig& eval_cfg) {
  std::vector<SweepRow> rows;
  // The evaluation rooms pin rt60 at the "true" value; geometry still varies.
  EvalConfig true_env = eval_cfg;
  true_env.ranges.rt60_lo = true_rt60;
  true_env.ranges.rt60_hi = true_rt60;

  for (const auto& [lo, hi] : intervals) {
    RoomRanges train_ranges = eval_cfg.ranges;
    train_ranges.rt60_lo = lo;
    train_ranges.rt60_hi = hi;
    RirPool train_pool(train_ranges);

    double wer_sum = 0.0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      AttackConfig cfg = attack_cfg;
      cfg.seed = attack_cfg.seed + i;
      const AttackResult res =
          run_attack(corpus[i], target, model, train_pool, cfg);
      const EvalRecord rec =
          evaluate_example(model, corpus[i], res, variant_name(cfg.variant),
                           target.text, true_env, static_cast<int>(i));
      wer_sum += rec.wer_to_target;
    }
    rows.push_back({lo, hi, wer_sum / corpus.size()});
  }
  return rows;
}

std::vector<PoolRow> compare_pools(const std::vector<AudioClip>& corpus,
                                   const TranscriptionTarget& target,
                                   const VictimModel& model,
                                   const std::vector<PoolSpec>& specs,
                                   const AttackConfig& attack_cfg,
                                   const EvalConfig& eval_cfg) {
  std::vector<PoolRow> rows;
  for (const PoolSpec& spec : specs) {
    Rng pool_rng(attack_cfg.seed ^ 0x706f6f6cULL);  // pool-construction domain
    RirPool pool = spec.dynamic
                       ? RirPool(eval_cfg.ranges)
                       : RirPool(eval_cfg.ranges, spec.size, spec.mode,
                                 pool_rng);
    PoolRow row;
    row.name = spec.name;
    double wer_sum = 0.0;
    double correct_sum = 0.0;
    int correct_total = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      AttackConfig cfg = attack_cfg;
      cfg.seed = attack_cfg.seed + i;
      const AttackResult res =
          run_attack(corpus[i], target, model, pool, cfg);
      if (!res.success_found) continue;  // paper counts successful ones only
      const EvalRecord rec =
          evaluate_example(model, corpus[i], res, variant_name(cfg.variant),
                           target.text, eval_cfg, static_cast<int>(i));
      ++row.n_success;
      wer_sum += rec.wer_to_target;
      for (const auto& t : rec.transcripts) {
        ++correct_total;
        if (t == target.text) correct_sum += 1.0;
      }
    }
    if (row.n_success > 0) {
      row.mean_wer = wer_sum / row.n_success;
      row.correct_rate =
          correct_total > 0 ? 100.0 * correct_sum / correct_total : 0.0;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_records_csv(const std::string& path,
                       const std::vector<EvalRecord>& records) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  std::fprintf(f, "example_id,variant,target,wer_to_target,snr_db,success\n");
  for (const EvalRecord& rec : records)
    std::fprintf(f, "%d,%s,\"%s\",%.9g,%.9g,%d\n", rec.example_id,
                 rec.variant.c_str(), rec.target.c_str(), rec.wer_to_target,
                 rec.snr_db, rec.success_found ? 1 : 0);
  std::fclose(f);
}

}  // namespace aat
