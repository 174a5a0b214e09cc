// aat: generate, harden, and evaluate targeted audio adversarial examples
// against the bundled toy speech recognizer.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "aat/attack.hpp"
#include "aat/audio.hpp"
#include "aat/config.hpp"
#include "aat/ctc.hpp"
#include "aat/eval.hpp"
#include "aat/model.hpp"
#include "aat/psycho.hpp"
#include "aat/rir.hpp"
#include "aat/synth.hpp"
#include "aat/wer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;

// Config-shaped problems get their own exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string output_root() {
  const char* env = std::getenv("AAT_OUTPUT_ROOT");
  return env ? env : ".";
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

aat::RunConfig resolved_config(const std::string& config_path,
                               const aat::KeyValueConfig& overrides) {
  aat::RunConfig run;
  try {
    if (!config_path.empty())
      run.apply(aat::KeyValueConfig::load(config_path));
    run.apply(overrides);
    run.attack.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return run;
}

int cmd_train_victim(const std::string& out_path, std::uint64_t seed,
                     int epochs, int train_size, int heldout_size,
                     bool verbose) {
  const auto train_set = aat::make_training_corpus(train_size, seed);
  const auto heldout = aat::make_corpus(heldout_size, 1, 3, seed + 1);
  aat::TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.seed = seed;
  cfg.verbose = verbose;
  const aat::VictimModel model = aat::train_victim(train_set, heldout, cfg);
  ensure_dir(fs::path(out_path).parent_path().empty()
                 ? fs::path(".")
                 : fs::path(out_path).parent_path());
  aat::save_model(out_path, model);
  std::printf("saved %s (held-out WER %.2f%%)\n", out_path.c_str(),
              aat::corpus_wer(model, heldout));
  return kExitOk;
}

void write_attack_outputs(const fs::path& dir, const aat::AudioClip& x,
                          const aat::AttackResult& result,
                          const std::vector<aat::TraceRow>& trace,
                          const aat::RunConfig& run) {
  ensure_dir(dir);
  aat::AudioClip adv = x;
  aat::AudioClip delta;
  delta.sample_rate = x.sample_rate;
  delta.samples = result.best_delta;
  for (int j = 0; j < x.size(); ++j) adv.samples[j] += result.best_delta[j];
  aat::write_wav((dir / "adversarial.wav").string(), adv);
  aat::write_wav((dir / "delta.wav").string(), delta);

  json j;
  j["variant"] = aat::variant_name(run.attack.variant);
  j["target"] = run.target_text;
  j["iterations_run"] = result.iterations_run;
  j["success_found"] = result.success_found;
  j["per_rir_success_count"] = result.per_rir_success_count;
  j["final_alpha"] = result.final_alpha;
  j["snr_db"] = std::isfinite(result.snr_db) ? json(result.snr_db) : json("inf");
  j["perceptual_loss"] = result.perceptual_loss;
  j["transcript_clean"] = aat::join_words(result.transcript_clean);
  j["transcripts_transformed"] = result.transcripts_transformed;
  write_text(dir / "result.json", j.dump(2) + "\n");

  std::FILE* f = std::fopen((dir / "trace.csv").string().c_str(), "w");
  if (!f) throw std::runtime_error("cannot write trace.csv");
  std::fprintf(f, "iteration,loss,alpha,streak,success,per_rir_count\n");
  for (const auto& row : trace)
    std::fprintf(f, "%d,%.9g,%.9g,%d,%d,%d\n", row.iteration, row.loss,
                 row.alpha, row.streak, row.success ? 1 : 0, row.per_rir_count);
  std::fclose(f);

  run.to_kv().save((dir / "run_config.txt").string());
}

int cmd_attack(const aat::RunConfig& run) {
  if (run.model_path.empty()) throw ConfigError("attack: --model is required");
  if (run.input_path.empty()) throw ConfigError("attack: --input is required");
  if (run.target_text.empty()) throw ConfigError("attack: --target is required");

  const aat::VictimModel model = aat::load_model(run.model_path);
  const aat::AudioClip x = aat::read_wav(run.input_path);
  const auto target =
      aat::TranscriptionTarget::from_text(run.target_text, model.vocab);

  aat::RirPool pool(run.rooms);
  std::vector<aat::TraceRow> trace;
  const aat::AttackResult result =
      aat::run_attack(x, target, model, pool, run.attack, &trace);
  write_attack_outputs(run.output_dir, x, result, trace, run);
  std::printf("%s: success=%d snr=%.2f dB clean='%s'\n",
              run.output_dir.c_str(), result.success_found ? 1 : 0,
              result.snr_db, aat::join_words(result.transcript_clean).c_str());
  return kExitOk;
}

int cmd_simulate_eval(const aat::RunConfig& run, const std::string& adv_path) {
  if (run.model_path.empty())
    throw ConfigError("simulate-eval: --model is required");
  if (run.input_path.empty())
    throw ConfigError("simulate-eval: --input is required");
  if (adv_path.empty()) throw ConfigError("simulate-eval: --adv is required");
  if (run.target_text.empty())
    throw ConfigError("simulate-eval: --target is required");

  const aat::VictimModel model = aat::load_model(run.model_path);
  const aat::AudioClip x = aat::read_wav(run.input_path);
  const aat::AudioClip adv = aat::read_wav(adv_path);
  if (adv.size() != x.size())
    throw ConfigError("simulate-eval: clip length mismatch");

  aat::AttackResult pseudo;
  pseudo.best_delta.resize(x.size());
  for (int j = 0; j < x.size(); ++j)
    pseudo.best_delta[j] = adv.samples[j] - x.samples[j];
  const auto clean = aat::transcribe(model, adv);
  pseudo.success_found = aat::join_words(clean) == run.target_text;
  double norm = 0.0;
  for (double d : pseudo.best_delta) norm += d * d;
  aat::AudioClip delta;
  delta.sample_rate = x.sample_rate;
  delta.samples = pseudo.best_delta;
  pseudo.snr_db = norm > 0.0 ? aat::snr_db(x, delta)
                             : std::numeric_limits<double>::infinity();

  const aat::EvalRecord rec =
      aat::evaluate_example(model, x, pseudo, "external", run.target_text,
                            run.eval, 0);
  ensure_dir(run.output_dir);
  aat::write_records_csv(
      (fs::path(run.output_dir) / "eval_records.csv").string(), {rec});
  const auto rows = aat::summarize({rec});
  json j = json::array();
  for (const auto& row : rows)
    j.push_back({{"variant", row.variant},
                 {"target", row.target},
                 {"n_examples", row.n_examples},
                 {"mean_wer", row.mean_wer},
                 {"mean_snr_db", row.mean_snr_db},
                 {"success_rate", row.success_rate}});
  write_text(fs::path(run.output_dir) / "summary.json", j.dump(2) + "\n");
  run.to_kv().save(
      (fs::path(run.output_dir) / "run_config.txt").string());
  std::printf("mean WER to target: %.2f%%\n", rec.wer_to_target);
  return kExitOk;
}

int cmd_rir_gen(const aat::RunConfig& run, int count) {
  ensure_dir(run.output_dir);
  aat::Rng rng(run.master_seed);
  for (int i = 0; i < count; ++i) {
    const aat::RoomConfig room = aat::sample_room(run.rooms, rng);
    const aat::Rir rir = aat::generate_rir(room);
    aat::AudioClip clip;
    clip.sample_rate = rir.sample_rate;
    clip.samples = rir.taps;
    char name[32];
    std::snprintf(name, sizeof(name), "rir_%03d", i);
    aat::write_wav((fs::path(run.output_dir) / (std::string(name) + ".wav")).string(),
                   clip);
    json j;
    j["dims"] = {room.dims[0], room.dims[1], room.dims[2]};
    j["source_pos"] = {room.source_pos[0], room.source_pos[1], room.source_pos[2]};
    j["listener_pos"] = {room.listener_pos[0], room.listener_pos[1],
                         room.listener_pos[2]};
    j["rt60_target"] = room.rt60;
    j["rt60_measured"] = aat::measure_rt60(rir);
    j["sample_rate"] = rir.sample_rate;
    write_text(fs::path(run.output_dir) / (std::string(name) + ".json"),
               j.dump(2) + "\n");
  }
  run.to_kv().save((fs::path(run.output_dir) / "run_config.txt").string());
  std::printf("wrote %d RIR pairs to %s\n", count, run.output_dir.c_str());
  return kExitOk;
}

int cmd_mask_analyze(const aat::RunConfig& run) {
  if (run.input_path.empty())
    throw ConfigError("mask-analyze: --input is required");
  const aat::AudioClip x = aat::read_wav(run.input_path);
  const aat::MaskingThresholdGrid grid = aat::compute_masking_grid(x);
  ensure_dir(run.output_dir);

  const fs::path dir(run.output_dir);
  std::FILE* f = std::fopen((dir / "thresholds.csv").string().c_str(), "w");
  if (!f) throw std::runtime_error("cannot write thresholds.csv");
  for (int t = 0; t < grid.thresholds.rows; ++t) {
    for (int k = 0; k < grid.thresholds.cols; ++k)
      std::fprintf(f, k ? ",%.9g" : "%.9g", grid.thresholds.at(t, k));
    std::fprintf(f, "\n");
  }
  std::fclose(f);

  // Per-frame maskers plus a Figure-style PSD/threshold pair per frame.
  const aat::Spectrogram spec = aat::stft(x, grid.frame_len, grid.hop);
  const aat::SplGrid spl = aat::spl_normalize(spec);
  const auto freqs =
      aat::bin_frequencies(spec.n_bins, grid.frame_len, x.sample_rate);
  const auto quiet = aat::quiet_threshold(freqs);
  f = std::fopen((dir / "maskers.csv").string().c_str(), "w");
  if (!f) throw std::runtime_error("cannot write maskers.csv");
  std::fprintf(f, "frame,bin,freq_hz,spl_db,kind\n");
  for (int t = 0; t < spl.n_frames; ++t) {
    const auto maskers = aat::frame_maskers(
        &spl.values[static_cast<std::size_t>(t) * spl.n_bins], spl.n_bins,
        grid.frame_len, x.sample_rate, quiet);
    for (const auto& m : maskers)
      std::fprintf(f, "%d,%d,%.9g,%.9g,%s\n", t, m.bin, freqs[m.bin], m.spl,
                   m.kind == aat::MaskerKind::kTonal ? "tonal" : "noise");
  }
  std::fclose(f);

  f = std::fopen((dir / "frame0_psd_threshold.csv").string().c_str(), "w");
  if (!f) throw std::runtime_error("cannot write frame0_psd_threshold.csv");
  std::fprintf(f, "freq_hz,psd_db,threshold_db\n");
  for (int k = 0; k < spl.n_bins; ++k)
    std::fprintf(f, "%.9g,%.9g,%.9g\n", freqs[k], spl.at(0, k),
                 grid.thresholds.at(0, k));
  std::fclose(f);

  run.to_kv().save((dir / "run_config.txt").string());
  std::printf("wrote masking analysis to %s\n", run.output_dir.c_str());
  return kExitOk;
}

int cmd_report(const std::string& dir, const std::string& out_path) {
  std::vector<aat::EvalRecord> records;
  if (fs::exists(dir))
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (entry.path().filename() != "eval_records.csv") continue;
      std::ifstream in(entry.path());
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        aat::EvalRecord rec;
        // example_id,variant,"target",wer,snr,success
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const auto q1 = line.find('"', c2);
        const auto q2 = line.find('"', q1 + 1);
        if (c1 == std::string::npos || q2 == std::string::npos) continue;
        rec.example_id = std::stoi(line.substr(0, c1));
        rec.variant = line.substr(c1 + 1, c2 - c1 - 1);
        rec.target = line.substr(q1 + 1, q2 - q1 - 1);
        const auto rest = line.substr(q2 + 2);
        const auto c3 = rest.find(',');
        const auto c4 = rest.find(',', c3 + 1);
        rec.wer_to_target = std::stod(rest.substr(0, c3));
        rec.snr_db = std::stod(rest.substr(c3 + 1, c4 - c3 - 1));
        rec.success_found = rest.substr(c4 + 1) == "1";
        records.push_back(std::move(rec));
      }
    }
  if (records.empty())
    throw std::runtime_error("report: no records found under " + dir);

  const auto rows = aat::summarize(records);
  json j = json::array();
  std::printf("%-16s %-36s %8s %8s %8s\n", "variant", "target", "WER",
              "SNR", "success");
  for (const auto& row : rows) {
    std::printf("%-16s %-36s %8.2f %8.2f %7.1f%%\n", row.variant.c_str(),
                row.target.c_str(), row.mean_wer, row.mean_snr_db,
                row.success_rate);
    j.push_back({{"variant", row.variant},
                 {"target", row.target},
                 {"n_examples", row.n_examples},
                 {"mean_wer", row.mean_wer},
                 {"mean_snr_db", row.mean_snr_db},
                 {"success_rate", row.success_rate}});
  }
  if (!out_path.empty()) write_text(out_path, j.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"targeted audio adversarial examples against the bundled ASR"};
  app.require_subcommand(1);
  int jobs = 1;
  app.add_option("--jobs", jobs, "worker cap (modules run serially today)");

  // Shared flags collected as overrides; only flags the user passed override
  // the config file.
  std::string config_path, model_path, input_path, target_text, output_dir;
  std::string variant, adv_path;
  double epsilon = 0.0, learning_rate = 0.0, alpha_init = 0.0, noise_sigma = -1.0;
  int iterations = 0, eot_copies = 0, n_transforms = 0, count = 16;
  std::uint64_t seed = 0, eval_seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key-value config file");
    sub->add_option("--out", output_dir, "output directory");
    sub->add_option("--seed", seed, "master seed");
  };

  CLI::App* train = app.add_subcommand("train-victim", "train the toy ASR");
  std::string ckpt_out = "victim.ckpt";
  int epochs = 200, train_size = 800, heldout_size = 24;
  bool verbose = false;
  train->add_option("--out", ckpt_out, "checkpoint path");
  train->add_option("--seed", seed, "training seed");
  train->add_option("--epochs", epochs);
  train->add_option("--train-size", train_size);
  train->add_option("--heldout-size", heldout_size);
  train->add_flag("--verbose", verbose);

  CLI::App* attack = app.add_subcommand("attack", "run the integrated attack");
  add_common(attack);
  attack->add_option("--model", model_path, "victim checkpoint");
  attack->add_option("--input", input_path, "original WAV");
  attack->add_option("--target", target_text, "target phrase");
  attack->add_option("--variant", variant,
                     "base|robust|psychoacoustic|combined");
  attack->add_option("--epsilon", epsilon);
  attack->add_option("--learning-rate", learning_rate);
  attack->add_option("--iterations", iterations);
  attack->add_option("--alpha-init", alpha_init);
  attack->add_option("--eot-copies", eot_copies);
  attack->add_option("--noise-sigma", noise_sigma);

  CLI::App* sim = app.add_subcommand("simulate-eval",
                                     "evaluate a clip under transformations");
  add_common(sim);
  sim->add_option("--model", model_path);
  sim->add_option("--input", input_path, "original WAV");
  sim->add_option("--adv", adv_path, "adversarial WAV");
  sim->add_option("--target", target_text);
  sim->add_option("--transforms", n_transforms);
  sim->add_option("--eval-seed", eval_seed);

  CLI::App* rirgen = app.add_subcommand("rir-gen", "sample rooms, write RIRs");
  add_common(rirgen);
  rirgen->add_option("--count", count);

  CLI::App* mask = app.add_subcommand("mask-analyze",
                                      "masking thresholds of a WAV as CSV");
  add_common(mask);
  mask->add_option("--input", input_path);

  CLI::App* report = app.add_subcommand("report", "aggregate eval records");
  std::string report_dir = ".", report_out;
  report->add_option("--dir", report_dir, "directory of eval_records.csv files");
  report->add_option("--json", report_out, "summary JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (train->parsed())
      return cmd_train_victim(ckpt_out, seed ? seed : 1, epochs, train_size,
                              heldout_size, verbose);

    aat::KeyValueConfig overrides;
    if (!model_path.empty()) overrides.set("run.model_path", model_path);
    if (!input_path.empty()) overrides.set("run.input_path", input_path);
    if (!target_text.empty()) overrides.set("run.target_text", target_text);
    if (!output_dir.empty()) overrides.set("run.output_dir", output_dir);
    if (!variant.empty()) overrides.set("attack.variant", variant);
    if (epsilon > 0.0) overrides.set("attack.epsilon", epsilon);
    if (learning_rate > 0.0) overrides.set("attack.learning_rate", learning_rate);
    if (iterations > 0)
      overrides.set("attack.min_iterations", static_cast<std::int64_t>(iterations));
    if (alpha_init > 0.0) overrides.set("attack.alpha_init", alpha_init);
    if (eot_copies > 0)
      overrides.set("attack.eot_copies", static_cast<std::int64_t>(eot_copies));
    if (noise_sigma >= 0.0) overrides.set("attack.noise_sigma", noise_sigma);
    if (n_transforms > 0)
      overrides.set("eval.n_transforms", static_cast<std::int64_t>(n_transforms));
    if (eval_seed != 0) overrides.set("eval.seed", eval_seed);
    if (seed != 0) {
      overrides.set("run.master_seed", seed);
      overrides.set("attack.seed", seed);
    }
    aat::RunConfig run = resolved_config(config_path, overrides);
    if (output_dir.empty() && run.output_dir == ".")
      run.output_dir = output_root();

    if (attack->parsed()) return cmd_attack(run);
    if (sim->parsed()) return cmd_simulate_eval(run, adv_path);
    if (rirgen->parsed()) return cmd_rir_gen(run, count);
    if (mask->parsed()) return cmd_mask_analyze(run);
    if (report->parsed()) return cmd_report(report_dir, report_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
