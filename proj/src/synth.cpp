#include "aat/synth.hpp"

#include <cmath>

#include "aat/rir.hpp"

namespace aat {
namespace {

struct Formants {
  double f1;
  double f2;
};

// Distinct two-formant signature per letter; f2 alone already separates all
// 26, f1 adds spread for the mel front end. The f2 spacing must stay well
// above the worst-case frequency jitter (±2% at the top letter ≈ ±73 Hz) or
// adjacent letters become inherently confusable.
Formants formants_of(char c) {
  const int i = c - 'a';
  return {230.0 + 47.0 * (i % 7), 900.0 + 110.0 * i};
}

void render_char(std::vector<double>& out, char c, double level, Rng& rng,
                 int sample_rate) {
  const double base_dur = c == ' ' ? 0.060 : 0.075;
  const double dur = base_dur * (1.0 + 0.15 * rng.uniform(-1.0, 1.0));
  const int n = static_cast<int>(dur * sample_rate);
  if (c == ' ') {
    out.insert(out.end(), n, 0.0);
    return;
  }
  const Formants f = formants_of(c);
  // A short silence after each letter keeps reverberation tails from fusing
  // adjacent letters into one blurred frame sequence.
  const int gap = static_cast<int>(0.020 * (1.0 + 0.3 * rng.uniform(-1.0, 1.0)) *
                                   sample_rate);
  const double jitter1 = 1.0 + 0.02 * rng.normal();
  const double jitter2 = 1.0 + 0.02 * rng.normal();
  const double phase1 = rng.uniform(0.0, 2.0 * M_PI);
  const double phase2 = rng.uniform(0.0, 2.0 * M_PI);
  const double w1 = 2.0 * M_PI * f.f1 * jitter1 / sample_rate;
  const double w2 = 2.0 * M_PI * f.f2 * jitter2 / sample_rate;
  const int ramp = sample_rate / 100;  // 10 ms raised-cosine edges
  for (int i = 0; i < n; ++i) {
    double env = 1.0;
    if (i < ramp) env = 0.5 - 0.5 * std::cos(M_PI * i / ramp);
    if (n - 1 - i < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(M_PI * (n - 1 - i) / ramp));
    const double s =
        0.6 * std::sin(w1 * i + phase1) + 0.4 * std::sin(w2 * i + phase2);
    out.push_back(level * env * s);
  }
  out.insert(out.end(), gap, 0.0);
}

}  // namespace

const std::vector<std::string>& lexicon() {
  static const std::vector<std::string> words = {
      "zero", "one",  "two",  "three",  "four", "five", "six",
      "seven", "eight", "nine", "please", "open", "close", "the",
      "door",  "window", "now", "again", "and",  "stop", "go"};
  return words;
}

const std::vector<std::string>& target_phrases() {
  static const std::vector<std::string> phrases = {
      "please open the door",
      "now close the door again",
      "please open the window and stop",
      "open the door and close the window now"};
  return phrases;
}

AudioClip synth_utterance(const std::string& text, Rng& rng, int sample_rate) {
  AudioClip clip;
  clip.sample_rate = sample_rate;
  const double level = 0.22 * (1.0 + 0.2 * rng.uniform(-1.0, 1.0));
  // brief lead-in silence
  clip.samples.assign(sample_rate / 50, 0.0);
  for (char c : text) render_char(clip.samples, c, level, rng, sample_rate);
  clip.samples.insert(clip.samples.end(), sample_rate / 50, 0.0);
  // light background noise
  for (double& s : clip.samples) s += 0.002 * rng.normal();
  return clip;
}

std::vector<LabeledClip> make_corpus(int n, int min_words, int max_words,
                                     std::uint64_t seed) {
  Rng rng(seed);
  const auto& words = lexicon();
  std::vector<LabeledClip> corpus;
  corpus.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int k = min_words + static_cast<int>(rng.below(max_words - min_words + 1));
    std::string text;
    for (int w = 0; w < k; ++w) {
      if (w) text.push_back(' ');
      text += words[rng.below(words.size())];
    }
    corpus.push_back({synth_utterance(text, rng), text});
  }
  return corpus;
}

std::vector<LabeledClip> make_training_corpus(int n, std::uint64_t seed) {
  Rng rng(seed);
  const auto& words = lexicon();
  RirPool rooms{RoomRanges{}};
  // Most of the corpus is heard through a random room, shifted by a random
  // onset, so the recognizer also works on reverberant audio; without this it
  // only ever sees anechoic clips and is useless in any simulated
  // environment.
  const auto maybe_reverberate = [&](AudioClip clip) {
    if (rng.uniform(0.0, 1.0) < 0.3) return clip;
    AudioClip rev = convolve(clip, rooms.draw(rng, nullptr));
    const int shift = static_cast<int>(rng.below(161));
    rev.samples.insert(rev.samples.begin(), shift, 0.0);
    return rev;
  };
  std::vector<LabeledClip> corpus;
  corpus.reserve(n);
  // Every lexicon word at least twice in isolation.
  for (int rep = 0; rep < 2; ++rep)
    for (const auto& w : words)
      corpus.push_back({maybe_reverberate(synth_utterance(w, rng)), w});
  while (static_cast<int>(corpus.size()) < n) {
    const int k = 1 + static_cast<int>(rng.below(3));
    std::string text;
    for (int w = 0; w < k; ++w) {
      if (w) text.push_back(' ');
      text += words[rng.below(words.size())];
    }
    corpus.push_back({maybe_reverberate(synth_utterance(text, rng)), text});
  }
  return corpus;
}

}  // namespace aat
