#pragma once

#include <string>
#include <vector>

#include "aat/audio.hpp"
#include "aat/model.hpp"
#include "aat/rng.hpp"

namespace aat {

// Bundled formant-synthesized corpus: short labeled utterances built from a
// fixed lexicon so the full test suite runs without downloads. Each character
// maps to a distinct two-formant signature; words are concatenated character
// segments with jittered pitch, duration, and level.

const std::vector<std::string>& lexicon();

// The four bundled target phrases, increasing in length.
const std::vector<std::string>& target_phrases();

AudioClip synth_utterance(const std::string& text, Rng& rng,
                          int sample_rate = 16000);

// n labeled utterances of min_words..max_words lexicon words each.
std::vector<LabeledClip> make_corpus(int n, int min_words, int max_words,
                                     std::uint64_t seed);

// Training corpus covering the lexicon (every word appears), plus random
// multi-word utterances.
std::vector<LabeledClip> make_training_corpus(int n, std::uint64_t seed);

}  // namespace aat
