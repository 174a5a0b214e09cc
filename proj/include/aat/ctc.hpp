#pragma once

#include <string>
#include <vector>

#include "aat/mat.hpp"

namespace aat {

// Character vocabulary: blank (id 0), 'a'..'z', space.
class Vocab {
 public:
  static constexpr int kBlank = 0;

  int size() const { return 28; }

  // Lossless round trip for lowercase text; throws on unsupported chars.
  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;

  int id_of(char c) const;
  char char_of(int id) const;
};

struct TranscriptionTarget {
  std::string text;
  std::vector<int> token_ids;

  static TranscriptionTarget from_text(const std::string& text,
                                       const Vocab& vocab);
};

// Negative log probability of the target under the CTC alignment model;
// logits are unnormalized (softmax applied internally). If grad_logits is
// non-null it receives the exact gradient. Throws if the target cannot be
// aligned within the frame count.
double ctc_loss(const Mat& logits, const std::vector<int>& target,
                Mat* grad_logits = nullptr);

// Greedy best path: per-frame argmax, collapse repeats, drop blanks.
std::vector<int> greedy_decode(const Mat& logits);

// Decode to words (split on space).
std::vector<std::string> greedy_words(const Mat& logits, const Vocab& vocab);

std::vector<std::string> split_words(const std::string& text);
std::string join_words(const std::vector<std::string>& words);

}  // namespace aat
