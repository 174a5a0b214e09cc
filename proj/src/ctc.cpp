#include "aat/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace aat {
namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

std::vector<int> Vocab::encode(const std::string& text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(id_of(c));
  return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(char_of(id));
  return out;
}

int Vocab::id_of(char c) const {
  if (c >= 'a' && c <= 'z') return 1 + (c - 'a');
  if (c == ' ') return 27;
  throw std::invalid_argument(std::string("Vocab: unsupported character '") +
                              c + "'");
}

char Vocab::char_of(int id) const {
  if (id >= 1 && id <= 26) return static_cast<char>('a' + id - 1);
  if (id == 27) return ' ';
  throw std::invalid_argument("Vocab: bad token id");
}

TranscriptionTarget TranscriptionTarget::from_text(const std::string& text,
                                                   const Vocab& vocab) {
  TranscriptionTarget t;
  t.text = text;
  t.token_ids = vocab.encode(text);
  return t;
}

double ctc_loss(const Mat& logits, const std::vector<int>& target,
                Mat* grad_logits) {
  const int n_frames = logits.rows;
  const int n_vocab = logits.cols;
  const int len = static_cast<int>(target.size());

  int min_frames = len;
  for (int i = 1; i < len; ++i)
    if (target[i] == target[i - 1]) ++min_frames;
  if (n_frames < min_frames)
    throw std::invalid_argument("ctc_loss: target too long for frame count");
  for (int id : target)
    if (id <= 0 || id >= n_vocab)
      throw std::invalid_argument("ctc_loss: target id out of range");

  // Extended label sequence with interleaved blanks.
  const int n_states = 2 * len + 1;
  std::vector<int> label(n_states, Vocab::kBlank);
  for (int i = 0; i < len; ++i) label[2 * i + 1] = target[i];

  // Log softmax per frame.
  Mat log_y(n_frames, n_vocab);
  for (int t = 0; t < n_frames; ++t) {
    const double* row = logits.row(t);
    const double mx = *std::max_element(row, row + n_vocab);
    double z = 0.0;
    for (int k = 0; k < n_vocab; ++k) z += std::exp(row[k] - mx);
    const double log_z = mx + std::log(z);
    for (int k = 0; k < n_vocab; ++k) log_y.at(t, k) = row[k] - log_z;
  }

  const auto allows_skip = [&](int s) {
    return s >= 2 && label[s] != Vocab::kBlank && label[s] != label[s - 2];
  };

  // Forward variables include the emission at t.
  Mat alpha(n_frames, n_states);
  std::fill(alpha.d.begin(), alpha.d.end(), kLogZero);
  alpha.at(0, 0) = log_y.at(0, label[0]);
  if (n_states > 1) alpha.at(0, 1) = log_y.at(0, label[1]);
  for (int t = 1; t < n_frames; ++t) {
    for (int s = 0; s < n_states; ++s) {
      double a = alpha.at(t - 1, s);
      if (s >= 1) a = log_add(a, alpha.at(t - 1, s - 1));
      if (allows_skip(s)) a = log_add(a, alpha.at(t - 1, s - 2));
      alpha.at(t, s) = a == kLogZero ? kLogZero : a + log_y.at(t, label[s]);
    }
  }

  double log_p = alpha.at(n_frames - 1, n_states - 1);
  if (n_states > 1)
    log_p = log_add(log_p, alpha.at(n_frames - 1, n_states - 2));
  if (log_p == kLogZero)
    throw std::invalid_argument("ctc_loss: no feasible alignment");

  if (grad_logits) {
    // Backward variables exclude the emission at t, so that
    // gamma_t(s) = alpha_t(s) + beta_t(s) - log_p is a proper posterior.
    Mat beta(n_frames, n_states);
    std::fill(beta.d.begin(), beta.d.end(), kLogZero);
    beta.at(n_frames - 1, n_states - 1) = 0.0;
    if (n_states > 1) beta.at(n_frames - 1, n_states - 2) = 0.0;
    for (int t = n_frames - 2; t >= 0; --t) {
      for (int s = 0; s < n_states; ++s) {
        double b = beta.at(t + 1, s) == kLogZero
                       ? kLogZero
                       : beta.at(t + 1, s) + log_y.at(t + 1, label[s]);
        if (s + 1 < n_states && beta.at(t + 1, s + 1) != kLogZero)
          b = log_add(b, beta.at(t + 1, s + 1) + log_y.at(t + 1, label[s + 1]));
        if (s + 2 < n_states && allows_skip(s + 2) &&
            beta.at(t + 1, s + 2) != kLogZero)
          b = log_add(b, beta.at(t + 1, s + 2) + log_y.at(t + 1, label[s + 2]));
        beta.at(t, s) = b;
      }
    }

    *grad_logits = Mat(n_frames, n_vocab);
    std::vector<double> log_gamma_k(n_vocab);
    for (int t = 0; t < n_frames; ++t) {
      std::fill(log_gamma_k.begin(), log_gamma_k.end(), kLogZero);
      for (int s = 0; s < n_states; ++s) {
        const double g = alpha.at(t, s) + beta.at(t, s);
        if (g != kLogZero)
          log_gamma_k[label[s]] = log_add(log_gamma_k[label[s]], g);
      }
      for (int k = 0; k < n_vocab; ++k) {
        const double posterior =
            log_gamma_k[k] == kLogZero ? 0.0 : std::exp(log_gamma_k[k] - log_p);
        grad_logits->at(t, k) = std::exp(log_y.at(t, k)) - posterior;
      }
    }
  }
  return -log_p;
}

std::vector<int> greedy_decode(const Mat& logits) {
  std::vector<int> out;
  int prev = -1;
  for (int t = 0; t < logits.rows; ++t) {
    const double* row = logits.row(t);
    const int k = static_cast<int>(
        std::max_element(row, row + logits.cols) - row);
    if (k != prev && k != Vocab::kBlank) out.push_back(k);
    prev = k;
  }
  return out;
}

std::vector<std::string> greedy_words(const Mat& logits, const Vocab& vocab) {
  return split_words(vocab.decode(greedy_decode(logits)));
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream is(text);
  std::string w;
  while (is >> w) words.push_back(w);
  return words;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

}  // namespace aat
