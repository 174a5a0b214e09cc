#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "aat/ctc.hpp"
#include "aat/mat.hpp"
#include "aat/rng.hpp"

using namespace aat;

namespace {

// Exhaustive CTC oracle: enumerate every length-T path over the vocabulary,
// collapse it, and sum the probabilities of paths matching the target.
double brute_force_ctc(const Mat& logits, const std::vector<int>& target) {
  const int T = logits.rows, V = logits.cols;
  // softmax rows
  Mat probs(T, V);
  for (int t = 0; t < T; ++t) {
    double mx = logits.at(t, 0);
    for (int v = 1; v < V; ++v) mx = std::max(mx, logits.at(t, v));
    double z = 0.0;
    for (int v = 0; v < V; ++v) z += std::exp(logits.at(t, v) - mx);
    for (int v = 0; v < V; ++v)
      probs.at(t, v) = std::exp(logits.at(t, v) - mx) / z;
  }
  double total = 0.0;
  std::vector<int> path(T, 0);
  while (true) {
    // collapse: drop repeats then blanks (0)
    std::vector<int> collapsed;
    for (int t = 0; t < T; ++t) {
      if (t > 0 && path[t] == path[t - 1]) continue;
      if (path[t] != 0) collapsed.push_back(path[t]);
    }
    if (collapsed == target) {
      double p = 1.0;
      for (int t = 0; t < T; ++t) p *= probs.at(t, path[t]);
      total += p;
    }
    // odometer increment
    int t = T - 1;
    while (t >= 0 && ++path[t] == V) path[t--] = 0;
    if (t < 0) break;
  }
  return -std::log(total);
}

Mat uniform_logits(int T, int V) {
  Mat m(T, V);
  m.zero();
  return m;
}

}  // namespace

TEST_CASE("vocabulary round trip") {
  Vocab v;
  CHECK(v.id_of('a') == 1);
  CHECK(v.id_of('z') == 26);
  CHECK(v.id_of(' ') == 27);
  const auto ids = v.encode("open the door");
  CHECK(v.decode(ids) == "open the door");
  const auto t = TranscriptionTarget::from_text("go now", v);
  CHECK(t.text == "go now");
  CHECK(v.decode(t.token_ids) == "go now");
}

TEST_CASE("hand-enumerated uniform cases") {
  // 1 frame, 3 symbols {blank, a, b}, target "a": only path 'a', p = 1/3
  CHECK(ctc_loss(uniform_logits(1, 3), {1}) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));
  // 2 frames: paths aa, a-, -a -> 3/9
  CHECK(ctc_loss(uniform_logits(2, 3), {1}) ==
        doctest::Approx(-std::log(3.0 / 9.0)).epsilon(1e-12));
}

TEST_CASE("ctc matches brute-force enumeration") {
  Rng rng(41);
  for (int trial = 0; trial < 60; ++trial) {
    const int T = 1 + static_cast<int>(rng.below(6));
    const int V = 2 + static_cast<int>(rng.below(3));  // 2..4 incl. blank
    const int L = 1 + static_cast<int>(rng.below(3));
    std::vector<int> target(L);
    for (int& s : target) s = 1 + static_cast<int>(rng.below(V - 1));
    Mat logits(T, V);
    for (auto& x : logits.d) x = rng.normal(0.0, 2.0);
    // skip infeasible targets (they throw; covered separately)
    int needed = L;
    for (int i = 1; i < L; ++i)
      if (target[i] == target[i - 1]) ++needed;
    if (needed > T) continue;
    const double oracle = brute_force_ctc(logits, target);
    const double got = ctc_loss(logits, target);
    CHECK(std::abs(got - oracle) < 1e-10);
  }
}

TEST_CASE("infeasible target is rejected") {
  CHECK_THROWS_WITH_AS(ctc_loss(uniform_logits(2, 3), {1, 1, 1}),
                       doctest::Contains("too long"), std::invalid_argument);
}

TEST_CASE("ctc gradient matches finite differences") {
  Rng rng(42);
  Mat logits(5, 4);
  for (auto& x : logits.d) x = rng.normal(0.0, 1.0);
  const std::vector<int> target = {2, 1};
  Mat grad;
  ctc_loss(logits, target, &grad);
  const double h = 1e-6;
  for (int t = 0; t < 5; ++t)
    for (int v = 0; v < 4; ++v) {
      Mat lp = logits, lm = logits;
      lp.at(t, v) += h;
      lm.at(t, v) -= h;
      const double fd = (ctc_loss(lp, target) - ctc_loss(lm, target)) / (2 * h);
      CHECK(std::abs(grad.at(t, v) - fd) /
                std::max(std::abs(fd), 1e-6) < 1e-4);
    }
}

TEST_CASE("greedy decode collapse rules") {
  Vocab v;
  // per-frame argmax: c a a blank t
  const std::vector<int> frames = {v.id_of('c'), v.id_of('a'), v.id_of('a'), 0,
                                   v.id_of('t')};
  Mat logits(static_cast<int>(frames.size()), 28);
  logits.zero();
  for (std::size_t t = 0; t < frames.size(); ++t) logits.at(t, frames[t]) = 5.0;
  CHECK(v.decode(greedy_decode(logits)) == "cat");

  Mat blanks(4, 28);
  blanks.zero();
  for (int t = 0; t < 4; ++t) blanks.at(t, 0) = 5.0;
  CHECK(greedy_decode(blanks).empty());
  CHECK(greedy_words(blanks, v).empty());
}

TEST_CASE("word utilities") {
  CHECK(split_words("please open the door") ==
        std::vector<std::string>{"please", "open", "the", "door"});
  CHECK(join_words({"go", "now"}) == "go now");
  CHECK(split_words("").empty());
}
