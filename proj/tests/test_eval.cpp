#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "aat/eval.hpp"
#include "aat/rng.hpp"
#include "aat/wer.hpp"

using namespace aat;

namespace {

// Independent word-Levenshtein oracle: plain full-matrix DP, written without
// looking at the library implementation.
double wer_oracle(const std::vector<std::string>& ref,
                  const std::vector<std::string>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)});
  return 100.0 * d[n][m] / n;
}

}  // namespace

TEST_CASE("wer hand examples") {
  CHECK(wer("go now", "go now") == 0.0);
  CHECK(wer("it is manifest that man is now subject", "it is manifest") ==
        doctest::Approx(62.5));
  CHECK(wer("open the door", "open the window") == doctest::Approx(100.0 / 3.0));
  // insertions can push past 100
  CHECK(wer("go", "please go now again") > 100.0);
  CHECK_THROWS(wer("", "something"));
}

TEST_CASE("wer matches the brute-force oracle on 1000 random pairs") {
  const std::vector<std::string> words = {"go",   "stop", "door", "now",
                                          "open", "the",  "nine", "two"};
  Rng rng(55);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::string> ref(1 + rng.below(8)), hyp(rng.below(9));
    for (auto& w : ref) w = words[rng.below(words.size())];
    for (auto& w : hyp) w = words[rng.below(words.size())];
    CHECK(wer(ref, hyp) == doctest::Approx(wer_oracle(ref, hyp)).epsilon(1e-12));
  }
}

TEST_CASE("wer symmetric in edit count for equal lengths") {
  const std::vector<std::string> a = {"go", "now", "door"};
  const std::vector<std::string> b = {"stop", "now", "open"};
  CHECK(wer(a, b) == wer(b, a));
}

TEST_CASE("simulate_environment") {
  AudioClip adv;
  adv.samples.resize(700);
  Rng fill(1);
  for (auto& s : adv.samples) s = fill.normal(0.0, 0.1);

  SUBCASE("degenerate transforms reproduce the zero-prepended input") {
    EvalConfig cfg;
    cfg.noise_sigma = 0.0;
    cfg.max_offset = 0;
    cfg.n_transforms = 4;
    RirPool pool({identity_rir()});
    Rng rng(2);
    const auto copies = simulate_environment(adv, pool, cfg, rng);
    REQUIRE(copies.size() == 4);
    for (const auto& c : copies)
      for (int i = 0; i < adv.size(); ++i)
        CHECK(c.samples[i] == doctest::Approx(adv.samples[i]).epsilon(1e-12));
  }
  SUBCASE("default count is ten and draws are reproducible") {
    EvalConfig cfg;
    CHECK(cfg.n_transforms == 10);
    RirPool pool(cfg.ranges);
    Rng r1(3), r2(3);
    const auto a = simulate_environment(adv, pool, cfg, r1);
    const auto b = simulate_environment(adv, pool, cfg, r2);
    REQUIRE(a.size() == 10);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (int j = 0; j < a[i].size(); ++j)
        CHECK(a[i].samples[j] == b[i].samples[j]);
  }
  SUBCASE("different seed domains give different transformations") {
    EvalConfig cfg;
    cfg.n_transforms = 1;
    RirPool pool(cfg.ranges);
    Rng r1(3), r2(4);
    const auto a = simulate_environment(adv, pool, cfg, r1);
    const auto b = simulate_environment(adv, pool, cfg, r2);
    bool differ = false;
    for (int j = 0; j < a[0].size() && !differ; ++j)
      differ = a[0].samples[j] != b[0].samples[j];
    CHECK(differ);
  }
  SUBCASE("n below one is rejected") {
    EvalConfig cfg;
    cfg.n_transforms = 0;
    RirPool pool(cfg.ranges);
    Rng rng(5);
    CHECK_THROWS(simulate_environment(adv, pool, cfg, rng));
  }
}

TEST_CASE("summaries are permutation invariant and group correctly") {
  std::vector<EvalRecord> records;
  for (int i = 0; i < 6; ++i) {
    EvalRecord r;
    r.example_id = i;
    r.variant = i % 2 ? "base" : "robust";
    r.target = "go now";
    r.wer_to_target = 10.0 * i;
    r.snr_db = 20.0 - i;
    r.success_found = i % 3 != 0;
    records.push_back(r);
  }
  const auto rows = summarize(records);
  auto shuffled = records;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto rows2 = summarize(shuffled);
  REQUIRE(rows.size() == 2);
  REQUIRE(rows2.size() == 2);
  for (const auto& row : rows)
    for (const auto& row2 : rows2)
      if (row.variant == row2.variant) {
        CHECK(row.mean_wer == doctest::Approx(row2.mean_wer).epsilon(1e-12));
        CHECK(row.success_rate == row2.success_rate);
        CHECK(row.mean_snr_db ==
              doctest::Approx(row2.mean_snr_db).epsilon(1e-12));
      }
  // snr means only cover successful examples
  for (const auto& row : rows) CHECK(row.mean_snr_db > 0.0);
}
