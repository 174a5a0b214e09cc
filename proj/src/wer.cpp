#include "aat/wer.hpp"

#include <algorithm>
#include <stdexcept>

#include "aat/ctc.hpp"

namespace aat {

double wer(const std::vector<std::string>& reference,
           const std::vector<std::string>& hypothesis) {
  if (reference.empty()) throw std::invalid_argument("wer: empty reference");
  const std::size_t n = reference.size(), m = hypothesis.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub =
          prev[j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return 100.0 * static_cast<double>(prev[m]) / static_cast<double>(n);
}

double wer(const std::string& reference, const std::string& hypothesis) {
  return wer(split_words(reference), split_words(hypothesis));
}

}  // namespace aat
