#pragma once

#include <string>
#include <vector>

namespace aat {

// Word error rate in percent: 100 * (S + D + I) / len(reference) via
// word-level edit distance. Throws on an empty reference. Can exceed 100
// through insertions; values are reported unclipped.
double wer(const std::vector<std::string>& reference,
           const std::vector<std::string>& hypothesis);

double wer(const std::string& reference, const std::string& hypothesis);

}  // namespace aat
