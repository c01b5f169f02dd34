#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace memagent {

// All scores are percentages in [0, 100]. Text is tokenized with
// normalized_words() (lowercase, ASCII punctuation removed, whitespace split).

// Corpus-level BLEU-4: clipped n-gram counts pooled over the corpus, brevity
// penalty from pooled lengths, exponential ("exp") smoothing of zero-match
// orders. Throws ArgumentError on empty or mismatched inputs.
double bleu4(std::span<const std::string> candidates, std::span<const std::string> references);

// Single-pair BLEU-4 with effective order, so answers shorter than four
// tokens are scored on the orders they have.
double sentence_bleu4(std::string_view candidate, std::string_view reference);

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

// One-to-one unigram alignment: exact matches first, then Porter-stem
// matches, each stage taking the longest contiguous runs first.
MeteorAlignment meteor_alignment(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

// Fmean = P*R / (0.9*P + 0.1*R); penalty = 0.5 * (chunks/matches)^3.
double meteor(std::string_view candidate, std::string_view reference);

// LCS-based F1 over tokens.
double rouge_l_f(std::string_view candidate, std::string_view reference);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Porter (1980) suffix-stripping stemmer. Expects a lowercase word.
std::string porter_stem(std::string_view word);

}  // namespace memagent
