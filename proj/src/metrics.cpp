#include "memagent/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "memagent/errors.hpp"
#include "memagent/text.hpp"

namespace memagent {
namespace {

constexpr int kMaxOrder = 4;

struct BleuStats {
  std::array<std::size_t, kMaxOrder> correct{};
  std::array<std::size_t, kMaxOrder> total{};
  std::size_t sys_len = 0;
  std::size_t ref_len = 0;

  void add(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    sys_len += cand.size();
    ref_len += ref.size();
    for (int n = 1; n <= kMaxOrder; ++n) {
      std::map<std::vector<std::string>, std::size_t> ref_counts;
      for (std::size_t i = 0; i + n <= ref.size(); ++i) {
        ++ref_counts[std::vector<std::string>(ref.begin() + i, ref.begin() + i + n)];
      }
      std::map<std::vector<std::string>, std::size_t> cand_counts;
      for (std::size_t i = 0; i + n <= cand.size(); ++i) {
        ++cand_counts[std::vector<std::string>(cand.begin() + i, cand.begin() + i + n)];
      }
      for (const auto& [gram, count] : cand_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) correct[n - 1] += std::min(count, it->second);
      }
      if (cand.size() >= static_cast<std::size_t>(n)) total[n - 1] += cand.size() - n + 1;
    }
  }

  // Mirrors the reference scorer: an all-zero match vector scores 0, orders
  // with no candidate n-grams stop the loop, zero-match orders get 1/(2^i * total).
  double score(bool effective_order) const {
    if (sys_len == 0) return 0.0;
    const double bp = sys_len < ref_len ? std::exp(1.0 - static_cast<double>(ref_len) / sys_len) : 1.0;
    if (std::all_of(correct.begin(), correct.end(), [](std::size_t c) { return c == 0; })) return 0.0;
    std::array<double, kMaxOrder> precisions{};
    double smooth = 1.0;
    int eff_order = kMaxOrder;
    for (int n = 1; n <= kMaxOrder; ++n) {
      if (total[n - 1] == 0) break;
      if (effective_order) eff_order = n;
      if (correct[n - 1] == 0) {
        smooth *= 2.0;
        precisions[n - 1] = 100.0 / (smooth * static_cast<double>(total[n - 1]));
      } else {
        precisions[n - 1] = 100.0 * static_cast<double>(correct[n - 1]) / static_cast<double>(total[n - 1]);
      }
    }
    double log_sum = 0.0;
    for (int n = 0; n < eff_order; ++n) {
      log_sum += precisions[n] == 0.0 ? -9999999999.0 : std::log(precisions[n]);
    }
    return std::clamp(bp * std::exp(log_sum / eff_order), 0.0, 100.0);
  }
};

}  // namespace

double bleu4(std::span<const std::string> candidates, std::span<const std::string> references) {
  if (candidates.empty()) throw ArgumentError("bleu4 needs at least one candidate");
  if (candidates.size() != references.size()) throw ArgumentError("bleu4 needs one reference per candidate");
  BleuStats stats;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    stats.add(normalized_words(candidates[i]), normalized_words(references[i]));
  }
  return stats.score(/*effective_order=*/false);
}

double sentence_bleu4(std::string_view candidate, std::string_view reference) {
  BleuStats stats;
  stats.add(normalized_words(candidate), normalized_words(reference));
  return stats.score(/*effective_order=*/true);
}

MeteorAlignment meteor_alignment(const std::vector<std::string>& candidate,
                                 const std::vector<std::string>& reference) {
  const std::size_t nc = candidate.size();
  const std::size_t nr = reference.size();
  std::vector<long> cand_to_ref(nc, -1);
  std::vector<bool> ref_used(nr, false);

  // Longest run of consecutive unused matches first (earliest on ties), until
  // no matchable pair is left. That reaches the maximum match count and keeps
  // matches contiguous, so it favours fewer chunks.
  auto align_stage = [&](const std::vector<std::string>& ckeys, const std::vector<std::string>& rkeys) {
    for (;;) {
      std::size_t best_len = 0, best_i = 0, best_j = 0;
      for (std::size_t i = 0; i < nc; ++i) {
        if (cand_to_ref[i] >= 0) continue;
        for (std::size_t j = 0; j < nr; ++j) {
          std::size_t len = 0;
          while (i + len < nc && j + len < nr && cand_to_ref[i + len] < 0 && !ref_used[j + len] &&
                 ckeys[i + len] == rkeys[j + len]) {
            ++len;
          }
          if (len > best_len) {
            best_len = len;
            best_i = i;
            best_j = j;
          }
        }
      }
      if (best_len == 0) return;
      for (std::size_t d = 0; d < best_len; ++d) {
        cand_to_ref[best_i + d] = static_cast<long>(best_j + d);
        ref_used[best_j + d] = true;
      }
    }
  };

  align_stage(candidate, reference);
  std::vector<std::string> cstems(nc);
  std::vector<std::string> rstems(nr);
  std::transform(candidate.begin(), candidate.end(), cstems.begin(), [](const auto& w) { return porter_stem(w); });
  std::transform(reference.begin(), reference.end(), rstems.begin(), [](const auto& w) { return porter_stem(w); });
  align_stage(cstems, rstems);

  MeteorAlignment out;
  long prev_i = -2;
  long prev_j = -2;
  for (std::size_t i = 0; i < nc; ++i) {
    const long j = cand_to_ref[i];
    if (j < 0) continue;
    ++out.matches;
    if (!(prev_i == static_cast<long>(i) - 1 && prev_j == j - 1)) ++out.chunks;
    prev_i = static_cast<long>(i);
    prev_j = j;
  }
  return out;
}

double meteor(std::string_view candidate, std::string_view reference) {
  const auto cand = normalized_words(candidate);
  const auto ref = normalized_words(reference);
  if (cand.empty() || ref.empty()) return 0.0;
  const auto a = meteor_alignment(cand, ref);
  if (a.matches == 0) return 0.0;
  constexpr double kAlpha = 0.9;
  constexpr double kBeta = 3.0;
  constexpr double kGamma = 0.5;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(cand.size());
  const double r = m / static_cast<double>(ref.size());
  const double fmean = p * r / (kAlpha * p + (1.0 - kAlpha) * r);
  const double penalty = kGamma * std::pow(static_cast<double>(a.chunks) / m, kBeta);
  return std::clamp(100.0 * fmean * (1.0 - penalty), 0.0, 100.0);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_f(std::string_view candidate, std::string_view reference) {
  const auto cand = normalized_words(candidate);
  const auto ref = normalized_words(reference);
  if (cand.empty() || ref.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(cand, ref));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(cand.size());
  const double r = lcs / static_cast<double>(ref.size());
  return 100.0 * 2.0 * p * r / (p + r);
}

}  // namespace memagent
