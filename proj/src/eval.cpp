#include "memagent/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "jsonl.hpp"
#include "memagent/errors.hpp"
#include "memagent/metrics.hpp"
#include "memagent/text.hpp"

namespace memagent {

using nlohmann::json;

std::vector<QASample> load_dataset(const std::filesystem::path& path) {
  std::vector<QASample> samples;
  std::set<std::string> ids;
  detail::for_each_json_line(path, [&](const json& j, std::size_t line) {
    QASample s;
    s.sample_id = detail::require(j, "sample_id", line).get<std::string>();
    s.video_id = detail::require(j, "video_id", line).get<std::string>();
    s.question = detail::require(j, "question", line).get<std::string>();
    s.gold_answer = detail::require(j, "answer", line).get<std::string>();
    if (trim(s.question).empty()) throw FormatError("question must be non-empty", line);
    if (trim(s.gold_answer).empty()) throw FormatError("answer must be non-empty", line);
    if (auto it = j.find("segment"); it != j.end() && !it->is_null()) {
      if (!it->is_array() || it->size() != 2) throw FormatError("segment must be [start, end]", line);
      const double a = (*it)[0].get<double>();
      const double b = (*it)[1].get<double>();
      if (!(a <= b)) throw FormatError("segment start must not exceed end", line);
      s.segment = {a, b};
    }
    if (auto it = j.find("template"); it != j.end() && !it->is_null()) s.template_label = it->get<std::string>();
    if (auto it = j.find("split"); it != j.end() && !it->is_null()) s.split = it->get<std::string>();
    if (!ids.insert(s.sample_id).second) throw FormatError("duplicate sample_id " + s.sample_id, line);
    samples.push_back(std::move(s));
  });
  return samples;
}

std::map<std::string, SplitSummary> summarize_splits(std::span<const QASample> samples) {
  std::map<std::string, std::set<std::string>> videos;
  std::map<std::string, SplitSummary> out;
  for (const auto& s : samples) {
    const std::string key = s.split.value_or("all");
    videos[key].insert(s.video_id);
    ++out[key].samples;
  }
  for (auto& [key, summary] : out) summary.videos = videos[key].size();
  return out;
}

EvalScores score_pair(std::string_view predicted, std::string_view gold) {
  return {sentence_bleu4(predicted, gold), meteor(predicted, gold), rouge_l_f(predicted, gold)};
}

EvalReport run_emqa(const AgentFn& agent, std::span<const QASample> samples, const EmqaOptions& options) {
  std::vector<SampleResult> rows(samples.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < samples.size(); i = next.fetch_add(1)) {
      const auto& s = samples[i];
      auto& row = rows[i];
      row.sample_id = s.sample_id;
      row.video_id = s.video_id;
      row.template_label = s.template_label.value_or(std::string(kUncategorizedTemplate));
      row.gold = s.gold_answer;
      try {
        row.predicted = agent(s);
      } catch (const std::exception& e) {
        row.predicted.clear();
        row.flagged = true;
        row.flag_reason = e.what();
      }
      row.scores = score_pair(row.predicted, row.gold);
    }
  };
  {
    const std::size_t n = std::max<std::size_t>(1, std::min(options.workers, samples.size()));
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < n; ++w) workers.emplace_back(work);
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });

  EvalReport report;
  if (!rows.empty()) {
    std::vector<std::string> predictions;
    std::vector<std::string> golds;
    for (const auto& r : rows) {
      predictions.push_back(r.predicted);
      golds.push_back(r.gold);
      report.overall.meteor += r.scores.meteor;
      report.overall.rouge_l_f += r.scores.rouge_l_f;
      auto& t = report.per_template[r.template_label];
      t.scores.bleu4 += r.scores.bleu4;
      t.scores.meteor += r.scores.meteor;
      t.scores.rouge_l_f += r.scores.rouge_l_f;
      ++t.count;
      if (r.flagged) ++report.flagged;
    }
    report.overall.bleu4 = bleu4(predictions, golds);
    report.overall.meteor /= static_cast<double>(rows.size());
    report.overall.rouge_l_f /= static_cast<double>(rows.size());
    for (auto& [label, t] : report.per_template) {
      const double n = static_cast<double>(t.count);
      t.scores.bleu4 /= n;
      t.scores.meteor /= n;
      t.scores.rouge_l_f /= n;
    }
  }
  report.per_sample = std::move(rows);
  return report;
}

namespace {

json scores_to_json(const EvalScores& s) {
  return {{"bleu4", s.bleu4}, {"meteor", s.meteor}, {"rouge_l_f", s.rouge_l_f}};
}

}  // namespace

json report_to_json(const EvalReport& report) {
  json per_template = json::object();
  for (const auto& [label, t] : report.per_template) {
    per_template[label] = {{"scores", scores_to_json(t.scores)}, {"count", t.count}};
  }
  json per_sample = json::array();
  for (const auto& r : report.per_sample) {
    json row = {{"sample_id", r.sample_id}, {"video_id", r.video_id},   {"template", r.template_label},
                {"predicted", r.predicted}, {"gold", r.gold},           {"scores", scores_to_json(r.scores)},
                {"flagged", r.flagged}};
    if (r.flagged) row["flag_reason"] = r.flag_reason;
    per_sample.push_back(std::move(row));
  }
  return {{"overall", scores_to_json(report.overall)},
          {"sample_count", report.per_sample.size()},
          {"flagged", report.flagged},
          {"per_template", std::move(per_template)},
          {"per_sample", std::move(per_sample)}};
}

std::string report_to_text(const EvalReport& report) {
  std::size_t width = std::string_view("Template").size();
  for (const auto& [label, t] : report.per_template) width = std::max(width, char_count(label));

  std::string out;
  out += fmt::format("{:<{}}  {:>7}  {:>7}  {:>7}\n", "Model", width, "BLEU", "METEOR", "ROUGE");
  out += fmt::format("{:<{}}  {:>7.1f}  {:>7.1f}  {:>7.1f}\n", "memory agent", width, report.overall.bleu4,
                     report.overall.meteor, report.overall.rouge_l_f);
  out += fmt::format("samples: {}  flagged: {}\n\n", report.per_sample.size(), report.flagged);
  out += fmt::format("{:<{}}  {:>5}  {:>7}  {:>7}  {:>7}\n", "Template", width, "N", "BLEU", "METEOR", "ROUGE");
  for (const auto& [label, t] : report.per_template) {
    // fmt pads by code units; pad manually so UTF-8 labels stay aligned.
    out += label + std::string(width - char_count(label), ' ');
    out += fmt::format("  {:>5}  {:>7.1f}  {:>7.1f}  {:>7.1f}\n", t.count, t.scores.bleu4, t.scores.meteor,
                       t.scores.rouge_l_f);
  }
  return out;
}

}  // namespace memagent
