#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace memagent {

inline constexpr std::string_view kUncategorizedTemplate = "uncategorized";

struct QASample {
  std::string sample_id;
  std::string video_id;
  std::string question;
  std::string gold_answer;
  std::optional<std::pair<double, double>> segment;
  std::optional<std::string> template_label;
  std::optional<std::string> split;  // "train" / "val" / "test" when the file carries it
};

// JSON lines {"sample_id","video_id","question","answer","segment":[s,e]?,"template"?,"split"?}.
// Throws FormatError naming the offending line.
std::vector<QASample> load_dataset(const std::filesystem::path& path);

struct SplitSummary {
  std::size_t videos = 0;
  std::size_t samples = 0;
};

// Keyed by split name; samples without a split count under "all".
std::map<std::string, SplitSummary> summarize_splits(std::span<const QASample> samples);

struct EvalScores {
  double bleu4 = 0.0;
  double meteor = 0.0;
  double rouge_l_f = 0.0;
};

// Sentence BLEU-4, METEOR and ROUGE-L for one (prediction, gold) pair.
EvalScores score_pair(std::string_view predicted, std::string_view gold);

struct SampleResult {
  std::string sample_id;
  std::string video_id;
  std::string template_label;
  std::string predicted;
  std::string gold;
  EvalScores scores;
  bool flagged = false;
  std::string flag_reason;
};

struct TemplateResult {
  EvalScores scores;  // means over the template's samples
  std::size_t count = 0;
};

struct EvalReport {
  EvalScores overall;  // corpus BLEU-4; mean METEOR and ROUGE-L
  std::map<std::string, TemplateResult> per_template;
  std::vector<SampleResult> per_sample;  // sorted by sample_id
  std::size_t flagged = 0;
};

// Returns the predicted answer; throwing flags the sample and scores it as "".
using AgentFn = std::function<std::string(const QASample&)>;

struct EmqaOptions {
  std::size_t workers = 1;
};

EvalReport run_emqa(const AgentFn& agent, std::span<const QASample> samples, const EmqaOptions& options = {});

nlohmann::json report_to_json(const EvalReport& report);
// Aligned tables: overall scores, then per-template scores and counts.
std::string report_to_text(const EvalReport& report);

}  // namespace memagent
