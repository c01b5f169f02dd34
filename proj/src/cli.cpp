#include "memagent/cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "memagent/eval.hpp"
#include "memagent/http_api.hpp"
#include "memagent/service.hpp"
#include "memagent/text.hpp"

namespace memagent {
namespace {

using nlohmann::json;

HttpApi* g_running_api = nullptr;

extern "C" void handle_stop_signal(int) {
  if (g_running_api) g_running_api->stop();
}

struct GlobalFlags {
  std::string config_path;
  bool offline = false;
  std::string store;
};

AppConfig resolve_config(const GlobalFlags& flags) {
  auto config = load_config(flags.config_path.empty() ? std::nullopt
                                                      : std::optional<std::filesystem::path>(flags.config_path));
  if (flags.offline) config.offline = true;
  if (!flags.store.empty()) config.store_path = flags.store;
  config.validate();
  return config;
}

// Per-video memories for evaluation: <dir>/<video>.store, else a caption
// fixture <dir>/<video>.captions.jsonl ingested into a throwaway store.
class MemoryDirectory {
 public:
  MemoryDirectory(std::filesystem::path dir, const AppConfig& config, EmbeddingProvider& embedder)
      : dir_(std::move(dir)), config_(config), embedder_(embedder) {}

  std::shared_ptr<const VectorStore> get(const std::string& video_id) {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(video_id); it != cache_.end()) return it->second;
    std::shared_ptr<VectorStore> store;
    const auto store_file = dir_ / (video_id + ".store");
    const auto fixture = dir_ / (video_id + ".captions.jsonl");
    if (std::filesystem::exists(store_file)) {
      store = std::make_shared<VectorStore>(VectorStore::load(store_file));
    } else if (std::filesystem::exists(fixture)) {
      store = std::make_shared<VectorStore>(embedder_.dim());
      const auto captions = load_caption_fixture(fixture);
      ingest_into_store(*store, embedder_, captions, config_.chunker);
    }
    cache_[video_id] = store;
    return store;
  }

 private:
  std::filesystem::path dir_;
  const AppConfig& config_;
  EmbeddingProvider& embedder_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<VectorStore>> cache_;
};

int cmd_ingest(const GlobalFlags& flags, const std::string& source, bool as_json, std::ostream& out) {
  MemoryService service(resolve_config(flags));
  const auto summary = service.ingest_source(source);
  if (as_json) {
    out << summary_to_json(summary).dump(2) << '\n';
  } else {
    out << "frames:   " << summary.frames << '\n'
        << "captions: " << summary.captions << '\n'
        << "chunks:   " << summary.chunks << '\n'
        << "failures: " << summary.failures.size() << '\n'
        << "status:   " << (summary.status == PipelineStatus::ok ? "ok" : "degraded") << '\n';
  }
  return 0;
}

MemoryQuery make_query(const std::string& question, std::size_t k, const std::string& video_id) {
  MemoryQuery q;
  q.question = question;
  q.k = k;
  if (!video_id.empty()) q.filter.video_id = video_id;
  q.validate();
  return q;
}

int cmd_ask(const GlobalFlags& flags, const std::string& question, std::size_t k, const std::string& video_id,
            bool as_json, std::ostream& out) {
  if (trim(question).empty()) throw ArgumentError("question must be non-empty");
  MemoryService service(resolve_config(flags));
  const auto a = service.ask(make_query(question, k == 0 ? service.config().retrieval.k : k, video_id));
  if (as_json) {
    out << answer_to_json(a).dump() << '\n';
  } else {
    out << render_answer(a);
  }
  return 0;
}

int cmd_repl(const GlobalFlags& flags, std::size_t k, std::istream& in, std::ostream& out, std::ostream& err) {
  MemoryService service(resolve_config(flags));
  const std::size_t top_k = k == 0 ? service.config().retrieval.k : k;
  std::string line;
  while (std::getline(in, line)) {
    const auto question = trim(line);
    if (question.empty()) continue;
    if (question == ":quit" || question == ":q") break;
    try {
      out << render_answer(service.ask(make_query(question, top_k, ""))) << '\n';
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
    }
    out.flush();
  }
  return 0;
}

int cmd_eval(const GlobalFlags& flags, const std::string& dataset_path, const std::string& memories,
             const std::string& out_prefix, const std::string& format, bool identity_agent, std::size_t workers,
             std::size_t k, std::ostream& out) {
  const auto config = resolve_config(flags);
  const auto samples = load_dataset(dataset_path);
  auto embedder = make_embedding_provider(config.embedding);
  auto chat = make_chat_provider(config.chat);
  MemoryDirectory memory_dir(memories, config, *embedder);
  AnswerOptions options{config.retrieval.prompt_template, config.retrieval.context_budget_tokens};
  const std::size_t top_k = k == 0 ? config.retrieval.k : k;

  AgentFn agent;
  if (identity_agent) {
    agent = [](const QASample& s) { return s.gold_answer; };
  } else {
    agent = [&](const QASample& s) {
      auto store = memory_dir.get(s.video_id);
      if (!store) throw Error("no memory for video " + s.video_id);
      MemoryQuery q;
      q.question = s.question;
      q.k = top_k;
      return answer(q, *store, *embedder, chat.get(), options).text;
    };
  }
  const auto report = run_emqa(agent, samples, {workers});
  const auto text = report_to_text(report);
  if (format == "json" || format == "both") {
    std::ofstream f(out_prefix + ".json");
    if (!f) throw SourceError("cannot write " + out_prefix + ".json");
    f << report_to_json(report).dump(2) << '\n';
  }
  if (format == "text" || format == "both") {
    std::ofstream f(out_prefix + ".txt");
    if (!f) throw SourceError("cannot write " + out_prefix + ".txt");
    f << text;
  }
  out << text;
  return 0;
}

int cmd_serve(const GlobalFlags& flags, const std::string& host, int port, std::ostream& out) {
  auto config = resolve_config(flags);
  if (!host.empty()) config.server.host = host;
  if (port >= 0) config.server.port = port;
  MemoryService service(config);
  HttpApi api(service);
  const int bound = api.bind(config.server.host, config.server.port);
  out << "listening on http://" << config.server.host << ':' << bound << std::endl;
  g_running_api = &api;
  std::signal(SIGINT, handle_stop_signal);
  std::signal(SIGTERM, handle_stop_signal);
  api.listen();
  g_running_api = nullptr;
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  static std::once_flag logger_once;
  std::call_once(logger_once, [] { spdlog::set_default_logger(spdlog::stderr_color_mt("memagent")); });

  CLI::App app{"Episodic memory agent: ingest captions, ask questions, evaluate EMQA", "memagent"};
  app.require_subcommand(1);
  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_flag("--offline", flags.offline, "Stub captioner, hashed embeddings, extractive answers only");
  app.add_option("--store", flags.store, "Memory store file");

  std::string source;
  bool ingest_json = false;
  auto* ingest = app.add_subcommand("ingest", "Encode, chunk, embed and store a frame manifest/directory or caption fixture");
  ingest->add_option("source", source, "Frame manifest, frame directory or caption fixture")->required();
  ingest->add_flag("--json", ingest_json, "Print the summary as JSON");

  std::string question;
  std::size_t k = 0;
  std::string video_id;
  bool ask_json = false;
  auto* ask = app.add_subcommand("ask", "Answer one question from memory");
  ask->add_option("question", question, "Question text")->required();
  ask->add_option("-k,--top-k", k, "Number of chunks to retrieve");
  ask->add_option("--video-id", video_id, "Only search this video's memory");
  ask->add_flag("--json", ask_json, "Print the answer as JSON");

  auto* repl = app.add_subcommand("repl", "Interactive question loop; :quit exits");
  repl->add_option("-k,--top-k", k, "Number of chunks to retrieve");

  std::string dataset;
  std::string memories = ".";
  std::string out_prefix = "emqa_report";
  std::string format = "both";
  bool identity = false;
  std::size_t workers = 1;
  auto* eval = app.add_subcommand("eval", "Run the EMQA harness over a dataset");
  eval->add_option("dataset", dataset, "Dataset JSON-lines file")->required();
  eval->add_option("--memories", memories, "Directory of <video_id>.store or <video_id>.captions.jsonl");
  eval->add_option("--out", out_prefix, "Report path prefix (.json / .txt appended)");
  eval->add_option("--format", format, "Report files to write")->check(CLI::IsMember({"json", "text", "both"}));
  eval->add_flag("--identity-agent", identity, "Debug: answer with the gold answer");
  eval->add_option("--workers", workers, "Samples evaluated in parallel")->check(CLI::PositiveNumber);
  eval->add_option("-k,--top-k", k, "Number of chunks to retrieve");

  std::string host;
  int port = -1;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API and console");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)");

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.emplace_back("memagent");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*ingest) return cmd_ingest(flags, source, ingest_json, out);
    if (*ask) return cmd_ask(flags, question, k, video_id, ask_json, out);
    if (*repl) return cmd_repl(flags, k, in, out, err);
    if (*eval) return cmd_eval(flags, dataset, memories, out_prefix, format, identity, workers, k, out);
    if (*serve) return cmd_serve(flags, host, port, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace memagent
