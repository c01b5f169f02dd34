#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "memagent/capture.hpp"
#include "memagent/chunker.hpp"
#include "memagent/embedding.hpp"
#include "memagent/metrics.hpp"
#include "memagent/service.hpp"
#include "memagent/text.hpp"
#include "memagent/vector_store.hpp"

namespace py = pybind11;
using namespace memagent;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

EmbeddingVector as_vector(const std::vector<float>& values) { return EmbeddingVector::normalized(values); }

std::vector<float> as_list(const EmbeddingVector& v) { return {v.values().begin(), v.values().end()}; }

py::dict hit_to_dict(const QueryHit& h) {
  py::dict d;
  d["chunk_id"] = h.chunk_id;
  d["score"] = h.score;
  d["text"] = h.chunk.text;
  d["video_id"] = h.chunk.metadata.video_id;
  d["t_start_s"] = h.chunk.metadata.t_start_s;
  d["t_end_s"] = h.chunk.metadata.t_end_s;
  return d;
}

// Thin owner for a MemoryService; the GIL is released around blocking work.
class Memory {
 public:
  Memory(std::optional<std::filesystem::path> store_path, bool offline) {
    AppConfig config;
    config.offline = offline;
    config.store_path = store_path.value_or(std::filesystem::path());
    service_ = std::make_unique<MemoryService>(config);
  }

  py::object ingest(const std::filesystem::path& source) {
    IngestSummary s;
    {
      py::gil_scoped_release release;
      s = service_->ingest_source(source);
    }
    return to_python(summary_to_json(s));
  }

  py::object ingest_captions(const std::vector<CaptionRecord>& captions, bool flush) {
    IngestSummary s;
    {
      py::gil_scoped_release release;
      s = service_->ingest_captions(captions, flush);
    }
    return to_python(summary_to_json(s));
  }

  py::object ask(const std::string& question, std::size_t k, std::optional<std::string> video_id) {
    MemoryQuery q;
    q.question = question;
    q.k = k;
    q.filter.video_id = std::move(video_id);
    Answer a;
    {
      py::gil_scoped_release release;
      a = service_->ask(q);
    }
    return to_python(answer_to_json(a));
  }

  std::string render(const std::string& question, std::size_t k) {
    MemoryQuery q;
    q.question = question;
    q.k = k;
    py::gil_scoped_release release;
    return render_answer(service_->ask(q));
  }

  py::object stats() const { return to_python(stats_to_json(service_->stats())); }

 private:
  std::unique_ptr<MemoryService> service_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Episodic-memory QA core";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<ArgumentError>(m, "ArgumentError", error);
  py::register_exception<SourceError>(m, "SourceError", error);
  py::register_exception<FormatError>(m, "FormatError", error);
  py::register_exception<ConfigError>(m, "ConfigError", error);
  py::register_exception<ProviderError>(m, "ProviderError", error);

  m.def("tokenize", &tokenize, py::arg("text"));
  m.def("normalized_words", &normalized_words, py::arg("text"));

  py::class_<CaptionRecord>(m, "CaptionRecord")
      .def(py::init([](std::string video_id, std::uint64_t frame_index, double timestamp_s, std::string text,
                       std::string encoder_id) {
             return CaptionRecord{std::move(video_id), frame_index, timestamp_s, std::move(text), std::move(encoder_id)};
           }),
           py::arg("video_id"), py::arg("frame_index"), py::arg("timestamp_s"), py::arg("text"),
           py::arg("encoder_id") = "python")
      .def_readwrite("video_id", &CaptionRecord::video_id)
      .def_readwrite("frame_index", &CaptionRecord::frame_index)
      .def_readwrite("timestamp_s", &CaptionRecord::timestamp_s)
      .def_readwrite("text", &CaptionRecord::text)
      .def_readwrite("encoder_id", &CaptionRecord::encoder_id)
      .def("__eq__", [](const CaptionRecord& a, const CaptionRecord& b) { return a == b; })
      .def("__repr__", [](const CaptionRecord& r) {
        return "CaptionRecord(" + r.video_id + ", " + std::to_string(r.frame_index) + ", " + r.text + ")";
      });

  m.def("load_caption_fixture", &load_caption_fixture, py::arg("path"));

  py::class_<ChunkMetadata>(m, "ChunkMetadata")
      .def_readonly("video_id", &ChunkMetadata::video_id)
      .def_readonly("t_start_s", &ChunkMetadata::t_start_s)
      .def_readonly("t_end_s", &ChunkMetadata::t_end_s)
      .def_readonly("chunk_index", &ChunkMetadata::chunk_index)
      .def_readonly("first_frame", &ChunkMetadata::first_frame)
      .def_readonly("last_frame", &ChunkMetadata::last_frame)
      .def_readonly("token_offset", &ChunkMetadata::token_offset);

  py::class_<Chunk>(m, "Chunk")
      .def_readonly("chunk_id", &Chunk::chunk_id)
      .def_readonly("text", &Chunk::text)
      .def_readonly("token_count", &Chunk::token_count)
      .def_readonly("metadata", &Chunk::metadata);

  m.def(
      "window_count",
      [](std::size_t n, std::size_t chunk_size, std::size_t overlap) {
        ChunkerConfig cfg{chunk_size, overlap};
        cfg.validate();
        return window_count(n, cfg);
      },
      py::arg("n_tokens"), py::arg("chunk_size") = 1024, py::arg("overlap") = 256);
  m.def(
      "chunk_captions",
      [](const std::vector<CaptionRecord>& captions, std::size_t chunk_size, std::size_t overlap, std::size_t min_chars) {
        ChunkerConfig cfg{chunk_size, overlap, min_chars};
        cfg.validate();
        return chunk_stream(captions, cfg);
      },
      py::arg("captions"), py::arg("chunk_size") = 1024, py::arg("overlap") = 256, py::arg("min_chars") = 5);

  py::class_<HashedBowEmbedder>(m, "HashedBowEmbedder")
      .def(py::init<std::size_t, std::uint64_t>(), py::arg("dim") = 256, py::arg("seed") = 0)
      .def_property_readonly("dim", [](HashedBowEmbedder& e) { return e.dim(); })
      .def("embed", [](HashedBowEmbedder& e, const std::string& text) { return as_list(embed(text, e)); }, py::arg("text"));

  py::class_<VectorStore>(m, "VectorStore")
      .def(py::init<std::size_t>(), py::arg("dim"))
      .def_property_readonly("dim", &VectorStore::dim)
      .def("__len__", &VectorStore::size)
      .def(
          "upsert",
          [](VectorStore& s, const std::vector<float>& vector, const std::string& text, const std::string& video_id,
             double t_start_s, double t_end_s, std::int64_t chunk_id) {
            Chunk c;
            c.chunk_id = chunk_id;
            c.text = text;
            c.token_count = tokenize(text).size();
            c.metadata.video_id = video_id;
            c.metadata.t_start_s = t_start_s;
            c.metadata.t_end_s = t_end_s;
            return s.upsert({std::move(c), as_vector(vector)});
          },
          py::arg("vector"), py::arg("text"), py::arg("video_id") = "", py::arg("t_start_s") = 0.0,
          py::arg("t_end_s") = 0.0, py::arg("chunk_id") = -1)
      .def(
          "query",
          [](const VectorStore& s, const std::vector<float>& vector, std::size_t k, std::optional<std::string> video_id) {
            MetadataFilter f;
            f.video_id = std::move(video_id);
            std::vector<QueryHit> hits;
            {
              py::gil_scoped_release release;
              hits = s.query(as_vector(vector), k, f);
            }
            py::list out;
            for (const auto& h : hits) out.append(hit_to_dict(h));
            return out;
          },
          py::arg("vector"), py::arg("k") = 10, py::arg("video_id") = py::none())
      .def("chunks", &VectorStore::chunks)
      .def("persist", &VectorStore::persist, py::arg("path"))
      .def_static("load", &VectorStore::load, py::arg("path"));

  m.def(
      "bleu4", [](const std::vector<std::string>& c, const std::vector<std::string>& r) { return bleu4(c, r); },
      py::arg("candidates"), py::arg("references"));
  m.def("sentence_bleu4", &sentence_bleu4, py::arg("candidate"), py::arg("reference"));
  m.def("meteor", &meteor, py::arg("candidate"), py::arg("reference"));
  m.def("rouge_l_f", &rouge_l_f, py::arg("candidate"), py::arg("reference"));
  m.def("porter_stem", &porter_stem, py::arg("word"));

  py::class_<Memory>(m, "Memory")
      .def(py::init<std::optional<std::filesystem::path>, bool>(), py::arg("store_path") = py::none(),
           py::arg("offline") = true)
      .def("ingest", &Memory::ingest, py::arg("source"))
      .def("ingest_captions", &Memory::ingest_captions, py::arg("captions"), py::arg("flush") = true)
      .def("ask", &Memory::ask, py::arg("question"), py::arg("k") = 0, py::arg("video_id") = py::none())
      .def("render", &Memory::render, py::arg("question"), py::arg("k") = 0)
      .def("stats", &Memory::stats);
}
