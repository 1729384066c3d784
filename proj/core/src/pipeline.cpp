#include "vleu/pipeline.hpp"

#include <cerrno>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "vleu/digest.hpp"
#include "vleu/records.hpp"

namespace vleu {

namespace fs = std::filesystem;
using nlohmann::json;

namespace files {
constexpr const char* config = "config.json";
constexpr const char* corpus = "corpus.jsonl";
constexpr const char* text_embeddings = "text_embeddings.jsonl";
constexpr const char* manifest = "manifest.jsonl";
constexpr const char* image_embeddings = "image_embeddings.jsonl";
constexpr const char* matrix = "matrix.json";
constexpr const char* report = "report.json";
constexpr const char* lock = "run.lock";
}  // namespace files

namespace {

bool is_url(const std::string& s) {
  return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0;
}

std::string_view to_string(FailurePolicy p) { return p == FailurePolicy::abort ? "abort" : "skip"; }

FailurePolicy policy_from_string(const std::string& s) {
  if (s == "abort") return FailurePolicy::abort;
  if (s == "skip") return FailurePolicy::skip;
  throw Error(ErrorCode::configuration, "unknown failure policy: " + s);
}

std::string_view to_string(ScorerKind k) { return k == ScorerKind::file ? "file" : "http"; }

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

}  // namespace

void validate(const RunConfig& config) {
  if (!(config.temperature > 0.0)) {
    throw Error(ErrorCode::invalid_temperature, "temperature must be positive");
  }
  validate(config.sampler);
  validate(config.prompt_template);
  if (config.parallelism < 1) throw Error(ErrorCode::configuration, "parallelism must be >= 1");
  if (config.scorer.batch_size < 1) throw Error(ErrorCode::configuration, "batch size must be >= 1");
}

json config_to_json(const RunConfig& c) {
  json seeds = json::array();
  for (const auto& s : c.sampler.seed_dialogue) seeds.push_back({{"user", s.user}, {"assistant", s.assistant}});
  json sampler{{"num", c.sampler.num},
               {"step", c.sampler.step},
               {"include_keyword", c.sampler.include_keyword},
               {"keyword_case_insensitive", c.sampler.keyword_case_insensitive},
               {"max_keyword_retries", c.sampler.max_keyword_retries},
               {"transport_retries", c.sampler.transport_retries},
               {"backend_id", c.sampler.backend_id},
               {"seed_dialogue", seeds},
               {"parallelism", c.sampler.parallelism}};
  if (c.sampler.chat_temperature) sampler["chat_temperature"] = *c.sampler.chat_temperature;
  return json{{"sampler", sampler},
              {"template", c.prompt_template},
              {"chat_backend", c.chat_backend},
              {"chat_model", c.chat_model},
              {"prompts_path", c.prompts_path},
              {"t2i_backend", c.t2i_backend},
              {"scorer",
               {{"kind", to_string(c.scorer.kind)},
                {"model", c.scorer.model},
                {"endpoint", c.scorer.endpoint},
                {"batch_size", c.scorer.batch_size}}},
              {"temperature", c.temperature},
              {"failure_policy", to_string(c.failure_policy)},
              {"checkpoint_tag", c.checkpoint_tag},
              {"random_seeds", c.random_seeds},
              {"parallelism", c.parallelism}};
}

RunConfig config_from_json(const json& doc) {
  RunConfig c;
  try {
    if (doc.contains("sampler")) {
      const auto& s = doc.at("sampler");
      c.sampler.num = s.value("num", c.sampler.num);
      c.sampler.step = s.value("step", c.sampler.step);
      c.sampler.include_keyword = s.value("include_keyword", c.sampler.include_keyword);
      c.sampler.keyword_case_insensitive =
          s.value("keyword_case_insensitive", c.sampler.keyword_case_insensitive);
      c.sampler.max_keyword_retries = s.value("max_keyword_retries", c.sampler.max_keyword_retries);
      c.sampler.transport_retries = s.value("transport_retries", c.sampler.transport_retries);
      c.sampler.backend_id = s.value("backend_id", c.sampler.backend_id);
      c.sampler.parallelism = s.value("parallelism", c.sampler.parallelism);
      if (s.contains("chat_temperature")) c.sampler.chat_temperature = s.at("chat_temperature").get<double>();
      for (const auto& turn : s.value("seed_dialogue", json::array())) {
        c.sampler.seed_dialogue.push_back({turn.at("user").get<std::string>(),
                                           turn.at("assistant").get<std::string>()});
      }
    }
    if (doc.contains("template")) c.prompt_template = doc.at("template").get<PromptTemplate>();
    c.chat_backend = doc.value("chat_backend", c.chat_backend);
    c.chat_model = doc.value("chat_model", c.chat_model);
    c.prompts_path = doc.value("prompts_path", c.prompts_path);
    c.t2i_backend = doc.value("t2i_backend", c.t2i_backend);
    if (doc.contains("scorer")) {
      const auto& s = doc.at("scorer");
      const std::string kind = s.value("kind", std::string("file"));
      if (kind != "file" && kind != "http") throw Error(ErrorCode::configuration, "unknown scorer kind: " + kind);
      c.scorer.kind = kind == "file" ? ScorerKind::file : ScorerKind::http;
      c.scorer.model = s.value("model", c.scorer.model);
      c.scorer.endpoint = s.value("endpoint", c.scorer.endpoint);
      c.scorer.batch_size = s.value("batch_size", c.scorer.batch_size);
    }
    c.temperature = doc.value("temperature", c.temperature);
    c.failure_policy = policy_from_string(doc.value("failure_policy", std::string("abort")));
    c.checkpoint_tag = doc.value("checkpoint_tag", c.checkpoint_tag);
    c.random_seeds = doc.value("random_seeds", c.random_seeds);
    c.parallelism = doc.value("parallelism", c.parallelism);
    if (doc.contains("run_dir")) c.run_dir = doc.at("run_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::configuration, std::string("bad run configuration: ") + e.what());
  }
  return c;
}

std::string config_fingerprint(const RunConfig& config) {
  return sha256_hex(config_to_json(config).dump());
}

std::unique_ptr<ChatBackend> make_chat_backend(const std::string& descriptor,
                                               const std::string& model) {
  if (descriptor.empty()) return nullptr;
  if (descriptor.rfind("scripted:", 0) == 0) {
    return std::make_unique<ScriptedChatBackend>(
        ScriptedChatBackend::from_file(descriptor.substr(9)));
  }
  if (descriptor == "counter" || descriptor.rfind("counter:", 0) == 0) {
    const std::string prefix = descriptor.size() > 8 ? descriptor.substr(8) : "reply-";
    return std::make_unique<ScriptedChatBackend>(ScriptedChatBackend::counter(prefix));
  }
  if (is_url(descriptor)) {
    HttpChatConfig http;
    http.base_url = descriptor;
    http.model = model;
    return std::make_unique<HttpChatBackend>(std::move(http));
  }
  throw Error(ErrorCode::configuration, "unrecognized chat backend: " + descriptor);
}

std::unique_ptr<GenerationBackend> make_generation_backend(const std::string& descriptor,
                                                           const fs::path& image_dir) {
  if (descriptor.empty()) return nullptr;
  if (is_url(descriptor)) {
    return std::make_unique<HttpGenerationBackend>(HttpGenerationConfig{descriptor, image_dir});
  }
  return std::make_unique<DirectoryGenerationBackend>(descriptor);
}

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const ScorerDescriptor& scorer) {
  if (scorer.endpoint.empty()) return nullptr;
  if (scorer.kind == ScorerKind::http) {
    HttpEmbeddingConfig http;
    http.base_url = scorer.endpoint;
    http.model = scorer.model;
    return std::make_unique<HttpEmbeddingBackend>(std::move(http));
  }
  return std::make_unique<FileEmbeddingBackend>(fs::path(scorer.endpoint));
}

OwnedBackends OwnedBackends::from_config(const RunConfig& config) {
  OwnedBackends owned;
  owned.chat_ = make_chat_backend(config.chat_backend, config.chat_model);
  owned.generation_ = make_generation_backend(config.t2i_backend, config.run_dir / "images");
  owned.embedding_ = make_embedding_backend(config.scorer);
  return owned;
}

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / files::lock) {
  fs::create_directories(run_dir);
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (!f) {
    if (errno == EEXIST) {
      throw Error(ErrorCode::locked, "run directory " + run_dir.string() + " is locked by another writer");
    }
    throw Error(ErrorCode::io, "cannot create " + path_.string());
  }
  std::fclose(f);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

std::vector<SampledPrompt> obtain_corpus(const RunConfig& config, ChatBackend* chat,
                                         const fs::path& corpus_file) {
  std::vector<SampledPrompt> corpus;
  if (!corpus_file.empty() && fs::exists(corpus_file)) {
    corpus = read_jsonl<SampledPrompt>(corpus_file);
  } else if (!config.prompts_path.empty()) {
    corpus = read_jsonl<SampledPrompt>(config.prompts_path);
  } else {
    if (!chat) throw Error(ErrorCode::configuration, "no chat backend and no existing corpus");
    corpus = sample_prompts(config.sampler, config.prompt_template, *chat);
  }
  if (corpus.empty()) throw Error(ErrorCode::empty_input, "prompt corpus is empty");

  std::set<std::size_t> ids;
  std::set<std::string> texts;
  for (const auto& p : corpus) {
    if (!ids.insert(p.id).second) {
      throw Error(ErrorCode::invalid_input, "duplicate prompt id " + std::to_string(p.id));
    }
    if (!texts.insert(p.text).second) {
      spdlog::warn("duplicate prompt text kept as a separate row (id {}): {}", p.id, p.text);
    }
  }
  if (!corpus_file.empty() && !fs::exists(corpus_file)) write_jsonl(corpus_file, corpus);
  return corpus;
}

std::vector<ImageArtifact> obtain_images(std::span<const SampledPrompt> corpus,
                                         GenerationBackend* backend,
                                         const GenerationOptions& options,
                                         const fs::path& manifest_file) {
  std::vector<ImageArtifact> cached;
  if (!manifest_file.empty() && fs::exists(manifest_file)) {
    cached = read_jsonl<ImageArtifact>(manifest_file);
  }
  GenerationOptions opts = options;
  opts.cache = cached;

  std::set<std::size_t> have;
  for (const auto& a : cached) {
    if (a.checkpoint_tag == options.checkpoint_tag && fs::exists(a.image_ref)) have.insert(a.prompt_id);
  }
  bool complete = true;
  for (const auto& p : corpus) complete = complete && have.count(p.id) > 0;

  GenerationResult result;
  if (complete) {
    // Everything is cached; the backend is never touched.
    struct NoBackend final : GenerationBackend {
      std::string generate(const GenerationRequest&) override {
        throw Error(ErrorCode::generation, "unexpected backend call");
      }
      std::string descriptor() const override { return "cache"; }
    } none;
    result = generate_images(corpus, none, opts);
  } else {
    if (!backend) throw Error(ErrorCode::configuration, "no generation backend configured");
    result = generate_images(corpus, *backend, opts);
  }
  for (auto id : result.skipped) spdlog::warn("image generation skipped for prompt {}", id);
  if (!manifest_file.empty()) write_jsonl(manifest_file, result.artifacts);
  return result.artifacts;
}

std::vector<EmbeddingRequest> text_requests(std::span<const SampledPrompt> corpus) {
  std::vector<EmbeddingRequest> out;
  for (const auto& p : corpus) out.push_back({std::to_string(p.id), EmbeddingKind::text, p.text});
  return out;
}

std::vector<EmbeddingRequest> image_requests(std::span<const ImageArtifact> artifacts) {
  std::vector<EmbeddingRequest> out;
  for (const auto& a : artifacts) out.push_back({image_id(a), EmbeddingKind::image, a.image_ref});
  return out;
}

std::vector<Embedding> obtain_embeddings(std::span<const EmbeddingRequest> requests,
                                         EmbeddingBackend* backend, std::size_t batch_size,
                                         const fs::path& store_file) {
  std::map<std::pair<EmbeddingKind, std::string>, Embedding> known;
  if (!store_file.empty() && fs::exists(store_file)) {
    for (auto& e : read_jsonl<Embedding>(store_file)) {
      auto key = std::make_pair(e.kind, e.id);
      known.insert_or_assign(std::move(key), std::move(e));
    }
  }
  std::vector<EmbeddingRequest> missing;
  for (const auto& r : requests) {
    if (!known.count({r.kind, r.id})) missing.push_back(r);
  }
  if (!missing.empty()) {
    if (!backend) throw Error(ErrorCode::configuration, "no embedding backend configured");
    for (auto& e : embed_all(*backend, missing, batch_size)) {
      auto key = std::make_pair(e.kind, e.id);
      known.insert_or_assign(std::move(key), std::move(e));
    }
  }
  std::vector<Embedding> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back(known.at({r.kind, r.id}));
  if (!store_file.empty() && (!missing.empty() || !fs::exists(store_file))) write_jsonl(store_file, out);
  return out;
}

namespace {

struct CheckpointInputs {
  const RunConfig& config;
  std::span<const SampledPrompt> corpus;
  std::span<const Embedding> texts;
  std::string tag;
  fs::path dir;
};

VleuReport evaluate_checkpoint(const CheckpointInputs& in, const Backends& backends) {
  RunConfig effective = in.config;
  effective.checkpoint_tag = in.tag;

  GenerationOptions gen;
  gen.policy = in.config.failure_policy;
  gen.checkpoint_tag = in.tag;
  gen.random_seeds = in.config.random_seeds;
  gen.parallelism = in.config.parallelism;
  auto artifacts = stage("generate", [&] {
    return obtain_images(in.corpus, backends.generation, gen, in.dir / files::manifest);
  });
  if (artifacts.empty()) {
    throw StageError("generate", Error(ErrorCode::empty_input, "no images were produced"));
  }

  auto images = stage("embed", [&] {
    const auto requests = image_requests(artifacts);
    return obtain_embeddings(requests, backends.embedding, in.config.scorer.batch_size,
                             in.dir / files::image_embeddings);
  });

  // Under the skip policy, prompts without an image are dropped from both axes
  // so each column keeps its own prompt in the corpus.
  std::vector<Embedding> texts;
  {
    std::set<std::size_t> kept;
    for (const auto& a : artifacts) kept.insert(a.prompt_id);
    for (std::size_t k = 0; k < in.corpus.size(); ++k) {
      if (kept.count(in.corpus[k].id)) texts.push_back(in.texts[k]);
    }
  }

  auto matrix = stage("score", [&] { return build_similarity_matrix(texts, images); });
  MatrixProvenance meta{images.front().model, in.corpus.front().sampler_model};
  write_json_file(in.dir / files::matrix, matrix_to_json(matrix, meta));

  auto report = stage("vleu", [&] {
    return vleu_score(matrix, in.config.temperature, config_fingerprint(effective));
  });
  json doc = report_to_json(report);
  doc["config"] = config_to_json(effective);
  doc["scorer_model"] = meta.scorer_model;
  doc["sampler_model"] = meta.sampler_model;
  write_json_file(in.dir / files::report, doc);
  return report;
}

}  // namespace

VleuReport run_evaluation(const RunConfig& config, const Backends& backends) {
  stage("config", [&] { validate(config); return 0; });
  if (config.run_dir.empty()) {
    throw StageError("config", Error(ErrorCode::configuration, "run directory not set"));
  }
  RunLock lock(config.run_dir);
  write_json_file(config.run_dir / files::config, config_to_json(config));

  auto corpus = stage("sample", [&] {
    return obtain_corpus(config, backends.chat, config.run_dir / files::corpus);
  });
  auto texts = stage("embed", [&] {
    const auto requests = text_requests(corpus);
    return obtain_embeddings(requests, backends.embedding, config.scorer.batch_size,
                             config.run_dir / files::text_embeddings);
  });
  return evaluate_checkpoint({config, corpus, texts, config.checkpoint_tag, config.run_dir},
                             backends);
}

VleuReport run_evaluation(const RunConfig& config) {
  auto owned = OwnedBackends::from_config(config);
  return run_evaluation(config, owned.view());
}

VleuReport rescore_run(const fs::path& run_dir) {
  const auto matrix = matrix_from_json(read_json_file(run_dir / files::matrix));
  const auto report_doc = read_json_file(run_dir / files::report);
  const double t = report_doc.at("temperature").get<double>();
  return vleu_score(matrix, t, report_doc.value("config_fingerprint", std::string{}));
}

std::string SweepSeries::to_table() const {
  std::ostringstream out;
  out << "checkpoint\tstep\tvleu\tn_texts\n";
  for (const auto& p : points) {
    out << p.checkpoint_tag << '\t' << p.step_index << '\t';
    if (p.report) {
      out << json(p.report->vleu).dump() << '\t' << p.report->n_texts << '\n';
    } else {
      out << "error\t-\n";
    }
  }
  return out.str();
}

SweepSeries checkpoint_sweep(const RunConfig& config, std::span<const std::string> checkpoints,
                             const Backends& backends, std::span<const std::size_t> step_indices,
                             std::size_t cadence) {
  stage("config", [&] { validate(config); return 0; });
  if (checkpoints.empty()) {
    throw StageError("config", Error(ErrorCode::configuration, "sweep needs at least one checkpoint"));
  }
  if (!step_indices.empty() && step_indices.size() != checkpoints.size()) {
    throw StageError("config", Error(ErrorCode::configuration, "one step index per checkpoint required"));
  }
  for (std::size_t k = 1; k < step_indices.size(); ++k) {
    if (step_indices[k] <= step_indices[k - 1]) {
      throw StageError("config", Error(ErrorCode::configuration, "step indices must increase strictly"));
    }
  }
  if (config.run_dir.empty()) {
    throw StageError("config", Error(ErrorCode::configuration, "run directory not set"));
  }

  RunLock lock(config.run_dir);
  write_json_file(config.run_dir / files::config, config_to_json(config));
  auto corpus = stage("sample", [&] {
    return obtain_corpus(config, backends.chat, config.run_dir / files::corpus);
  });
  auto texts = stage("embed", [&] {
    const auto requests = text_requests(corpus);
    return obtain_embeddings(requests, backends.embedding, config.scorer.batch_size,
                             config.run_dir / files::text_embeddings);
  });

  SweepSeries series;
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    SweepPoint point;
    point.checkpoint_tag = checkpoints[k];
    point.step_index = step_indices.empty() ? k * cadence : step_indices[k];
    const fs::path dir = config.run_dir / "checkpoints" / checkpoints[k];
    try {
      point.report = evaluate_checkpoint({config, corpus, texts, checkpoints[k], dir}, backends);
    } catch (const Error& e) {
      if (config.failure_policy == FailurePolicy::abort) throw;
      spdlog::warn("checkpoint {} failed: {}", checkpoints[k], e.what());
      point.error = e.what();
    }
    series.points.push_back(std::move(point));
  }
  write_text_file(config.run_dir / "sweep.tsv", series.to_table());
  return series;
}

}  // namespace vleu
