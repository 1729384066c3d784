#pragma once

/**
 * @file pipeline.hpp
 * @brief sample -> generate -> embed -> score -> VLEU, with a cached run directory.
 *
 * Run directory layout:
 *
 *     config.json              run configuration (without run_dir)
 *     corpus.jsonl             SampledPrompt records
 *     text_embeddings.jsonl    Embedding records, kind = text
 *     manifest.jsonl           ImageArtifact records
 *     image_embeddings.jsonl   Embedding records, kind = image
 *     matrix.json              similarity matrix with ids and provenance
 *     report.json              VleuReport plus the configuration it came from
 *     checkpoints/<tag>/...    per-checkpoint manifest/embeddings/matrix/report (sweeps)
 *
 * Every stage reuses what is already on disk, so rerunning a finished run
 * issues no backend calls. Nothing time-dependent is written, which keeps two
 * runs over the same inputs byte-identical.
 */

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vleu/chat_backend.hpp"
#include "vleu/embedding_backend.hpp"
#include "vleu/error.hpp"
#include "vleu/generation.hpp"
#include "vleu/metric.hpp"
#include "vleu/sampler.hpp"

namespace vleu {

/// Prompt-count presets: finetuning drift and cross-model comparison.
inline constexpr std::size_t kDriftPromptCount = 25;
inline constexpr std::size_t kComparisonPromptCount = 1000;
/// Checkpoint spacing used when a finetune hook drives a sweep.
inline constexpr std::size_t kSweepCadence = 20;

struct RunConfig {
  SamplerConfig sampler;
  PromptTemplate prompt_template;
  /// "scripted:<file>", "counter[:<prefix>]" or an http(s) base URL.
  std::string chat_backend;
  std::string chat_model = "gpt-3.5-turbo";
  /// Existing corpus to use instead of sampling.
  std::string prompts_path;
  /// http(s) URL, or a directory / path template with {id} and {tag}.
  std::string t2i_backend;
  ScorerDescriptor scorer;
  double temperature = kDefaultTemperature;
  std::filesystem::path run_dir;
  FailurePolicy failure_policy = FailurePolicy::abort;
  std::string checkpoint_tag;
  bool random_seeds = false;
  std::size_t parallelism = 1;
};

void validate(const RunConfig& config);

/// run_dir is left out: it says where a run lives, not what it computes.
nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& doc);
std::string config_fingerprint(const RunConfig& config);

/// Error raised by a pipeline stage; the stage name prefixes the message.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), stage + ": " + cause.what()), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Non-owning view of the backends a run talks to. Any may be null when the
/// corresponding stage is fully cached.
struct Backends {
  ChatBackend* chat = nullptr;
  GenerationBackend* generation = nullptr;
  EmbeddingBackend* embedding = nullptr;
};

/// Backends built from the descriptors in a RunConfig.
class OwnedBackends {
 public:
  static OwnedBackends from_config(const RunConfig& config);

  Backends view() const { return {chat_.get(), generation_.get(), embedding_.get()}; }

 private:
  std::unique_ptr<ChatBackend> chat_;
  std::unique_ptr<GenerationBackend> generation_;
  std::unique_ptr<EmbeddingBackend> embedding_;
};

std::unique_ptr<ChatBackend> make_chat_backend(const std::string& descriptor,
                                               const std::string& model);
std::unique_ptr<GenerationBackend> make_generation_backend(const std::string& descriptor,
                                                           const std::filesystem::path& image_dir);
std::unique_ptr<EmbeddingBackend> make_embedding_backend(const ScorerDescriptor& scorer);

/// Exclusive lock on a run directory, released on destruction.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Individual stages, each reading its cache file first when one is given.

std::vector<SampledPrompt> obtain_corpus(const RunConfig& config, ChatBackend* chat,
                                         const std::filesystem::path& corpus_file);

std::vector<ImageArtifact> obtain_images(std::span<const SampledPrompt> corpus,
                                         GenerationBackend* backend,
                                         const GenerationOptions& options,
                                         const std::filesystem::path& manifest_file);

std::vector<EmbeddingRequest> text_requests(std::span<const SampledPrompt> corpus);
std::vector<EmbeddingRequest> image_requests(std::span<const ImageArtifact> artifacts);

std::vector<Embedding> obtain_embeddings(std::span<const EmbeddingRequest> requests,
                                         EmbeddingBackend* backend, std::size_t batch_size,
                                         const std::filesystem::path& store_file);

VleuReport run_evaluation(const RunConfig& config, const Backends& backends);
VleuReport run_evaluation(const RunConfig& config);

/// Recomputes the score from a persisted matrix document alone.
VleuReport rescore_run(const std::filesystem::path& run_dir);

struct SweepPoint {
  std::string checkpoint_tag;
  std::size_t step_index = 0;
  std::optional<VleuReport> report;
  std::string error;
};

struct SweepSeries {
  std::vector<SweepPoint> points;

  /// Tab-separated "checkpoint, step, vleu, n_texts" rows with a header.
  std::string to_table() const;
};

/// Scores a fixed corpus at each checkpoint. step_indices defaults to
/// 0, cadence, 2*cadence, ... and must be strictly increasing.
SweepSeries checkpoint_sweep(const RunConfig& config, std::span<const std::string> checkpoints,
                             const Backends& backends,
                             std::span<const std::size_t> step_indices = {},
                             std::size_t cadence = kSweepCadence);

}  // namespace vleu
