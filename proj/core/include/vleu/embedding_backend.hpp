#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vleu/scoring.hpp"

namespace vleu {

struct EmbeddingRequest {
  std::string id;
  EmbeddingKind kind = EmbeddingKind::text;
  /// Prompt text, or an image file reference.
  std::string content;
};

/// Returns one embedding per request, in request order.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;

  virtual std::vector<Embedding> embed(std::span<const EmbeddingRequest> batch) = 0;
  virtual std::string model_id() const = 0;
};

enum class ScorerKind { file, http };

struct ScorerDescriptor {
  ScorerKind kind = ScorerKind::file;
  std::string model;
  /// Store path for file scorers, base URL for http scorers.
  std::string endpoint;
  std::size_t batch_size = 32;

  bool operator==(const ScorerDescriptor&) const = default;
};

/// Looks embeddings up by (kind, id) in a precomputed store file.
class FileEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit FileEmbeddingBackend(const std::filesystem::path& store);
  explicit FileEmbeddingBackend(std::vector<Embedding> embeddings);

  std::vector<Embedding> embed(std::span<const EmbeddingRequest> batch) override;
  std::string model_id() const override { return model_; }

 private:
  std::map<std::pair<EmbeddingKind, std::string>, Embedding> index_;
  std::string model_;
};

struct HttpEmbeddingConfig {
  std::string base_url;
  /// Requested model; the service's echo is what gets recorded.
  std::string model;
  std::string api_key_env = "VLEU_EMBED_API_KEY";
  std::chrono::seconds timeout{300};
};

/// POST {base}/embed with {"model", "items": [{id, kind, content}]}, expecting
/// {"model", "embeddings": [{id, dim, vector}]} back.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(HttpEmbeddingConfig config);

  std::vector<Embedding> embed(std::span<const EmbeddingRequest> batch) override;
  std::string model_id() const override;

 private:
  HttpEmbeddingConfig config_;
  mutable std::mutex mutex_;
  std::string echoed_model_;
};

/// Splits requests into batches of at most batch_size and concatenates results.
std::vector<Embedding> embed_all(EmbeddingBackend& backend,
                                 std::span<const EmbeddingRequest> requests,
                                 std::size_t batch_size);

}  // namespace vleu
