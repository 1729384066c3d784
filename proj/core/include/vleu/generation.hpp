#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vleu/sampler.hpp"

namespace vleu {

struct ImageArtifact {
  std::size_t prompt_id = 0;
  std::string image_ref;
  std::string checkpoint_tag;
  std::optional<std::uint64_t> seed;

  bool operator==(const ImageArtifact&) const = default;
};

/// Column id used for an artifact in similarity matrices and embedding stores.
std::string image_id(const ImageArtifact& artifact);

struct GenerationRequest {
  std::size_t prompt_id = 0;
  std::string prompt;
  std::uint64_t seed = 0;
  std::string checkpoint_tag;
};

/// Produces (or locates) one image and returns its stable reference.
/// Failures throw vleu::Error.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;

  virtual std::string generate(const GenerationRequest& request) = 0;
  virtual std::string descriptor() const = 0;
};

/// Resolves pre-rendered images from a path template. "{id}" and "{tag}" are
/// substituted; a template without "{id}" is a directory holding "<id>.png".
class DirectoryGenerationBackend final : public GenerationBackend {
 public:
  explicit DirectoryGenerationBackend(std::string path_template);

  std::string generate(const GenerationRequest& request) override;
  std::string descriptor() const override { return template_; }

  std::string resolve(std::size_t prompt_id, const std::string& tag) const;

 private:
  std::string template_;
};

struct HttpGenerationConfig {
  std::string url;
  /// Images are written here as <sha256>.png.
  std::filesystem::path output_dir;
  std::string api_key_env = "VLEU_T2I_API_KEY";
  std::chrono::seconds timeout{600};
};

/// POST {prompt, seed, tag} and persist the returned image bytes under a
/// content-addressed name.
class HttpGenerationBackend final : public GenerationBackend {
 public:
  explicit HttpGenerationBackend(HttpGenerationConfig config);

  std::string generate(const GenerationRequest& request) override;
  std::string descriptor() const override { return config_.url; }

 private:
  HttpGenerationConfig config_;
};

enum class FailurePolicy { abort, skip };

/// Fixed seed per prompt id (splitmix64 finalizer).
std::uint64_t default_seed(std::size_t prompt_id);

struct GenerationOptions {
  FailurePolicy policy = FailurePolicy::abort;
  std::string checkpoint_tag;
  bool random_seeds = false;
  std::size_t retries = 1;
  std::size_t parallelism = 1;
  /// Previously produced artifacts; reused when their image still resolves.
  std::span<const ImageArtifact> cache;
};

struct GenerationResult {
  std::vector<ImageArtifact> artifacts;
  std::vector<std::size_t> skipped;
  std::size_t backend_calls = 0;
};

GenerationResult generate_images(std::span<const SampledPrompt> prompts,
                                 GenerationBackend& backend, const GenerationOptions& options);

}  // namespace vleu
