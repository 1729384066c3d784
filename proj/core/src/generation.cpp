#include "vleu/generation.hpp"

#include <atomic>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <random>

#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "vleu/digest.hpp"
#include "vleu/error.hpp"

namespace vleu {

std::string image_id(const ImageArtifact& artifact) {
  const std::string id = std::to_string(artifact.prompt_id);
  return artifact.checkpoint_tag.empty() ? id : artifact.checkpoint_tag + "/" + id;
}

namespace {

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

DirectoryGenerationBackend::DirectoryGenerationBackend(std::string path_template)
    : template_(std::move(path_template)) {
  if (template_.empty()) throw Error(ErrorCode::configuration, "empty image path template");
}

std::string DirectoryGenerationBackend::resolve(std::size_t prompt_id,
                                                const std::string& tag) const {
  std::string path = template_;
  if (path.find("{id}") == std::string::npos) {
    while (path.size() > 1 && path.back() == '/') path.pop_back();
    path += "/{id}.png";
  }
  replace_all(path, "{id}", std::to_string(prompt_id));
  replace_all(path, "{tag}", tag);
  return path;
}

std::string DirectoryGenerationBackend::generate(const GenerationRequest& request) {
  std::string path = resolve(request.prompt_id, request.checkpoint_tag);
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::generation,
                "no image for prompt " + std::to_string(request.prompt_id) + " at " + path);
  }
  return path;
}

HttpGenerationBackend::HttpGenerationBackend(HttpGenerationConfig config)
    : config_(std::move(config)) {
  detail::split_url(config_.url);
}

std::string HttpGenerationBackend::generate(const GenerationRequest& request) {
  nlohmann::json body{{"prompt", request.prompt},
                      {"seed", request.seed},
                      {"tag", request.checkpoint_tag}};
  const auto url = detail::split_url(config_.url);
  auto client = detail::make_client(url.origin, config_.timeout);
  const auto res = detail::expect_ok(
      client.Post(url.path.empty() ? "/" : url.path, detail::auth_headers(config_.api_key_env),
                  body.dump(), "application/json"),
      "generation backend, prompt " + std::to_string(request.prompt_id));
  if (res->body.empty()) {
    throw Error(ErrorCode::generation,
                "empty image payload for prompt " + std::to_string(request.prompt_id));
  }

  std::filesystem::create_directories(config_.output_dir);
  const auto path = config_.output_dir / (sha256_hex(res->body) + ".png");
  if (!std::filesystem::exists(path)) {
    const auto tmp = path.string() + ".part";
    {
      std::ofstream out(tmp, std::ios::binary);
      out.write(res->body.data(), static_cast<std::streamsize>(res->body.size()));
      if (!out) throw Error(ErrorCode::io, "cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
  }
  return path.string();
}

std::uint64_t default_seed(std::size_t prompt_id) {
  std::uint64_t z = static_cast<std::uint64_t>(prompt_id) + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return (z ^ (z >> 31)) & 0xffffffffULL;
}

GenerationResult generate_images(std::span<const SampledPrompt> prompts,
                                 GenerationBackend& backend, const GenerationOptions& options) {
  if (prompts.empty()) throw Error(ErrorCode::empty_input, "no prompts to generate images for");

  std::map<std::size_t, const ImageArtifact*> cached;
  for (const auto& a : options.cache) {
    if (a.checkpoint_tag == options.checkpoint_tag && std::filesystem::exists(a.image_ref)) {
      cached[a.prompt_id] = &a;
    }
  }

  std::vector<std::uint64_t> seeds(prompts.size());
  if (options.random_seeds) {
    std::random_device entropy;
    for (auto& s : seeds) s = entropy();
  } else {
    for (std::size_t k = 0; k < prompts.size(); ++k) seeds[k] = default_seed(prompts[k].id);
  }

  struct Slot {
    std::optional<ImageArtifact> artifact;
    std::optional<Error> error;
    bool called = false;
  };
  std::vector<Slot> slots(prompts.size());

  auto produce = [&](std::size_t k) {
    const auto& prompt = prompts[k];
    Slot& slot = slots[k];
    if (auto it = cached.find(prompt.id); it != cached.end()) {
      slot.artifact = *it->second;
      return;
    }
    GenerationRequest request{prompt.id, prompt.text, seeds[k], options.checkpoint_tag};
    slot.called = true;
    for (std::size_t attempt = 0;; ++attempt) {
      try {
        slot.artifact =
            ImageArtifact{prompt.id, backend.generate(request), options.checkpoint_tag, request.seed};
        return;
      } catch (const Error& e) {
        if (attempt >= options.retries) {
          slot.error = Error(ErrorCode::generation, "prompt " + std::to_string(prompt.id) +
                                                        ": " + e.what());
          return;
        }
      }
    }
  };

  if (options.parallelism <= 1) {
    for (std::size_t k = 0; k < prompts.size(); ++k) {
      produce(k);
      if (slots[k].error && options.policy == FailurePolicy::abort) throw *slots[k].error;
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> workers;
    for (std::size_t w = 0; w < options.parallelism; ++w) {
      workers.push_back(std::async(std::launch::async, [&] {
        for (std::size_t k = next++; k < prompts.size(); k = next++) produce(k);
      }));
    }
    for (auto& w : workers) w.get();
  }

  GenerationResult result;
  for (std::size_t k = 0; k < prompts.size(); ++k) {
    auto& slot = slots[k];
    result.backend_calls += slot.called ? 1 : 0;
    if (slot.error) {
      if (options.policy == FailurePolicy::abort) throw *slot.error;
      result.skipped.push_back(prompts[k].id);
      continue;
    }
    result.artifacts.push_back(std::move(*slot.artifact));
  }
  return result;
}

}  // namespace vleu
