#include "vleu/embedding_backend.hpp"

#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "vleu/error.hpp"
#include "vleu/records.hpp"

namespace vleu {

FileEmbeddingBackend::FileEmbeddingBackend(const std::filesystem::path& store)
    : FileEmbeddingBackend(read_jsonl<Embedding>(store)) {}

FileEmbeddingBackend::FileEmbeddingBackend(std::vector<Embedding> embeddings) {
  for (auto& e : embeddings) {
    if (model_.empty()) model_ = e.model;
    auto key = std::make_pair(e.kind, e.id);
    index_.insert_or_assign(std::move(key), std::move(e));
  }
}

std::vector<Embedding> FileEmbeddingBackend::embed(std::span<const EmbeddingRequest> batch) {
  std::vector<Embedding> out;
  out.reserve(batch.size());
  for (const auto& request : batch) {
    auto it = index_.find({request.kind, request.id});
    if (it == index_.end()) {
      throw Error(ErrorCode::not_found, "no " + std::string(to_string(request.kind)) +
                                            " embedding stored for id " + request.id);
    }
    out.push_back(it->second);
  }
  return out;
}

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpEmbeddingConfig config)
    : config_(std::move(config)) {
  detail::split_url(config_.base_url);
}

std::string HttpEmbeddingBackend::model_id() const {
  std::lock_guard lock(mutex_);
  return echoed_model_.empty() ? config_.model : echoed_model_;
}

std::vector<Embedding> HttpEmbeddingBackend::embed(std::span<const EmbeddingRequest> batch) {
  nlohmann::json body{{"items", nlohmann::json::array()}};
  if (!config_.model.empty()) body["model"] = config_.model;
  for (const auto& r : batch) {
    body["items"].push_back({{"id", r.id}, {"kind", to_string(r.kind)}, {"content", r.content}});
  }
  const auto url = detail::split_url(config_.base_url);
  auto client = detail::make_client(url.origin, config_.timeout);
  const auto res = detail::expect_ok(
      client.Post(url.path + "/embed", detail::auth_headers(config_.api_key_env), body.dump(),
                  "application/json"),
      "embedding backend " + config_.base_url);

  std::vector<Embedding> out;
  try {
    const auto reply = nlohmann::json::parse(res->body);
    const std::string model = reply.at("model").get<std::string>();
    {
      std::lock_guard lock(mutex_);
      echoed_model_ = model;
    }
    const auto& items = reply.at("embeddings");
    if (items.size() != batch.size()) {
      throw Error(ErrorCode::backend, "embedding backend returned " +
                                          std::to_string(items.size()) + " vectors for " +
                                          std::to_string(batch.size()) + " items");
    }
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const auto& item = items[k];
      if (item.at("id").get<std::string>() != batch[k].id) {
        throw Error(ErrorCode::backend, "embedding backend reordered ids");
      }
      auto raw = item.at("vector").get<std::vector<double>>();
      if (item.contains("dim") && item.at("dim").get<std::size_t>() != raw.size()) {
        throw Error(ErrorCode::shape, "embedding " + batch[k].id + " dim mismatch");
      }
      out.push_back(make_embedding(batch[k].id, batch[k].kind, model, raw));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::backend, std::string("malformed embedding response: ") + e.what());
  }
  return out;
}

std::vector<Embedding> embed_all(EmbeddingBackend& backend,
                                 std::span<const EmbeddingRequest> requests,
                                 std::size_t batch_size) {
  if (batch_size == 0) throw Error(ErrorCode::configuration, "batch size must be >= 1");
  std::vector<Embedding> out;
  out.reserve(requests.size());
  for (std::size_t start = 0; start < requests.size(); start += batch_size) {
    const auto chunk = requests.subspan(start, std::min(batch_size, requests.size() - start));
    auto embedded = backend.embed(chunk);
    if (embedded.size() != chunk.size()) {
      throw Error(ErrorCode::backend, "embedding backend returned the wrong batch size");
    }
    for (auto& e : embedded) out.push_back(std::move(e));
  }
  return out;
}

}  // namespace vleu
