#include "vleu/scoring.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "vleu/error.hpp"

namespace vleu {

std::string_view to_string(EmbeddingKind kind) noexcept {
  return kind == EmbeddingKind::text ? "text" : "image";
}

EmbeddingKind embedding_kind_from_string(std::string_view name) {
  if (name == "text") return EmbeddingKind::text;
  if (name == "image") return EmbeddingKind::image;
  throw Error(ErrorCode::invalid_embedding, "unknown embedding kind: " + std::string(name));
}

namespace {

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

}  // namespace

std::vector<double> normalize(std::span<const double> vector) {
  for (double x : vector) {
    if (!std::isfinite(x)) throw Error(ErrorCode::invalid_embedding, "non-finite embedding entry");
  }
  const double norm = l2_norm(vector);
  if (norm == 0.0) throw Error(ErrorCode::degenerate_embedding, "cannot normalize a zero vector");
  std::vector<double> out(vector.begin(), vector.end());
  for (double& x : out) x /= norm;
  return out;
}

Embedding make_embedding(std::string id, EmbeddingKind kind, std::string model,
                         std::span<const double> raw) {
  if (raw.empty()) throw Error(ErrorCode::invalid_embedding, "embedding " + id + " is empty");
  Embedding e{std::move(id), kind, std::move(model), {}};
  e.vector = normalize(raw);
  return e;
}

void ensure_unit(Embedding& embedding) {
  if (embedding.vector.empty()) {
    throw Error(ErrorCode::invalid_embedding, "embedding " + embedding.id + " is empty");
  }
  for (double x : embedding.vector) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::invalid_embedding, "embedding " + embedding.id + " is not finite");
    }
  }
  const double norm = l2_norm(embedding.vector);
  if (std::abs(norm - 1.0) > kNormTolerance) {
    spdlog::warn("embedding {} has norm {}; re-normalizing", embedding.id, norm);
    embedding.vector = normalize(embedding.vector);
  }
}

SimilarityMatrix build_similarity_matrix(std::span<const Embedding> texts,
                                         std::span<const Embedding> images) {
  if (texts.empty() || images.empty()) {
    throw Error(ErrorCode::empty_input, "similarity needs at least one text and one image");
  }
  auto check_group = [](std::span<const Embedding> group, EmbeddingKind kind) {
    for (const auto& e : group) {
      if (e.kind != kind) {
        throw Error(ErrorCode::configuration, "embedding " + e.id + " has kind " +
                                                  std::string(to_string(e.kind)) + ", expected " +
                                                  std::string(to_string(kind)));
      }
      if (e.model != group.front().model) {
        throw Error(ErrorCode::configuration, "mixed " + std::string(to_string(kind)) +
                                                  " embedding models: " + group.front().model +
                                                  " and " + e.model);
      }
      if (e.dim() != group.front().dim()) {
        throw Error(ErrorCode::shape, "embedding " + e.id + " has dimension " +
                                          std::to_string(e.dim()));
      }
    }
  };
  check_group(texts, EmbeddingKind::text);
  check_group(images, EmbeddingKind::image);
  const std::size_t dim = texts.front().dim();
  if (images.front().dim() != dim) {
    throw Error(ErrorCode::shape, "text dimension " + std::to_string(dim) +
                                      " differs from image dimension " +
                                      std::to_string(images.front().dim()));
  }

  std::vector<Embedding> text_units(texts.begin(), texts.end());
  std::vector<Embedding> image_units(images.begin(), images.end());
  for (auto& e : text_units) ensure_unit(e);
  for (auto& e : image_units) ensure_unit(e);

  std::vector<std::string> text_ids;
  std::vector<std::string> image_ids;
  for (const auto& e : text_units) text_ids.push_back(e.id);
  for (const auto& e : image_units) image_ids.push_back(e.id);

  std::vector<double> values(text_units.size() * image_units.size());
  for (std::size_t i = 0; i < text_units.size(); ++i) {
    const auto& t = text_units[i].vector;
    for (std::size_t j = 0; j < image_units.size(); ++j) {
      const auto& v = image_units[j].vector;
      double dot = 0.0;
      for (std::size_t k = 0; k < dim; ++k) dot += t[k] * v[k];
      values[i * image_units.size() + j] = dot;
    }
  }
  return SimilarityMatrix(std::move(text_ids), std::move(image_ids), std::move(values));
}

}  // namespace vleu
