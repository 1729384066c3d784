#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vleu/metric.hpp"

namespace vleu {

enum class EmbeddingKind { text, image };

std::string_view to_string(EmbeddingKind kind) noexcept;
EmbeddingKind embedding_kind_from_string(std::string_view name);

/// Unit-normalized encoder output for one prompt or image.
struct Embedding {
  std::string id;
  EmbeddingKind kind = EmbeddingKind::text;
  std::string model;
  std::vector<double> vector;

  std::size_t dim() const noexcept { return vector.size(); }
  bool operator==(const Embedding&) const = default;
};

/// Norm drift beyond which stored embeddings are re-normalized.
inline constexpr double kNormTolerance = 1e-4;

/// vector / ||vector||_2.
std::vector<double> normalize(std::span<const double> vector);

/// Builds a validated embedding, normalizing the raw vector.
Embedding make_embedding(std::string id, EmbeddingKind kind, std::string model,
                         std::span<const double> raw);

/// Checks finiteness and dimension; re-normalizes (with a warning) when the
/// norm is off by more than kNormTolerance.
void ensure_unit(Embedding& embedding);

/// S_ij = <text_i, image_j>. Ids carried over in input order.
SimilarityMatrix build_similarity_matrix(std::span<const Embedding> texts,
                                         std::span<const Embedding> images);

}  // namespace vleu
