#pragma once

/**
 * @file metric.hpp
 * @brief The VLEU score and the distributions it is built from.
 *
 * Given an N x M similarity grid between N prompts and M generated images,
 * each image column is turned into a distribution over prompts by a
 * temperature softmax. The marginal is the average of those conditionals,
 * and the score is exp(mean over images of KL(conditional || marginal)).
 *
 * All probability math is done in double precision, logarithms are natural
 * (nats). Every function here is pure and safe to call concurrently.
 */

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vleu {

/// Operating temperature used throughout unless overridden.
inline constexpr double kDefaultTemperature = 0.01;

/// N x M grid of prompt/image similarities, stored row-major.
class SimilarityMatrix {
 public:
  /// Validates shape and finiteness; throws vleu::Error on violation.
  SimilarityMatrix(std::vector<std::string> text_ids,
                   std::vector<std::string> image_ids,
                   std::vector<double> values);

  std::size_t rows() const noexcept { return text_ids_.size(); }
  std::size_t cols() const noexcept { return image_ids_.size(); }

  double at(std::size_t row, std::size_t col) const {
    return values_[row * cols() + col];
  }

  const std::vector<std::string>& text_ids() const noexcept { return text_ids_; }
  const std::vector<std::string>& image_ids() const noexcept { return image_ids_; }
  std::span<const double> values() const noexcept { return values_; }

  std::vector<double> column(std::size_t col) const;

  /// Keeps the listed rows and columns, in the order given.
  SimilarityMatrix restrict(std::span<const std::size_t> rows,
                            std::span<const std::size_t> cols) const;

  bool operator==(const SimilarityMatrix&) const = default;

 private:
  std::vector<std::string> text_ids_;
  std::vector<std::string> image_ids_;
  std::vector<double> values_;
};

/// Probability vector over prompt indices.
struct Distribution {
  std::vector<double> probs;

  std::size_t size() const noexcept { return probs.size(); }
  bool operator==(const Distribution&) const = default;
};

struct VleuReport {
  double vleu = 1.0;
  std::vector<double> per_image_kl;  // nats
  Distribution marginal;
  double temperature = kDefaultTemperature;
  std::size_t n_texts = 0;
  std::size_t n_images = 0;
  std::string config_fingerprint;

  bool operator==(const VleuReport&) const = default;
};

/// softmax(column / t), max-subtracted.
Distribution conditional_distribution(std::span<const double> column, double t);

/// Entry-wise mean of the conditionals.
Distribution marginal_distribution(std::span<const Distribution> conditionals);

/// Sum of p_i * ln(p_i / q_i), skipping p_i == 0 terms.
double kl_divergence(const Distribution& p, const Distribution& q);

VleuReport vleu_score(const SimilarityMatrix& matrix,
                      double t = kDefaultTemperature,
                      std::string config_fingerprint = {});

}  // namespace vleu
