#include "vleu/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vleu/error.hpp"

namespace vleu {

SimilarityMatrix::SimilarityMatrix(std::vector<std::string> text_ids,
                                   std::vector<std::string> image_ids,
                                   std::vector<double> values)
    : text_ids_(std::move(text_ids)),
      image_ids_(std::move(image_ids)),
      values_(std::move(values)) {
  if (text_ids_.empty() || image_ids_.empty()) {
    throw Error(ErrorCode::empty_input, "similarity matrix needs at least one text and one image");
  }
  if (values_.size() != text_ids_.size() * image_ids_.size()) {
    throw Error(ErrorCode::shape,
                "similarity matrix has " + std::to_string(values_.size()) + " values for shape " +
                    std::to_string(text_ids_.size()) + "x" + std::to_string(image_ids_.size()));
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      throw Error(ErrorCode::invalid_input,
                  "non-finite similarity at row " + std::to_string(k / cols()) + ", column " +
                      std::to_string(k % cols()));
    }
  }
}

std::vector<double> SimilarityMatrix::column(std::size_t col) const {
  std::vector<double> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, col);
  return out;
}

SimilarityMatrix SimilarityMatrix::restrict(std::span<const std::size_t> rows_keep,
                                            std::span<const std::size_t> cols_keep) const {
  std::vector<std::string> texts;
  std::vector<std::string> images;
  std::vector<double> values;
  texts.reserve(rows_keep.size());
  images.reserve(cols_keep.size());
  values.reserve(rows_keep.size() * cols_keep.size());
  for (auto c : cols_keep) {
    if (c >= cols()) throw Error(ErrorCode::shape, "column index out of range");
    images.push_back(image_ids_[c]);
  }
  for (auto r : rows_keep) {
    if (r >= rows()) throw Error(ErrorCode::shape, "row index out of range");
    texts.push_back(text_ids_[r]);
    for (auto c : cols_keep) values.push_back(at(r, c));
  }
  return SimilarityMatrix(std::move(texts), std::move(images), std::move(values));
}

Distribution conditional_distribution(std::span<const double> column, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw Error(ErrorCode::invalid_temperature, "temperature must be a positive finite number");
  }
  if (column.empty()) throw Error(ErrorCode::empty_input, "empty similarity column");

  double max_value = -std::numeric_limits<double>::infinity();
  for (double v : column) {
    if (!std::isfinite(v)) throw Error(ErrorCode::invalid_input, "non-finite similarity value");
    max_value = std::max(max_value, v);
  }

  Distribution out;
  out.probs.resize(column.size());
  double total = 0.0;
  for (std::size_t i = 0; i < column.size(); ++i) {
    out.probs[i] = std::exp((column[i] - max_value) / t);
    total += out.probs[i];
  }
  // total >= 1 because the maximum entry contributes exp(0).
  for (double& p : out.probs) p /= total;
  return out;
}

Distribution marginal_distribution(std::span<const Distribution> conditionals) {
  if (conditionals.empty()) throw Error(ErrorCode::empty_input, "no conditionals to average");
  const std::size_t n = conditionals.front().size();
  for (const auto& c : conditionals) {
    if (c.size() != n) throw Error(ErrorCode::shape, "conditionals differ in length");
  }

  const double m = static_cast<double>(conditionals.size());
  Distribution out;
  out.probs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double first = conditionals.front().probs[i];
    bool all_equal = true;
    double sum = 0.0;
    for (const auto& c : conditionals) {
      sum += c.probs[i];
      all_equal = all_equal && c.probs[i] == first;
    }
    // The mean of identical entries is that entry; sum / m can be off by an ulp.
    out.probs[i] = all_equal ? first : sum / m;
  }
  return out;
}

double kl_divergence(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size()) throw Error(ErrorCode::shape, "KL operands differ in length");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p.probs[i];
    if (pi == 0.0) continue;
    const double qi = q.probs[i];
    if (!(qi > 0.0)) {
      throw Error(ErrorCode::divergence_undefined,
                  "KL undefined: p > 0 where q = 0 at index " + std::to_string(i));
    }
    kl += pi * (std::log(pi) - std::log(qi));
  }
  // Rounding can leave a tiny negative value when p and q nearly coincide.
  return std::max(kl, 0.0);
}

VleuReport vleu_score(const SimilarityMatrix& matrix, double t, std::string config_fingerprint) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw Error(ErrorCode::invalid_temperature, "temperature must be a positive finite number");
  }
  const std::size_t n = matrix.rows();
  const std::size_t m = matrix.cols();

  std::vector<Distribution> conditionals;
  conditionals.reserve(m);
  std::vector<double> column(n);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = matrix.at(i, j);
    conditionals.push_back(conditional_distribution(column, t));
  }

  VleuReport report;
  report.marginal = marginal_distribution(conditionals);
  report.per_image_kl.reserve(m);
  double kl_sum = 0.0;
  for (const auto& c : conditionals) {
    report.per_image_kl.push_back(kl_divergence(c, report.marginal));
    kl_sum += report.per_image_kl.back();
  }
  report.vleu = std::exp(kl_sum / static_cast<double>(m));
  report.temperature = t;
  report.n_texts = n;
  report.n_images = m;
  report.config_fingerprint = std::move(config_fingerprint);
  return report;
}

}  // namespace vleu
