#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vleu/metric.hpp"

namespace vleu {

struct StabilityRow {
  std::size_t size = 0;
  std::size_t repeat = 0;
  double vleu = 1.0;

  bool operator==(const StabilityRow&) const = default;
};

/// Sorted indices of a uniform random subset of {0..n-1}, reproducible from
/// (seed, size, repeat) on every platform.
std::vector<std::size_t> draw_subset(std::size_t n, std::size_t size, std::uint64_t seed,
                                     std::size_t repeat);

/// Sample-size study on a cached prompt x image matrix where column j holds
/// the image generated from prompt j. For every size and repeat a subset of
/// prompts is drawn, the matrix restricted to those rows and their columns,
/// and the score recomputed.
std::vector<StabilityRow> stability_report(const SimilarityMatrix& matrix,
                                           std::span<const std::size_t> sizes,
                                           std::size_t repeats, std::uint64_t seed,
                                           double t = kDefaultTemperature);

std::string stability_table(std::span<const StabilityRow> rows);

/// Fixed English stop-word list (30 words) applied by default.
const std::set<std::string>& default_stop_words();

/// Lowercased alphanumeric tokens, stop words removed, sorted by count
/// descending then token ascending.
std::vector<std::pair<std::string, std::size_t>> token_frequency(
    std::span<const std::string> texts, const std::set<std::string>& stop_words = default_stop_words());

struct LabeledReport {
  std::string label;
  VleuReport report;
};

/// Human-readable summary. Scores are ranked only when every report has the
/// same prompt count; otherwise each is listed with its N and no ranking.
std::string compare_reports(std::span<const LabeledReport> reports);

}  // namespace vleu
