#include "vleu/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bounded_random.hpp"
#include "vleu/error.hpp"

namespace vleu {

std::vector<std::size_t> draw_subset(std::size_t n, std::size_t size, std::uint64_t seed,
                                     std::size_t repeat) {
  if (size > n) {
    throw Error(ErrorCode::invalid_size,
                "subset size " + std::to_string(size) + " exceeds corpus size " + std::to_string(n));
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(size), static_cast<std::uint32_t>(repeat)};
  std::mt19937_64 engine(seq);

  // Partial Fisher-Yates over the index range.
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t k = 0; k < size; ++k) {
    const auto pick = k + static_cast<std::size_t>(detail::bounded(engine, n - k));
    std::swap(pool[k], pool[pick]);
  }
  pool.resize(size);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<StabilityRow> stability_report(const SimilarityMatrix& matrix,
                                           std::span<const std::size_t> sizes,
                                           std::size_t repeats, std::uint64_t seed, double t) {
  if (matrix.rows() != matrix.cols()) {
    throw Error(ErrorCode::shape, "stability analysis needs one image per prompt (square matrix)");
  }
  if (repeats < 1) throw Error(ErrorCode::invalid_size, "repeats must be >= 1");
  for (auto size : sizes) {
    if (size < 1 || size > matrix.rows()) {
      throw Error(ErrorCode::invalid_size, "subset size " + std::to_string(size) +
                                               " outside [1, " + std::to_string(matrix.rows()) + "]");
    }
  }

  std::vector<StabilityRow> rows;
  for (auto size : sizes) {
    for (std::size_t r = 0; r < repeats; ++r) {
      const auto subset = draw_subset(matrix.rows(), size, seed, r);
      rows.push_back({size, r, vleu_score(matrix.restrict(subset, subset), t).vleu});
    }
  }
  return rows;
}

std::string stability_table(std::span<const StabilityRow> rows) {
  std::ostringstream out;
  out << "size\trepeat\tvleu\n";
  for (const auto& r : rows) {
    out << r.size << '\t' << r.repeat << '\t' << nlohmann::json(r.vleu).dump() << '\n';
  }
  return out.str();
}

const std::set<std::string>& default_stop_words() {
  static const std::set<std::string> words{
      "a",    "an",   "the",  "and",  "or",   "of",    "in",    "on",   "at",    "to",
      "with", "for",  "from", "by",   "is",   "are",   "was",   "it",   "its",   "this",
      "that", "as",   "into", "over", "under", "his",  "her",   "their", "while", "be"};
  return words;
}

std::vector<std::pair<std::string, std::size_t>> token_frequency(
    std::span<const std::string> texts, const std::set<std::string>& stop_words) {
  std::map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    std::string token;
    auto flush = [&] {
      if (!token.empty() && !stop_words.count(token)) ++counts[token];
      token.clear();
    };
    for (unsigned char c : text) {
      if (std::isalnum(c)) {
        token.push_back(static_cast<char>(std::tolower(c)));
      } else {
        flush();
      }
    }
    flush();
  }
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

std::string compare_reports(std::span<const LabeledReport> reports) {
  std::ostringstream out;
  bool same_n = true;
  for (const auto& r : reports) {
    same_n = same_n && r.report.n_texts == reports.front().report.n_texts;
  }
  std::vector<const LabeledReport*> order;
  for (const auto& r : reports) order.push_back(&r);
  if (same_n) {
    std::stable_sort(order.begin(), order.end(),
                     [](auto* a, auto* b) { return a->report.vleu > b->report.vleu; });
  }
  std::size_t rank = 1;
  for (const auto* r : order) {
    if (same_n) out << rank++ << ". ";
    out << r->label << "\tvleu=" << nlohmann::json(r->report.vleu).dump()
        << "\tN=" << r->report.n_texts << "\tM=" << r->report.n_images
        << "\tt=" << nlohmann::json(r->report.temperature).dump() << '\n';
  }
  if (!same_n && reports.size() > 1) {
    out << "note: prompt counts differ; scores are not comparable across N and are not ranked\n";
  }
  return out.str();
}

}  // namespace vleu
