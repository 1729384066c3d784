#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace vleu {

inline constexpr double kDefaultKFactor = 32.0;
inline constexpr double kInitialRating = 1000.0;

struct MatchOutcome {
  std::string match_id;
  std::string model_a;
  std::string model_b;
  std::string prompt_text;
  std::string image_a;
  std::string image_b;
  /// 1 win for a, 0.5 draw, 0 loss.
  double score_a = 0.5;
  std::int64_t timestamp = 0;
  std::string evaluator_id;

  bool operator==(const MatchOutcome&) const = default;
};

/// Throws ErrorCode::invalid_input unless the sides differ and score_a is 0, 0.5 or 1.
void validate(const MatchOutcome& outcome);

struct EloState {
  std::map<std::string, double> ratings;
  double k_factor = kDefaultKFactor;
  double initial_rating = kInitialRating;
  std::vector<MatchOutcome> match_log;

  /// Adds a model at initial_rating; no-op for a known id.
  void register_model(const std::string& model_id);
  bool operator==(const EloState&) const = default;
};

/// 1 / (1 + 10^((opponent - self) / 400)).
double expected_score(double self, double opponent);

/// In-place update of both sides plus a log append.
void apply_outcome(EloState& state, const MatchOutcome& outcome);

/// Value-returning form; pass the state by std::move to avoid copying the log.
EloState update_ratings(EloState state, const MatchOutcome& outcome);

/// Rebuilds ratings by replaying a log from initial ratings.
EloState replay(std::span<const std::string> models, std::span<const MatchOutcome> log,
                double k_factor = kDefaultKFactor, double initial_rating = kInitialRating);

}  // namespace vleu
