#include "vleu/elo.hpp"

#include <cmath>

#include "vleu/error.hpp"

namespace vleu {

void validate(const MatchOutcome& outcome) {
  if (outcome.model_a == outcome.model_b) {
    throw Error(ErrorCode::invalid_input, "a model cannot play itself: " + outcome.model_a);
  }
  if (outcome.score_a != 0.0 && outcome.score_a != 0.5 && outcome.score_a != 1.0) {
    throw Error(ErrorCode::invalid_input, "score must be 0, 0.5 or 1");
  }
}

void EloState::register_model(const std::string& model_id) {
  if (model_id.empty()) throw Error(ErrorCode::registration, "empty model id");
  ratings.try_emplace(model_id, initial_rating);
}

double expected_score(double self, double opponent) {
  return 1.0 / (1.0 + std::pow(10.0, (opponent - self) / 400.0));
}

void apply_outcome(EloState& state, const MatchOutcome& outcome) {
  validate(outcome);
  auto a = state.ratings.find(outcome.model_a);
  auto b = state.ratings.find(outcome.model_b);
  if (a == state.ratings.end() || b == state.ratings.end()) {
    throw Error(ErrorCode::registration,
                "unregistered model in match " + outcome.match_id + ": " +
                    (a == state.ratings.end() ? outcome.model_a : outcome.model_b));
  }
  const double expected_a = expected_score(a->second, b->second);
  // The b side uses S_b = 1 - S_a and E_b = 1 - E_a, so its change is the negation.
  const double delta = state.k_factor * (outcome.score_a - expected_a);
  a->second += delta;
  b->second -= delta;
  state.match_log.push_back(outcome);
}

EloState update_ratings(EloState state, const MatchOutcome& outcome) {
  apply_outcome(state, outcome);
  return state;
}

EloState replay(std::span<const std::string> models, std::span<const MatchOutcome> log,
                double k_factor, double initial_rating) {
  EloState state;
  state.k_factor = k_factor;
  state.initial_rating = initial_rating;
  for (const auto& m : models) state.register_model(m);
  for (const auto& outcome : log) apply_outcome(state, outcome);
  return state;
}

}  // namespace vleu
