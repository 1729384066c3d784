#pragma once

/**
 * @file arena.hpp
 * @brief Blinded pairwise human evaluation with online Elo ratings.
 *
 * Matches show two images for one prompt, produced by two models drawn
 * uniformly from the pool and placed on random sides. Model identities are
 * only available after a vote. Registrations and votes are appended to a
 * JSON Lines log; ratings are rebuilt from it on startup.
 */

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vleu/elo.hpp"
#include "vleu/generation.hpp"

namespace vleu {

enum class VoteChoice { left, right, draw };

std::string_view to_string(VoteChoice choice) noexcept;
VoteChoice vote_choice_from_string(std::string_view name);

enum class Side { left, right };

struct ArenaConfig {
  double k_factor = kDefaultKFactor;
  double initial_rating = kInitialRating;
  bool allow_draws = true;
  /// Append-only event log; empty keeps the arena in memory only.
  std::filesystem::path log_path;
  /// Where auto-generated images go.
  std::filesystem::path image_dir = "arena_images";
  std::optional<std::uint64_t> seed;
  /// Subject instructions shown to evaluators.
  std::vector<std::string> instructions;
};

struct BlindedMatch {
  std::string match_id;
  std::string prompt_text;
  std::string left_image;   // arena-relative URL, carries no model identity
  std::string right_image;
};

struct MatchReveal {
  std::string match_id;
  std::string prompt_text;
  std::string left_model;
  std::string right_model;
  VoteChoice choice = VoteChoice::draw;
  double left_rating = 0.0;
  double right_rating = 0.0;
};

struct LeaderboardRow {
  std::string model;
  double rating = 0.0;
  std::size_t matches = 0;
};

class Arena {
 public:
  explicit Arena(ArenaConfig config);

  /// backend: generation descriptor (URL or path template) used when a match
  /// asks for images to be generated; may be empty.
  void register_model(const std::string& model_id, const std::string& backend = {});
  void register_model(const std::string& model_id, std::shared_ptr<GenerationBackend> backend);

  /// images maps model id -> image reference; models missing from it fall back
  /// to their generation backend. Throws ErrorCode::pool with fewer than two
  /// eligible models.
  BlindedMatch create_match(const std::string& prompt_text,
                            const std::map<std::string, std::string>& images = {});

  /// Applies the rating update immediately. A second vote on a match is
  /// rejected with ErrorCode::duplicate_vote.
  MatchReveal vote(const std::string& match_id, VoteChoice choice,
                   const std::string& evaluator_id = {});

  /// Blinded view while pending, reveal afterwards.
  std::variant<BlindedMatch, MatchReveal> lookup(const std::string& match_id) const;

  std::string image_ref(const std::string& match_id, Side side) const;

  std::vector<LeaderboardRow> leaderboard() const;
  EloState snapshot() const;
  const ArenaConfig& config() const noexcept { return config_; }

 private:
  struct Model {
    std::string backend_descriptor;
    std::shared_ptr<GenerationBackend> backend;
  };
  struct OpenMatch {
    BlindedMatch view;
    std::string left_model;
    std::string right_model;
    std::string left_ref;
    std::string right_ref;
    std::optional<MatchReveal> reveal;
  };

  void append_event(const nlohmann::json& event);
  void load_log();
  MatchReveal make_reveal(const OpenMatch& match, VoteChoice choice) const;

  ArenaConfig config_;
  mutable std::shared_mutex mutex_;
  EloState state_;
  std::map<std::string, Model> models_;
  std::map<std::string, std::size_t> match_counts_;
  std::map<std::string, OpenMatch> matches_;
  std::mt19937_64 rng_;
  std::uint64_t generated_ = 0;
  std::ofstream log_;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Transport-independent HTTP routing over an Arena.
///
///   POST /models                {model_id, backend?}
///   POST /matches               {prompt, images?: {model: ref}}
///   POST /matches/{id}/vote     {choice: left|right|draw, evaluator_id?}
///   GET  /matches/{id}          blinded view, or reveal once voted
///   GET  /ratings               leaderboard with match counts
///   GET  /capabilities          draws flag, K, initial rating, instructions
///
/// Errors answer {"error": {"code", "message"}}.
ApiResponse handle_request(Arena& arena, std::string_view method, std::string_view path,
                           std::string_view body);

/// cpp-httplib server around handle_request, also serving match images at
/// GET /matches/{id}/images/{left|right}.
class ArenaServer {
 public:
  explicit ArenaServer(Arena& arena);
  ~ArenaServer();
  ArenaServer(const ArenaServer&) = delete;
  ArenaServer& operator=(const ArenaServer&) = delete;

  /// Binds to port (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vleu
