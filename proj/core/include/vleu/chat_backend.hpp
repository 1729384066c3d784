#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vleu {

enum class Role { system, user, assistant };

std::string_view to_string(Role role) noexcept;

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatOptions {
  std::optional<double> temperature;
};

/// One assistant reply per call. Transport failures throw vleu::Error with
/// ErrorCode::backend. Implementations must be safe to call concurrently.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  virtual std::string complete(std::span<const ChatMessage> messages,
                               const ChatOptions& options) = 0;

  virtual std::string model_id() const = 0;
};

/// Deterministic backend that answers from a fixed script in call order.
///
/// Fixture files hold one reply per line. A line consisting of exactly
/// `!fail` makes that call throw a backend error instead of replying.
/// In counter mode (no script) the n-th call returns "<prefix><n>", 1-based.
class ScriptedChatBackend final : public ChatBackend {
 public:
  explicit ScriptedChatBackend(std::vector<std::string> replies,
                               std::string model = "scripted");

  static ScriptedChatBackend counter(std::string prefix = "reply-",
                                     std::string model = "scripted");
  static ScriptedChatBackend from_file(const std::filesystem::path& path);

  ScriptedChatBackend(const ScriptedChatBackend& other);

  std::string complete(std::span<const ChatMessage> messages,
                       const ChatOptions& options) override;
  std::string model_id() const override { return model_; }

  std::size_t calls() const;
  /// Message lists exactly as received, one entry per call.
  std::vector<std::vector<ChatMessage>> transcript() const;

 private:
  ScriptedChatBackend() = default;

  std::vector<std::string> replies_;
  std::optional<std::string> counter_prefix_;
  std::string model_;
  mutable std::mutex mutex_;
  std::vector<std::vector<ChatMessage>> transcript_;
};

struct HttpChatConfig {
  /// e.g. "http://localhost:8000" or "http://host/v1"; "/chat/completions" is appended,
  /// with "/v1" inserted when the base has no path.
  std::string base_url;
  std::string model = "gpt-3.5-turbo";
  /// Name of the environment variable holding a bearer token, if any.
  std::string api_key_env = "VLEU_CHAT_API_KEY";
  std::chrono::seconds timeout{120};
  /// Minimum spacing between requests; zero disables rate limiting.
  std::chrono::milliseconds min_interval{0};
};

/// OpenAI-style chat-completions client.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpChatConfig config);

  std::string complete(std::span<const ChatMessage> messages,
                       const ChatOptions& options) override;
  std::string model_id() const override { return config_.model; }

 private:
  HttpChatConfig config_;
  std::mutex rate_mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
};

}  // namespace vleu
