#include "vleu/chat_backend.hpp"

#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "vleu/error.hpp"

namespace vleu {

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

ScriptedChatBackend::ScriptedChatBackend(std::vector<std::string> replies, std::string model)
    : replies_(std::move(replies)), model_(std::move(model)) {}

ScriptedChatBackend::ScriptedChatBackend(const ScriptedChatBackend& other) {
  std::lock_guard lock(other.mutex_);
  replies_ = other.replies_;
  counter_prefix_ = other.counter_prefix_;
  model_ = other.model_;
  transcript_ = other.transcript_;
}

ScriptedChatBackend ScriptedChatBackend::counter(std::string prefix, std::string model) {
  ScriptedChatBackend backend;
  backend.counter_prefix_ = std::move(prefix);
  backend.model_ = std::move(model);
  return backend;
}

ScriptedChatBackend ScriptedChatBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::configuration, "cannot open chat script " + path.string());
  std::vector<std::string> replies;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    replies.push_back(std::move(line));
  }
  return ScriptedChatBackend(std::move(replies), "scripted:" + path.filename().string());
}

std::string ScriptedChatBackend::complete(std::span<const ChatMessage> messages,
                                          const ChatOptions&) {
  std::lock_guard lock(mutex_);
  transcript_.emplace_back(messages.begin(), messages.end());
  const std::size_t call = transcript_.size();
  if (counter_prefix_) return *counter_prefix_ + std::to_string(call);
  if (call > replies_.size()) {
    throw Error(ErrorCode::backend, "chat script exhausted after " +
                                        std::to_string(replies_.size()) + " replies");
  }
  const std::string& reply = replies_[call - 1];
  if (reply == "!fail") {
    throw Error(ErrorCode::backend, "scripted transport failure at call " + std::to_string(call));
  }
  return reply;
}

std::size_t ScriptedChatBackend::calls() const {
  std::lock_guard lock(mutex_);
  return transcript_.size();
}

std::vector<std::vector<ChatMessage>> ScriptedChatBackend::transcript() const {
  std::lock_guard lock(mutex_);
  return transcript_;
}

HttpChatBackend::HttpChatBackend(HttpChatConfig config) : config_(std::move(config)) {
  detail::split_url(config_.base_url);
}

std::string HttpChatBackend::complete(std::span<const ChatMessage> messages,
                                      const ChatOptions& options) {
  if (config_.min_interval.count() > 0) {
    std::chrono::steady_clock::time_point slot;
    {
      std::lock_guard lock(rate_mutex_);
      slot = std::max(next_slot_, std::chrono::steady_clock::now());
      next_slot_ = slot + config_.min_interval;
    }
    std::this_thread::sleep_until(slot);
  }

  nlohmann::json body;
  body["model"] = config_.model;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) {
    body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  if (options.temperature) body["temperature"] = *options.temperature;

  const auto url = detail::split_url(config_.base_url);
  const std::string path = (url.path.empty() ? std::string("/v1") : url.path) + "/chat/completions";
  auto client = detail::make_client(url.origin, config_.timeout);
  const auto res = detail::expect_ok(
      client.Post(path, detail::auth_headers(config_.api_key_env), body.dump(), "application/json"),
      "chat backend " + config_.base_url);

  try {
    const auto reply = nlohmann::json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::backend, std::string("malformed chat response: ") + e.what());
  }
}

}  // namespace vleu
