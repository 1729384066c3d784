#pragma once

/**
 * @file sampler.hpp
 * @brief Multi-turn prompt sampling from a chat model.
 *
 * Each conversation opens with a templated system message. The first reply
 * only seeds the dialogue and is discarded; every following round appends
 * the previous reply plus the literal user message "Again" and collects the
 * answer. With keyword inclusion on, a reply missing the class word is
 * re-requested with the same message list (the failed reply is not
 * appended) up to a retry cap.
 */

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vleu/chat_backend.hpp"
#include "vleu/error.hpp"

namespace vleu {

enum class TemplateKind { unconstrained, constrained, constrained_with_property };

std::string_view to_string(TemplateKind kind) noexcept;
TemplateKind template_kind_from_string(std::string_view name);

struct PromptTemplate {
  TemplateKind kind = TemplateKind::unconstrained;
  std::string class_word;
  std::string property;

  bool operator==(const PromptTemplate&) const = default;
};

/// Throws ErrorCode::template_error when a required field is empty.
void validate(const PromptTemplate& tmpl);

/// System message for a template, with class word / property substituted.
std::string render_template(const PromptTemplate& tmpl);

/// Follow-up user message sent for every collected round.
inline constexpr std::string_view kFollowUp = "Again";

struct SeedTurn {
  std::string user;
  std::string assistant;
};

struct SamplerConfig {
  std::size_t num = 0;
  std::size_t step = 50;
  bool include_keyword = false;
  bool keyword_case_insensitive = false;
  std::size_t max_keyword_retries = 10;
  /// Extra attempts per call after a transport failure.
  std::size_t transport_retries = 2;
  std::optional<double> chat_temperature;
  std::string backend_id;
  /// Hand-written (user, assistant) rounds inserted after the system message.
  std::vector<SeedTurn> seed_dialogue;
  /// Conversations run concurrently up to this bound.
  std::size_t parallelism = 1;
};

void validate(const SamplerConfig& config);

struct SampledPrompt {
  std::size_t id = 0;
  std::string text;
  PromptTemplate tmpl;
  std::size_t conversation_index = 0;
  std::size_t round = 1;
  std::string sampler_model;
  std::size_t keyword_retries = 0;

  bool operator==(const SampledPrompt&) const = default;
};

/// Thrown when the backend keeps failing; carries everything collected so far.
class SamplingAborted : public Error {
 public:
  SamplingAborted(const std::string& message, std::vector<SampledPrompt> partial)
      : Error(ErrorCode::sampling_aborted, message), partial_(std::move(partial)) {}

  const std::vector<SampledPrompt>& partial() const noexcept { return partial_; }

 private:
  std::vector<SampledPrompt> partial_;
};

class KeywordExhausted : public Error {
 public:
  KeywordExhausted(std::size_t conversation, std::size_t round, std::size_t attempts)
      : Error(ErrorCode::keyword_exhausted,
              "keyword missing after " + std::to_string(attempts) + " attempts in conversation " +
                  std::to_string(conversation) + ", round " + std::to_string(round)),
        conversation_(conversation),
        round_(round) {}

  std::size_t conversation() const noexcept { return conversation_; }
  std::size_t round() const noexcept { return round_; }

 private:
  std::size_t conversation_;
  std::size_t round_;
};

/// Trims whitespace and one layer of matching surrounding quotes.
std::string clean_reply(std::string_view reply);

std::vector<SampledPrompt> sample_prompts(const SamplerConfig& config,
                                          const PromptTemplate& tmpl, ChatBackend& backend);

}  // namespace vleu
