#include "vleu/sampler.hpp"

#include <algorithm>
#include <cctype>
#include <future>
#include <map>

namespace vleu {

std::string_view to_string(TemplateKind kind) noexcept {
  switch (kind) {
    case TemplateKind::unconstrained: return "unconstrained";
    case TemplateKind::constrained: return "constrained";
    case TemplateKind::constrained_with_property: return "constrained_with_property";
  }
  return "unconstrained";
}

TemplateKind template_kind_from_string(std::string_view name) {
  if (name == "unconstrained") return TemplateKind::unconstrained;
  if (name == "constrained") return TemplateKind::constrained;
  if (name == "constrained_with_property") return TemplateKind::constrained_with_property;
  throw Error(ErrorCode::template_error, "unknown template kind: " + std::string(name));
}

void validate(const PromptTemplate& tmpl) {
  if (tmpl.kind != TemplateKind::unconstrained && tmpl.class_word.empty()) {
    throw Error(ErrorCode::template_error,
                std::string(to_string(tmpl.kind)) + " template needs a class word");
  }
  if (tmpl.kind == TemplateKind::constrained_with_property && tmpl.property.empty()) {
    throw Error(ErrorCode::template_error, "constrained_with_property template needs a property");
  }
}

std::string render_template(const PromptTemplate& tmpl) {
  validate(tmpl);
  switch (tmpl.kind) {
    case TemplateKind::unconstrained:
      return "Please imagine a random picture and describe it in one sentence.";
    case TemplateKind::constrained:
      return "Please imagine a picture of " + tmpl.class_word +
             " and describe it in one sentence, making sure to include the word \"" +
             tmpl.class_word + "\".";
    case TemplateKind::constrained_with_property:
      return "Please imagine a picture of " + tmpl.class_word +
             " and describe it in one sentence, making sure to include the word \"" +
             tmpl.class_word + "\" and words about " + tmpl.property + ".";
  }
  throw Error(ErrorCode::template_error, "unknown template kind");
}

void validate(const SamplerConfig& config) {
  if (config.step < 1) throw Error(ErrorCode::configuration, "step must be >= 1");
  if (config.max_keyword_retries < 1) {
    throw Error(ErrorCode::configuration, "max_keyword_retries must be >= 1");
  }
  if (config.parallelism < 1) throw Error(ErrorCode::configuration, "parallelism must be >= 1");
}

std::string clean_reply(std::string_view reply) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!reply.empty() && is_space(reply.front())) reply.remove_prefix(1);
  while (!reply.empty() && is_space(reply.back())) reply.remove_suffix(1);
  if (reply.size() >= 2) {
    const char open = reply.front();
    const char close = reply.back();
    if ((open == '"' && close == '"') || (open == '\'' && close == '\'') ||
        (open == '`' && close == '`')) {
      reply = reply.substr(1, reply.size() - 2);
      while (!reply.empty() && is_space(reply.front())) reply.remove_prefix(1);
      while (!reply.empty() && is_space(reply.back())) reply.remove_suffix(1);
    }
  }
  return std::string(reply);
}

namespace {

bool contains_keyword(std::string_view text, std::string_view keyword, bool case_insensitive) {
  if (!case_insensitive) return text.find(keyword) != std::string_view::npos;
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
  };
  return lower(text).find(lower(keyword)) != std::string::npos;
}

struct ConversationResult {
  std::vector<SampledPrompt> prompts;
  std::exception_ptr error;
};

class Conversation {
 public:
  Conversation(const SamplerConfig& config, const PromptTemplate& tmpl, ChatBackend& backend,
               std::size_t index, std::size_t limit)
      : config_(config), tmpl_(tmpl), backend_(backend), index_(index), limit_(limit) {}

  ConversationResult run() {
    ConversationResult result;
    try {
      collect(result.prompts);
    } catch (...) {
      result.error = std::current_exception();
    }
    return result;
  }

 private:
  std::string call(const std::vector<ChatMessage>& messages) {
    ChatOptions options{config_.chat_temperature};
    for (std::size_t attempt = 0;; ++attempt) {
      try {
        return backend_.complete(messages, options);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::backend || attempt >= config_.transport_retries) throw;
      }
    }
  }

  void collect(std::vector<SampledPrompt>& out) {
    const bool check_keyword = config_.include_keyword;
    std::vector<ChatMessage> messages{{Role::system, render_template(tmpl_)}};
    for (const auto& seed : config_.seed_dialogue) {
      messages.push_back({Role::user, seed.user});
      messages.push_back({Role::assistant, seed.assistant});
    }

    // The opening reply only seeds the dialogue.
    std::string previous = call(messages);

    for (std::size_t round = 1; round <= limit_; ++round) {
      messages.push_back({Role::assistant, previous});
      messages.push_back({Role::user, std::string(kFollowUp)});

      std::size_t retries = 0;
      std::string raw = call(messages);
      std::string text = clean_reply(raw);
      while (text.empty() || (check_keyword && !contains_keyword(text, tmpl_.class_word,
                                                                 config_.keyword_case_insensitive))) {
        if (retries >= config_.max_keyword_retries) {
          throw KeywordExhausted(index_, round, retries + 1);
        }
        ++retries;
        raw = call(messages);
        text = clean_reply(raw);
      }

      SampledPrompt prompt;
      prompt.text = std::move(text);
      prompt.tmpl = tmpl_;
      prompt.conversation_index = index_;
      prompt.round = round;
      prompt.sampler_model = backend_.model_id();
      prompt.keyword_retries = retries;
      out.push_back(std::move(prompt));
      previous = std::move(raw);
    }
  }

  const SamplerConfig& config_;
  const PromptTemplate& tmpl_;
  ChatBackend& backend_;
  std::size_t index_;
  std::size_t limit_;
};

}  // namespace

std::vector<SampledPrompt> sample_prompts(const SamplerConfig& config, const PromptTemplate& tmpl,
                                          ChatBackend& backend) {
  validate(config);
  validate(tmpl);
  if (config.include_keyword && tmpl.class_word.empty()) {
    throw Error(ErrorCode::configuration, "include_keyword needs a template with a class word");
  }

  std::vector<std::size_t> limits;
  for (std::size_t i = 0; i < config.num; i += config.step) {
    limits.push_back(std::min(config.step, config.num - i));
  }

  std::vector<ConversationResult> results(limits.size());
  if (config.parallelism <= 1) {
    for (std::size_t c = 0; c < limits.size(); ++c) {
      results[c] = Conversation(config, tmpl, backend, c, limits[c]).run();
      if (results[c].error) break;
    }
  } else {
    for (std::size_t start = 0; start < limits.size(); start += config.parallelism) {
      const std::size_t end = std::min(limits.size(), start + config.parallelism);
      std::vector<std::future<ConversationResult>> batch;
      for (std::size_t c = start; c < end; ++c) {
        batch.push_back(std::async(std::launch::async, [&, c] {
          return Conversation(config, tmpl, backend, c, limits[c]).run();
        }));
      }
      for (std::size_t c = start; c < end; ++c) results[c] = batch[c - start].get();
    }
  }

  // Sequence by (conversation, round) before assigning ids.
  std::vector<SampledPrompt> prompts;
  std::exception_ptr first_error;
  for (auto& r : results) {
    for (auto& p : r.prompts) prompts.push_back(std::move(p));
    if (r.error && !first_error) first_error = r.error;
  }
  for (std::size_t i = 0; i < prompts.size(); ++i) prompts[i].id = i;

  if (first_error) {
    try {
      std::rethrow_exception(first_error);
    } catch (const KeywordExhausted&) {
      throw;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::backend) {
        throw SamplingAborted("sampling aborted after " + std::to_string(prompts.size()) +
                                  " prompts: " + e.what(),
                              std::move(prompts));
      }
      throw;
    }
  }
  return prompts;
}

}  // namespace vleu
