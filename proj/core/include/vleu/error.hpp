#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vleu {

enum class ErrorCode {
  invalid_input,
  invalid_temperature,
  empty_input,
  shape,
  divergence_undefined,
  template_error,
  sampling_aborted,
  keyword_exhausted,
  degenerate_embedding,
  invalid_embedding,
  configuration,
  backend,
  generation,
  registration,
  pool,
  duplicate_vote,
  not_found,
  invalid_size,
  io,
  locked,
};

std::string_view to_string(ErrorCode code) noexcept;

// Process exit code for the CLI: 2 configuration, 3 backend, 4 data/validation.
int exit_code_for(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vleu
