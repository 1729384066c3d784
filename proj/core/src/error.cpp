#include "vleu/error.hpp"

namespace vleu {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid_input";
    case ErrorCode::invalid_temperature: return "invalid_temperature";
    case ErrorCode::empty_input: return "empty_input";
    case ErrorCode::shape: return "shape";
    case ErrorCode::divergence_undefined: return "divergence_undefined";
    case ErrorCode::template_error: return "template_error";
    case ErrorCode::sampling_aborted: return "sampling_aborted";
    case ErrorCode::keyword_exhausted: return "keyword_exhausted";
    case ErrorCode::degenerate_embedding: return "degenerate_embedding";
    case ErrorCode::invalid_embedding: return "invalid_embedding";
    case ErrorCode::configuration: return "configuration";
    case ErrorCode::backend: return "backend";
    case ErrorCode::generation: return "generation";
    case ErrorCode::registration: return "registration";
    case ErrorCode::pool: return "pool";
    case ErrorCode::duplicate_vote: return "duplicate_vote";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::invalid_size: return "invalid_size";
    case ErrorCode::io: return "io";
    case ErrorCode::locked: return "locked";
  }
  return "unknown";
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::configuration:
    case ErrorCode::template_error:
    case ErrorCode::invalid_temperature:
    case ErrorCode::locked:
      return 2;
    case ErrorCode::backend:
    case ErrorCode::sampling_aborted:
    case ErrorCode::keyword_exhausted:
    case ErrorCode::generation:
      return 3;
    default:
      return 4;
  }
}

}  // namespace vleu
