#pragma once

// Private helpers shared by the HTTP backends.

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <string>

#include "vleu/error.hpp"

namespace vleu::detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash, may be empty
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::configuration, "backend URL needs a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) out.path = url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

inline httplib::Client make_client(const std::string& origin, std::chrono::seconds timeout) {
  httplib::Client client(origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  return client;
}

inline httplib::Headers auth_headers(const std::string& env_name) {
  httplib::Headers headers;
  if (env_name.empty()) return headers;
  if (const char* token = std::getenv(env_name.c_str()); token && *token) {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  return headers;
}

inline httplib::Result expect_ok(httplib::Result res, const std::string& what) {
  if (!res) {
    throw Error(ErrorCode::backend, what + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::backend, what + ": HTTP " + std::to_string(res->status));
  }
  return res;
}

}  // namespace vleu::detail
