#include <httplib.h>

#include "vleu/arena.hpp"
#include "vleu/error.hpp"
#include "vleu/records.hpp"

namespace vleu {

struct ArenaServer::Impl {
  Arena& arena;
  httplib::Server server;

  explicit Impl(Arena& a) : arena(a) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.status = 204;
    });
    server.Get(R"(/matches/([^/]+)/images/(left|right))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 serve_image(req.matches[1], req.matches[2] == "left" ? Side::left : Side::right, res);
               });
    auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
      const auto reply = handle_request(arena, req.method, req.path, req.body);
      res.status = reply.status;
      res.set_content(reply.body.dump(), "application/json");
    };
    server.Get(R"(/.*)", dispatch);
    server.Post(R"(/.*)", dispatch);
  }

  void serve_image(const std::string& match_id, Side side, httplib::Response& res) {
    try {
      const auto ref = arena.image_ref(match_id, side);
      res.set_content(read_text_file(ref), ref.ends_with(".jpg") || ref.ends_with(".jpeg")
                                               ? "image/jpeg"
                                               : "image/png");
    } catch (const Error& e) {
      res.status = e.code() == ErrorCode::not_found ? 404 : 500;
      res.set_content(nlohmann::json{{"error", {{"code", to_string(e.code())}, {"message", e.what()}}}}.dump(),
                      "application/json");
    }
  }
};

ArenaServer::ArenaServer(Arena& arena) : impl_(std::make_unique<Impl>(arena)) {}

ArenaServer::~ArenaServer() { stop(); }

int ArenaServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::io, "cannot bind arena server on " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::io, "cannot bind arena server on " + host + ":" + std::to_string(port));
  }
  return port;
}

void ArenaServer::serve() { impl_->server.listen_after_bind(); }

void ArenaServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace vleu
