#include "vleu/arena.hpp"

#include <chrono>
#include <cstdio>
#include <mutex>

#include <spdlog/spdlog.h>

#include "bounded_random.hpp"
#include "vleu/error.hpp"
#include "vleu/pipeline.hpp"

namespace vleu {

using nlohmann::json;

std::string_view to_string(VoteChoice choice) noexcept {
  switch (choice) {
    case VoteChoice::left: return "left";
    case VoteChoice::right: return "right";
    case VoteChoice::draw: return "draw";
  }
  return "draw";
}

VoteChoice vote_choice_from_string(std::string_view name) {
  if (name == "left") return VoteChoice::left;
  if (name == "right") return VoteChoice::right;
  if (name == "draw") return VoteChoice::draw;
  throw Error(ErrorCode::invalid_input, "vote must be left, right or draw");
}

Arena::Arena(ArenaConfig config) : config_(std::move(config)) {
  state_.k_factor = config_.k_factor;
  state_.initial_rating = config_.initial_rating;
  rng_.seed(config_.seed ? *config_.seed : std::random_device{}());
  if (!config_.log_path.empty()) {
    load_log();
    if (config_.log_path.has_parent_path()) {
      std::filesystem::create_directories(config_.log_path.parent_path());
    }
    log_.open(config_.log_path, std::ios::app);
    if (!log_) throw Error(ErrorCode::io, "cannot open arena log " + config_.log_path.string());
  }
}

void Arena::load_log() {
  std::ifstream in(config_.log_path);
  if (!in) return;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto event = json::parse(line);
      const auto kind = event.at("event").get<std::string>();
      if (kind == "register") {
        const auto id = event.at("model").get<std::string>();
        const auto backend = event.value("backend", std::string{});
        state_.register_model(id);
        models_[id] = Model{backend, backend.empty() ? nullptr
                                                     : std::shared_ptr<GenerationBackend>(
                                                           make_generation_backend(backend, config_.image_dir))};
      } else if (kind == "vote") {
        MatchOutcome o;
        o.match_id = event.at("match_id").get<std::string>();
        o.model_a = event.at("model_a").get<std::string>();
        o.model_b = event.at("model_b").get<std::string>();
        o.prompt_text = event.value("prompt", std::string{});
        o.image_a = event.value("image_a", std::string{});
        o.image_b = event.value("image_b", std::string{});
        o.score_a = event.at("score_a").get<double>();
        o.timestamp = event.value("timestamp", std::int64_t{0});
        o.evaluator_id = event.value("evaluator_id", std::string{});
        apply_outcome(state_, o);
        ++match_counts_[o.model_a];
        ++match_counts_[o.model_b];
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::invalid_input, config_.log_path.string() + ":" +
                                                std::to_string(line_no) + ": " + e.what());
    }
  }
}

void Arena::append_event(const json& event) {
  if (!log_.is_open()) return;
  log_ << event.dump() << '\n';
  log_.flush();
  if (!log_) throw Error(ErrorCode::io, "cannot append to arena log");
}

void Arena::register_model(const std::string& model_id, const std::string& backend) {
  std::shared_ptr<GenerationBackend> gen;
  if (!backend.empty()) gen = make_generation_backend(backend, config_.image_dir);
  std::unique_lock lock(mutex_);
  if (models_.count(model_id)) {
    throw Error(ErrorCode::registration, "model already registered: " + model_id);
  }
  state_.register_model(model_id);
  models_[model_id] = Model{backend, std::move(gen)};
  append_event(json{{"event", "register"}, {"model", model_id}, {"backend", backend}});
}

void Arena::register_model(const std::string& model_id,
                           std::shared_ptr<GenerationBackend> backend) {
  std::unique_lock lock(mutex_);
  if (models_.count(model_id)) {
    throw Error(ErrorCode::registration, "model already registered: " + model_id);
  }
  state_.register_model(model_id);
  const std::string descriptor = backend ? backend->descriptor() : std::string{};
  models_[model_id] = Model{descriptor, std::move(backend)};
  append_event(json{{"event", "register"}, {"model", model_id}, {"backend", descriptor}});
}

BlindedMatch Arena::create_match(const std::string& prompt_text,
                                 const std::map<std::string, std::string>& images) {
  if (prompt_text.empty()) throw Error(ErrorCode::invalid_input, "prompt must not be empty");

  std::vector<std::string> eligible;
  std::string left;
  std::string right;
  std::size_t generation_index = 0;
  {
    std::unique_lock lock(mutex_);
    for (const auto& [id, model] : models_) {
      if (images.count(id) || model.backend) eligible.push_back(id);
    }
    if (eligible.size() < 2) {
      throw Error(ErrorCode::pool, "need at least two models with images, have " +
                                       std::to_string(eligible.size()));
    }
    // Uniform ordered pair: every unordered pair is equally likely and so is its placement.
    const auto n = eligible.size();
    const auto i = detail::bounded(rng_, n);
    auto j = detail::bounded(rng_, n - 1);
    if (j >= i) ++j;
    left = eligible[i];
    right = eligible[j];
    generation_index = generated_++;
  }

  auto image_for = [&](const std::string& model) {
    if (auto it = images.find(model); it != images.end()) return it->second;
    std::shared_ptr<GenerationBackend> backend;
    {
      std::shared_lock lock(mutex_);
      backend = models_.at(model).backend;
    }
    GenerationRequest request{generation_index, prompt_text, default_seed(generation_index), model};
    return backend->generate(request);
  };
  const std::string left_ref = image_for(left);
  const std::string right_ref = image_for(right);

  std::unique_lock lock(mutex_);
  std::string id;
  do {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng_()));
    id = buf;
  } while (matches_.count(id));

  OpenMatch match;
  match.view = {id, prompt_text, "/matches/" + id + "/images/left",
                "/matches/" + id + "/images/right"};
  match.left_model = left;
  match.right_model = right;
  match.left_ref = left_ref;
  match.right_ref = right_ref;
  auto view = match.view;
  matches_.emplace(id, std::move(match));
  return view;
}

MatchReveal Arena::make_reveal(const OpenMatch& match, VoteChoice choice) const {
  MatchReveal r;
  r.match_id = match.view.match_id;
  r.prompt_text = match.view.prompt_text;
  r.left_model = match.left_model;
  r.right_model = match.right_model;
  r.choice = choice;
  r.left_rating = state_.ratings.at(match.left_model);
  r.right_rating = state_.ratings.at(match.right_model);
  return r;
}

MatchReveal Arena::vote(const std::string& match_id, VoteChoice choice,
                        const std::string& evaluator_id) {
  if (choice == VoteChoice::draw && !config_.allow_draws) {
    throw Error(ErrorCode::invalid_input, "this arena does not accept draws");
  }
  std::unique_lock lock(mutex_);
  auto it = matches_.find(match_id);
  if (it == matches_.end()) throw Error(ErrorCode::not_found, "unknown match " + match_id);
  auto& match = it->second;
  if (match.reveal) throw Error(ErrorCode::duplicate_vote, "match " + match_id + " already voted");

  MatchOutcome o;
  o.match_id = match_id;
  o.model_a = match.left_model;
  o.model_b = match.right_model;
  o.prompt_text = match.view.prompt_text;
  o.image_a = match.left_ref;
  o.image_b = match.right_ref;
  o.score_a = choice == VoteChoice::left ? 1.0 : choice == VoteChoice::right ? 0.0 : 0.5;
  o.timestamp = std::chrono::duration_cast<std::chrono::seconds>(
                    std::chrono::system_clock::now().time_since_epoch())
                    .count();
  o.evaluator_id = evaluator_id;

  apply_outcome(state_, o);
  ++match_counts_[o.model_a];
  ++match_counts_[o.model_b];
  append_event(json{{"event", "vote"},
                    {"match_id", o.match_id},
                    {"model_a", o.model_a},
                    {"model_b", o.model_b},
                    {"prompt", o.prompt_text},
                    {"image_a", o.image_a},
                    {"image_b", o.image_b},
                    {"score_a", o.score_a},
                    {"timestamp", o.timestamp},
                    {"evaluator_id", o.evaluator_id}});
  match.reveal = make_reveal(match, choice);
  return *match.reveal;
}

std::variant<BlindedMatch, MatchReveal> Arena::lookup(const std::string& match_id) const {
  std::shared_lock lock(mutex_);
  auto it = matches_.find(match_id);
  if (it == matches_.end()) throw Error(ErrorCode::not_found, "unknown match " + match_id);
  if (it->second.reveal) return *it->second.reveal;
  return it->second.view;
}

std::string Arena::image_ref(const std::string& match_id, Side side) const {
  std::shared_lock lock(mutex_);
  auto it = matches_.find(match_id);
  if (it == matches_.end()) throw Error(ErrorCode::not_found, "unknown match " + match_id);
  return side == Side::left ? it->second.left_ref : it->second.right_ref;
}

std::vector<LeaderboardRow> Arena::leaderboard() const {
  std::shared_lock lock(mutex_);
  std::vector<LeaderboardRow> rows;
  for (const auto& [model, rating] : state_.ratings) {
    auto count = match_counts_.find(model);
    rows.push_back({model, rating, count == match_counts_.end() ? 0 : count->second});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.rating > b.rating; });
  return rows;
}

EloState Arena::snapshot() const {
  std::shared_lock lock(mutex_);
  return state_;
}

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::duplicate_vote:
    case ErrorCode::registration: return 409;
    case ErrorCode::pool: return 422;
    case ErrorCode::backend:
    case ErrorCode::generation: return 502;
    case ErrorCode::io: return 500;
    default: return 400;
  }
}

ApiResponse error_response(int status, std::string_view code, const std::string& message) {
  return {status, json{{"error", {{"code", code}, {"message", message}}}}};
}

json to_json(const BlindedMatch& m, bool allow_draws) {
  return json{{"match_id", m.match_id},
              {"prompt", m.prompt_text},
              {"state", "pending"},
              {"left_image", m.left_image},
              {"right_image", m.right_image},
              {"allow_draws", allow_draws}};
}

json to_json(const MatchReveal& r) {
  return json{{"match_id", r.match_id},
              {"prompt", r.prompt_text},
              {"state", "submitted"},
              {"choice", to_string(r.choice)},
              {"left_model", r.left_model},
              {"right_model", r.right_model},
              {"left_rating", r.left_rating},
              {"right_rating", r.right_rating}};
}

std::vector<std::string_view> split_path(std::string_view path) {
  if (auto q = path.find('?'); q != std::string_view::npos) path = path.substr(0, q);
  std::vector<std::string_view> parts;
  while (!path.empty()) {
    while (!path.empty() && path.front() == '/') path.remove_prefix(1);
    if (path.empty()) break;
    const auto end = path.find('/');
    parts.push_back(path.substr(0, end));
    path = end == std::string_view::npos ? std::string_view{} : path.substr(end);
  }
  return parts;
}

json parse_body(std::string_view body) {
  if (body.empty()) return json::object();
  auto doc = json::parse(body);
  if (!doc.is_object()) throw Error(ErrorCode::invalid_input, "request body must be a JSON object");
  return doc;
}

}  // namespace

ApiResponse handle_request(Arena& arena, std::string_view method, std::string_view path,
                           std::string_view body) {
  const auto parts = split_path(path);
  try {
    if (method == "GET" && parts.size() == 1 && parts[0] == "capabilities") {
      const auto& c = arena.config();
      return {200, json{{"allow_draws", c.allow_draws},
                        {"k_factor", c.k_factor},
                        {"initial_rating", c.initial_rating},
                        {"instructions", c.instructions}}};
    }
    if (method == "GET" && parts.size() == 1 && parts[0] == "ratings") {
      json rows = json::array();
      for (const auto& r : arena.leaderboard()) {
        rows.push_back({{"model", r.model}, {"rating", r.rating}, {"matches", r.matches}});
      }
      return {200, json{{"k_factor", arena.config().k_factor}, {"ratings", rows}}};
    }
    if (method == "POST" && parts.size() == 1 && parts[0] == "models") {
      const auto doc = parse_body(body);
      const auto id = doc.at("model_id").get<std::string>();
      arena.register_model(id, doc.value("backend", std::string{}));
      return {201, json{{"model_id", id}, {"rating", arena.config().initial_rating}}};
    }
    if (method == "POST" && parts.size() == 1 && parts[0] == "matches") {
      const auto doc = parse_body(body);
      const auto prompt = doc.value("prompt", std::string{});
      std::map<std::string, std::string> images;
      if (doc.contains("images")) images = doc.at("images").get<std::map<std::string, std::string>>();
      const auto match = arena.create_match(prompt, images);
      return {201, to_json(match, arena.config().allow_draws)};
    }
    if (parts.size() >= 2 && parts[0] == "matches") {
      const std::string id(parts[1]);
      if (method == "GET" && parts.size() == 2) {
        auto found = arena.lookup(id);
        if (auto* blinded = std::get_if<BlindedMatch>(&found)) {
          return {200, to_json(*blinded, arena.config().allow_draws)};
        }
        return {200, to_json(std::get<MatchReveal>(found))};
      }
      if (method == "POST" && parts.size() == 3 && parts[2] == "vote") {
        const auto doc = parse_body(body);
        const auto choice = vote_choice_from_string(doc.value("choice", std::string{}));
        return {200, to_json(arena.vote(id, choice, doc.value("evaluator_id", std::string{})))};
      }
    }
    return error_response(404, "not_found", "no route for " + std::string(method) + " " + std::string(path));
  } catch (const Error& e) {
    return error_response(status_for(e.code()), to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    return error_response(400, "invalid_input", e.what());
  }
}

}  // namespace vleu
