#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <nlohmann/json.hpp>

#include "local_server.hpp"
#include "vleu/embedding_backend.hpp"
#include "vleu/error.hpp"
#include "vleu/records.hpp"
#include "vleu/scoring.hpp"

using namespace vleu;

namespace {

Embedding text(std::string id, std::vector<double> v, std::string model = "clip") {
  return make_embedding(std::move(id), EmbeddingKind::text, std::move(model), v);
}
Embedding image(std::string id, std::vector<double> v, std::string model = "clip") {
  return make_embedding(std::move(id), EmbeddingKind::image, std::move(model), v);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected vleu::Error");
  return ErrorCode::io;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> g;
  std::vector<double> v(dim);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST_CASE("normalize: 3-4-5") {
  std::vector<double> v{3, 4};
  auto u = normalize(v);
  CHECK(std::abs(u[0] - 0.6) < 1e-15);
  CHECK(std::abs(u[1] - 0.8) < 1e-15);
}

TEST_CASE("normalize: idempotent on unit vectors") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    auto once = normalize(random_vector(rng, 16));
    auto twice = normalize(once);
    double norm = 0;
    for (std::size_t i = 0; i < once.size(); ++i) {
      CHECK(std::abs(once[i] - twice[i]) < 1e-12);
      norm += twice[i] * twice[i];
    }
    CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-12);
  }
}

TEST_CASE("normalize: errors") {
  CHECK(code_of([] { normalize(std::vector<double>{0, 0, 0}); }) == ErrorCode::degenerate_embedding);
  CHECK(code_of([] { normalize(std::vector<double>{1, std::nan("")}); }) ==
        ErrorCode::invalid_embedding);
}

TEST_CASE("similarity: basic entries") {
  std::vector<Embedding> texts{text("a", {0.6, 0.8}), text("b", {1, 0})};
  std::vector<Embedding> images{image("x", {0.6, 0.8}), image("y", {0, 1}), image("z", {0.8, 0.6})};
  auto s = build_similarity_matrix(texts, images);
  CHECK(s.rows() == 2);
  CHECK(s.cols() == 3);
  CHECK(s.at(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.at(1, 1) == 0.0);
  CHECK(std::abs(s.at(0, 2) - 0.96) < 1e-15);
  CHECK(s.text_ids() == std::vector<std::string>{"a", "b"});
  CHECK(s.image_ids() == std::vector<std::string>{"x", "y", "z"});
}

TEST_CASE("similarity: shape and configuration errors") {
  std::vector<Embedding> texts{text("a", {1, 0})};
  std::vector<Embedding> images3{image("x", {1, 0, 0})};
  CHECK(code_of([&] { build_similarity_matrix(texts, images3); }) == ErrorCode::shape);

  std::vector<Embedding> mixed{text("a", {1, 0}), text("b", {0, 1}, "other")};
  std::vector<Embedding> images{image("x", {1, 0})};
  CHECK(code_of([&] { build_similarity_matrix(mixed, images); }) == ErrorCode::configuration);

  std::vector<Embedding> wrong_kind{image("a", {1, 0})};
  CHECK(code_of([&] { build_similarity_matrix(wrong_kind, images); }) == ErrorCode::configuration);
  CHECK(code_of([&] { build_similarity_matrix({}, images); }) == ErrorCode::empty_input);
}

TEST_CASE("similarity: drifted norms are re-normalized") {
  Embedding drifted{"a", EmbeddingKind::text, "clip", {0.6 * 1.01, 0.8 * 1.01}};
  std::vector<Embedding> texts{drifted};
  std::vector<Embedding> images{image("x", {0.6, 0.8})};
  auto s = build_similarity_matrix(texts, images);
  CHECK(std::abs(s.at(0, 0) - 1.0) < 1e-12);
}

TEST_CASE("similarity: bounds, symmetry and batch independence") {
  std::mt19937_64 rng(11);
  std::vector<Embedding> texts;
  std::vector<Embedding> images;
  for (int k = 0; k < 12; ++k) {
    texts.push_back(text("t" + std::to_string(k), random_vector(rng, 32)));
    images.push_back(image("i" + std::to_string(k), random_vector(rng, 32)));
  }
  auto full = build_similarity_matrix(texts, images);
  for (double v : full.values()) {
    CHECK(v >= -1.0 - 1e-6);
    CHECK(v <= 1.0 + 1e-6);
  }

  // Swapping the roles of a pair transposes the entry.
  for (std::size_t k = 0; k < 12; ++k) {
    std::vector<Embedding> t{{"p", EmbeddingKind::text, "clip", images[k].vector}};
    std::vector<Embedding> i{{"q", EmbeddingKind::image, "clip", texts[k].vector}};
    CHECK(build_similarity_matrix(t, i).at(0, 0) == full.at(k, k));
  }

  // Column blocks computed separately are bit-identical.
  for (std::size_t block : {1u, 5u, 7u}) {
    for (std::size_t start = 0; start < images.size(); start += block) {
      const std::size_t end = std::min(images.size(), start + block);
      std::vector<Embedding> part(images.begin() + start, images.begin() + end);
      auto s = build_similarity_matrix(texts, part);
      for (std::size_t i = 0; i < texts.size(); ++i) {
        for (std::size_t j = start; j < end; ++j) CHECK(s.at(i, j - start) == full.at(i, j));
      }
    }
  }
}

TEST_CASE("embedding store: lossless round trip") {
  std::mt19937_64 rng(5);
  std::vector<Embedding> stored;
  for (int k = 0; k < 50; ++k) {
    stored.push_back(make_embedding("e" + std::to_string(k), k % 2 ? EmbeddingKind::image : EmbeddingKind::text,
                                    "clip-vit-b-16", random_vector(rng, 24)));
  }
  const auto path = std::filesystem::temp_directory_path() / "vleu_scoring_store.jsonl";
  write_jsonl(path, stored);
  auto loaded = read_jsonl<Embedding>(path);
  CHECK(loaded == stored);

  FileEmbeddingBackend backend(path);
  std::vector<EmbeddingRequest> requests{{"e3", EmbeddingKind::image, ""}, {"e0", EmbeddingKind::text, ""}};
  auto got = backend.embed(requests);
  CHECK(got[0] == stored[3]);
  CHECK(got[1] == stored[0]);
  std::vector<EmbeddingRequest> missing{{"e3", EmbeddingKind::text, ""}};
  CHECK(code_of([&] { backend.embed(missing); }) == ErrorCode::not_found);
  std::filesystem::remove(path);
}

TEST_CASE("embedding store: dim mismatch rejected") {
  nlohmann::json bad{{"id", "x"}, {"kind", "text"}, {"model", "m"}, {"dim", 3}, {"vector", {1.0, 0.0}}};
  CHECK(code_of([&] { bad.get<Embedding>(); }) == ErrorCode::shape);
}

TEST_CASE("http embedding backend: batches and echoed model") {
  testing::LocalServer service;
  std::vector<std::size_t> batch_sizes;
  service.server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    batch_sizes.push_back(body.at("items").size());
    nlohmann::json out{{"model", "openclip-vit-h-14"}, {"embeddings", nlohmann::json::array()}};
    for (const auto& item : body.at("items")) {
      const double len = static_cast<double>(item.at("content").get<std::string>().size());
      out["embeddings"].push_back({{"id", item.at("id")}, {"dim", 2}, {"vector", {len, 1.0}}});
    }
    res.set_content(out.dump(), "application/json");
  });
  const auto url = service.start();

  HttpEmbeddingBackend backend({url, "requested"});
  std::vector<EmbeddingRequest> requests;
  for (int k = 0; k < 5; ++k) {
    requests.push_back({std::to_string(k), EmbeddingKind::text, std::string(static_cast<std::size_t>(k), 'x')});
  }
  auto out = embed_all(backend, requests, 2);
  CHECK(batch_sizes == std::vector<std::size_t>{2, 2, 1});
  REQUIRE(out.size() == 5);
  CHECK(out[3].model == "openclip-vit-h-14");
  CHECK(backend.model_id() == "openclip-vit-h-14");
  CHECK(std::abs(out[3].vector[0] - 3.0 / std::sqrt(10.0)) < 1e-15);
  CHECK(out[0].vector == std::vector<double>{0.0, 1.0});
}

TEST_CASE("http embedding backend: service errors surface as backend errors") {
  testing::LocalServer service;
  service.server.Post("/embed", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  const auto url = service.start();
  HttpEmbeddingBackend backend({url, "m"});
  std::vector<EmbeddingRequest> requests{{"0", EmbeddingKind::text, "hi"}};
  CHECK(code_of([&] { backend.embed(requests); }) == ErrorCode::backend);
}
