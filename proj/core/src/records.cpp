#include "vleu/records.hpp"

#include <sstream>

namespace vleu {

using nlohmann::json;

void to_json(json& j, const PromptTemplate& t) {
  j = json{{"kind", to_string(t.kind)}};
  if (!t.class_word.empty()) j["class_word"] = t.class_word;
  if (!t.property.empty()) j["property"] = t.property;
}

void from_json(const json& j, PromptTemplate& t) {
  t.kind = template_kind_from_string(j.at("kind").get<std::string>());
  t.class_word = j.value("class_word", std::string{});
  t.property = j.value("property", std::string{});
}

void to_json(json& j, const SampledPrompt& p) {
  j = json{{"id", p.id},
           {"text", p.text},
           {"template", p.tmpl},
           {"conversation_index", p.conversation_index},
           {"round", p.round},
           {"sampler_model", p.sampler_model},
           {"keyword_retries", p.keyword_retries}};
}

void from_json(const json& j, SampledPrompt& p) {
  p.id = j.at("id").get<std::size_t>();
  p.text = j.at("text").get<std::string>();
  p.tmpl = j.value("template", PromptTemplate{});
  p.conversation_index = j.value("conversation_index", std::size_t{0});
  p.round = j.value("round", std::size_t{1});
  p.sampler_model = j.value("sampler_model", std::string{});
  p.keyword_retries = j.value("keyword_retries", std::size_t{0});
  if (p.text.empty()) throw Error(ErrorCode::invalid_input, "prompt " + std::to_string(p.id) + " is empty");
}

void to_json(json& j, const Embedding& e) {
  j = json{{"id", e.id},
           {"kind", to_string(e.kind)},
           {"model", e.model},
           {"dim", e.dim()},
           {"vector", e.vector}};
}

void from_json(const json& j, Embedding& e) {
  e.id = j.at("id").get<std::string>();
  e.kind = embedding_kind_from_string(j.at("kind").get<std::string>());
  e.model = j.value("model", std::string{});
  e.vector = j.at("vector").get<std::vector<double>>();
  if (j.contains("dim") && j.at("dim").get<std::size_t>() != e.vector.size()) {
    throw Error(ErrorCode::shape, "embedding " + e.id + " dim does not match its vector");
  }
  ensure_unit(e);
}

void to_json(json& j, const ImageArtifact& a) {
  j = json{{"prompt_id", a.prompt_id}, {"image_ref", a.image_ref}};
  if (!a.checkpoint_tag.empty()) j["checkpoint_tag"] = a.checkpoint_tag;
  if (a.seed) j["seed"] = *a.seed;
}

void from_json(const json& j, ImageArtifact& a) {
  a.prompt_id = j.at("prompt_id").get<std::size_t>();
  a.image_ref = j.at("image_ref").get<std::string>();
  a.checkpoint_tag = j.value("checkpoint_tag", std::string{});
  if (j.contains("seed")) a.seed = j.at("seed").get<std::uint64_t>();
}

void to_json(json& j, const Distribution& d) { j = d.probs; }
void from_json(const json& j, Distribution& d) { d.probs = j.get<std::vector<double>>(); }

json matrix_to_json(const SimilarityMatrix& matrix, const MatrixProvenance& meta) {
  json rows = json::array();
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < matrix.cols(); ++j) row.push_back(matrix.at(i, j));
    rows.push_back(std::move(row));
  }
  json doc{{"shape", {matrix.rows(), matrix.cols()}},
           {"text_ids", matrix.text_ids()},
           {"image_ids", matrix.image_ids()},
           {"values", std::move(rows)}};
  if (!meta.scorer_model.empty()) doc["scorer_model"] = meta.scorer_model;
  if (!meta.sampler_model.empty()) doc["sampler_model"] = meta.sampler_model;
  return doc;
}

SimilarityMatrix matrix_from_json(const json& doc) {
  try {
    auto text_ids = doc.at("text_ids").get<std::vector<std::string>>();
    auto image_ids = doc.at("image_ids").get<std::vector<std::string>>();
    std::vector<double> values;
    values.reserve(text_ids.size() * image_ids.size());
    const auto& rows = doc.at("values");
    if (rows.size() != text_ids.size()) {
      throw Error(ErrorCode::shape, "matrix row count does not match text_ids");
    }
    for (const auto& row : rows) {
      if (row.size() != image_ids.size()) {
        throw Error(ErrorCode::shape, "matrix row length does not match image_ids");
      }
      for (const auto& v : row) values.push_back(v.get<double>());
    }
    return SimilarityMatrix(std::move(text_ids), std::move(image_ids), std::move(values));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_input, std::string("malformed matrix document: ") + e.what());
  }
}

json report_to_json(const VleuReport& r) {
  return json{{"vleu", r.vleu},
              {"per_image_kl", r.per_image_kl},
              {"marginal", r.marginal},
              {"temperature", r.temperature},
              {"n_texts", r.n_texts},
              {"n_images", r.n_images},
              {"config_fingerprint", r.config_fingerprint}};
}

VleuReport report_from_json(const json& j) {
  try {
    VleuReport r;
    r.vleu = j.at("vleu").get<double>();
    r.per_image_kl = j.at("per_image_kl").get<std::vector<double>>();
    r.marginal = j.at("marginal").get<Distribution>();
    r.temperature = j.at("temperature").get<double>();
    r.n_texts = j.at("n_texts").get<std::size_t>();
    r.n_images = j.at("n_images").get<std::size_t>();
    r.config_fingerprint = j.value("config_fingerprint", std::string{});
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_input, std::string("malformed report document: ") + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << contents;
    if (!out) throw Error(ErrorCode::io, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

json read_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::invalid_input, path.string() + ": " + e.what());
  }
}

}  // namespace vleu
