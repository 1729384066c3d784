#pragma once

/**
 * @file records.hpp
 * @brief On-disk formats.
 *
 * Record streams (prompts, embeddings, image manifests) are JSON Lines, one per
 * line. Similarity matrices and reports are single JSON documents. Doubles
 * are written with the shortest decimal that parses back to the same bits,
 * so a read/write cycle is lossless.
 */

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vleu/error.hpp"
#include "vleu/generation.hpp"
#include "vleu/metric.hpp"
#include "vleu/sampler.hpp"
#include "vleu/scoring.hpp"

namespace vleu {

void to_json(nlohmann::json& j, const PromptTemplate& t);
void from_json(const nlohmann::json& j, PromptTemplate& t);
void to_json(nlohmann::json& j, const SampledPrompt& p);
void from_json(const nlohmann::json& j, SampledPrompt& p);
void to_json(nlohmann::json& j, const Embedding& e);
void from_json(const nlohmann::json& j, Embedding& e);
void to_json(nlohmann::json& j, const ImageArtifact& a);
void from_json(const nlohmann::json& j, ImageArtifact& a);
void to_json(nlohmann::json& j, const Distribution& d);
void from_json(const nlohmann::json& j, Distribution& d);

/// Identifiers recorded next to a matrix so a stored grid is self-describing.
struct MatrixProvenance {
  std::string scorer_model;
  std::string sampler_model;
};

nlohmann::json matrix_to_json(const SimilarityMatrix& matrix, const MatrixProvenance& meta = {});
SimilarityMatrix matrix_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const VleuReport& report);
VleuReport report_from_json(const nlohmann::json& j);

/// Writes via a temporary file and rename.
void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json_file(const std::filesystem::path& path);

template <typename T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& records) {
  std::string out;
  for (const auto& r : records) {
    out += nlohmann::json(r).dump();
    out += '\n';
  }
  write_text_file(path, out);
}

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::vector<T> records;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(nlohmann::json::parse(line).get<T>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::invalid_input,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace vleu
