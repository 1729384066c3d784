// vleu: command-line front end for the evaluation pipeline and the arena.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "vleu/analysis.hpp"
#include "vleu/arena.hpp"
#include "vleu/pipeline.hpp"
#include "vleu/records.hpp"
#include "vleu/scoring.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vleu;

namespace {

bool is_url(const std::string& s) {
  return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0;
}

// Options shared by several subcommands. Optional fields override a --config file.
struct Options {
  std::string config_path;
  std::string prompts;
  std::optional<std::size_t> n;
  std::string preset;
  std::optional<double> temperature;
  std::string keyword;
  std::string property;
  bool include_keyword = false;
  bool case_insensitive = false;
  std::string backend_chat;
  std::string chat_model;
  std::string backend_t2i;
  std::string backend_embed;
  std::string embed_model;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool skip_failures = false;
  bool random_seeds = false;
  std::string tag;
  std::size_t parallel = 1;

  std::string manifest;
  std::string texts;
  std::string images;
  std::string matrix;
  std::vector<std::size_t> sizes;
  std::size_t repeats = 1;
  std::vector<std::string> checkpoints;
  std::vector<std::size_t> steps;
  std::size_t top = 0;

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string arena_log;
  std::vector<std::string> models;
  bool no_draws = false;
  std::optional<double> k_factor;
};

ScorerDescriptor scorer_from(const std::string& endpoint, const std::string& model) {
  ScorerDescriptor s;
  s.kind = is_url(endpoint) ? ScorerKind::http : ScorerKind::file;
  s.endpoint = endpoint;
  s.model = model;
  return s;
}

PromptTemplate template_from(const Options& o) {
  if (o.keyword.empty()) return {};
  if (o.property.empty()) return {TemplateKind::constrained, o.keyword, ""};
  return {TemplateKind::constrained_with_property, o.keyword, o.property};
}

RunConfig build_config(const Options& o) {
  RunConfig c;
  if (!o.config_path.empty()) {
    json doc = read_json_file(o.config_path);
    c = config_from_json(doc);
    if (!doc.contains("run_dir")) c.run_dir.clear();
  }
  if (o.preset == "drift") c.sampler.num = kDriftPromptCount;
  if (o.preset == "comparison") c.sampler.num = kComparisonPromptCount;
  if (o.n) c.sampler.num = *o.n;
  if (!o.keyword.empty()) c.prompt_template = template_from(o);
  if (o.include_keyword) c.sampler.include_keyword = true;
  if (o.case_insensitive) c.sampler.keyword_case_insensitive = true;
  if (o.temperature) c.temperature = *o.temperature;
  if (!o.backend_chat.empty()) c.chat_backend = o.backend_chat;
  if (!o.chat_model.empty()) c.chat_model = o.chat_model;
  if (c.sampler.backend_id.empty()) c.sampler.backend_id = c.chat_model;
  if (!o.prompts.empty()) c.prompts_path = o.prompts;
  if (!o.backend_t2i.empty()) c.t2i_backend = o.backend_t2i;
  if (!o.backend_embed.empty()) c.scorer = scorer_from(o.backend_embed, o.embed_model);
  else if (!o.embed_model.empty()) c.scorer.model = o.embed_model;
  if (!o.out.empty()) c.run_dir = o.out;
  if (o.skip_failures) c.failure_policy = FailurePolicy::skip;
  if (o.random_seeds) c.random_seeds = true;
  if (!o.tag.empty()) c.checkpoint_tag = o.tag;
  if (o.parallel > 1) c.parallelism = c.sampler.parallelism = o.parallel;
  return c;
}

std::vector<SampledPrompt> load_prompts(const std::string& path) {
  if (fs::path(path).extension() == ".jsonl") return read_jsonl<SampledPrompt>(path);
  // Plain text: one prompt per non-empty line.
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path);
  std::vector<SampledPrompt> out;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    SampledPrompt p;
    p.id = out.size();
    p.text = line;
    out.push_back(std::move(p));
  }
  return out;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_text_file(out, text);
  }
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorCode::configuration, std::string(flag) + " is required");
}

void print_report(const VleuReport& r) {
  std::cout << "vleu\t" << json(r.vleu).dump() << "\nN\t" << r.n_texts << "\nM\t" << r.n_images
            << "\nt\t" << json(r.temperature).dump() << '\n';
}

int cmd_sample(const Options& o) {
  auto config = build_config(o);
  validate(config);
  auto chat = make_chat_backend(config.chat_backend, config.chat_model);
  if (!chat) throw Error(ErrorCode::configuration, "--backend-chat is required");
  const auto prompts = sample_prompts(config.sampler, config.prompt_template, *chat);
  if (o.out.empty()) {
    for (const auto& p : prompts) std::cout << json(p).dump() << '\n';
  } else {
    write_jsonl(o.out, prompts);
  }
  return 0;
}

int cmd_generate(const Options& o) {
  require(o.prompts, "--prompts");
  require(o.backend_t2i, "--backend-t2i");
  const auto prompts = load_prompts(o.prompts);
  const fs::path manifest = o.out.empty() ? fs::path("manifest.jsonl") : fs::path(o.out);
  auto backend = make_generation_backend(o.backend_t2i, manifest.parent_path() / "images");
  GenerationOptions opts;
  opts.policy = o.skip_failures ? FailurePolicy::skip : FailurePolicy::abort;
  opts.checkpoint_tag = o.tag;
  opts.random_seeds = o.random_seeds;
  opts.parallelism = o.parallel;
  const auto artifacts = obtain_images(prompts, backend.get(), opts, manifest);
  std::cout << artifacts.size() << " images in " << manifest.string() << '\n';
  return 0;
}

int cmd_embed(const Options& o) {
  require(o.backend_embed, "--backend-embed");
  require(o.out, "--out");
  std::vector<EmbeddingRequest> requests;
  if (!o.prompts.empty()) {
    requests = text_requests(load_prompts(o.prompts));
  } else if (!o.manifest.empty()) {
    requests = image_requests(read_jsonl<ImageArtifact>(o.manifest));
  } else {
    throw Error(ErrorCode::configuration, "--prompts or --manifest is required");
  }
  const auto scorer = scorer_from(o.backend_embed, o.embed_model);
  auto backend = make_embedding_backend(scorer);
  const auto out = obtain_embeddings(requests, backend.get(), scorer.batch_size, o.out);
  std::cout << out.size() << " embeddings in " << o.out << '\n';
  return 0;
}

int cmd_score(const Options& o) {
  require(o.texts, "--texts");
  require(o.images, "--images");
  const auto texts = read_jsonl<Embedding>(o.texts);
  const auto images = read_jsonl<Embedding>(o.images);
  const auto matrix = build_similarity_matrix(texts, images);
  MatrixProvenance meta;
  if (!images.empty()) meta.scorer_model = images.front().model;
  emit(o.out, matrix_to_json(matrix, meta).dump(2) + "\n");
  return 0;
}

int cmd_vleu(const Options& o) {
  require(o.matrix, "--matrix");
  const auto matrix = matrix_from_json(read_json_file(o.matrix));
  const auto report = vleu_score(matrix, o.temperature.value_or(kDefaultTemperature));
  if (!o.out.empty()) write_json_file(o.out, report_to_json(report));
  print_report(report);
  return 0;
}

int cmd_run(const Options& o) {
  const auto config = build_config(o);
  if (config.run_dir.empty()) throw Error(ErrorCode::configuration, "--out (run directory) is required");
  print_report(run_evaluation(config));
  return 0;
}

int cmd_sweep(const Options& o) {
  const auto config = build_config(o);
  if (config.run_dir.empty()) throw Error(ErrorCode::configuration, "--out (run directory) is required");
  if (o.checkpoints.empty()) throw Error(ErrorCode::configuration, "--checkpoints is required");
  auto owned = OwnedBackends::from_config(config);
  const auto series = checkpoint_sweep(config, o.checkpoints, owned.view(), o.steps);
  std::cout << series.to_table();
  return 0;
}

int cmd_stability(const Options& o) {
  require(o.matrix, "--matrix");
  if (o.sizes.empty()) throw Error(ErrorCode::configuration, "--sizes is required");
  const auto matrix = matrix_from_json(read_json_file(o.matrix));
  const auto rows = stability_report(matrix, o.sizes, o.repeats, o.seed.value_or(0),
                                     o.temperature.value_or(kDefaultTemperature));
  emit(o.out, stability_table(rows));
  return 0;
}

int cmd_tokens(const Options& o) {
  require(o.prompts, "--prompts");
  std::vector<std::string> texts;
  for (auto& p : load_prompts(o.prompts)) texts.push_back(std::move(p.text));
  auto counts = token_frequency(texts);
  if (o.top > 0 && counts.size() > o.top) counts.resize(o.top);
  std::string table = "token\tcount\n";
  for (const auto& [token, n] : counts) table += token + '\t' + std::to_string(n) + '\n';
  emit(o.out, table);
  return 0;
}

std::atomic<ArenaServer*> g_server{nullptr};

extern "C" void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

int cmd_arena_serve(const Options& o) {
  ArenaConfig config;
  if (!o.arena_log.empty()) config.log_path = o.arena_log;
  if (o.k_factor) config.k_factor = *o.k_factor;
  config.allow_draws = !o.no_draws;
  config.seed = o.seed;
  if (!o.out.empty()) config.image_dir = o.out;
  Arena arena(config);

  // "name" or "name=backend". Models already in a replayed log are kept.
  const auto known = arena.snapshot().ratings;
  for (const auto& entry : o.models) {
    const auto eq = entry.find('=');
    const auto id = entry.substr(0, eq);
    if (known.count(id)) continue;
    arena.register_model(id, eq == std::string::npos ? std::string{} : entry.substr(eq + 1));
  }

  ArenaServer server(arena);
  const int port = server.bind(o.host, o.port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "arena listening on http://" << o.host << ':' << port << std::endl;
  server.serve();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("vleu"));

  CLI::App app{"VLEU: prompt sampling, image generation and diversity scoring"};
  app.require_subcommand(1);
  Options o;
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  auto common_run = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--prompts", o.prompts, "Existing prompt corpus (.jsonl or one prompt per line)");
    sub->add_option("--n", o.n, "Number of prompts to sample");
    sub->add_option("--preset", o.preset, "Prompt count preset")
        ->check(CLI::IsMember({"drift", "comparison"}));
    sub->add_option("--temperature", o.temperature, "Softmax temperature (default 0.01)");
    sub->add_option("--keyword", o.keyword, "Class word for the constrained template");
    sub->add_option("--property", o.property, "Property for the constrained template");
    sub->add_flag("--include-keyword", o.include_keyword, "Reject replies missing the keyword");
    sub->add_flag("--ignore-case", o.case_insensitive, "Case-insensitive keyword check");
    sub->add_option("--backend-chat", o.backend_chat, "Chat backend: URL, counter[:prefix] or scripted:<file>");
    sub->add_option("--chat-model", o.chat_model, "Chat model name");
    sub->add_option("--backend-t2i", o.backend_t2i, "Image backend: URL, directory or path template");
    sub->add_option("--backend-embed", o.backend_embed, "Embedding backend: URL or embedding store");
    sub->add_option("--embed-model", o.embed_model, "Embedding model name");
    sub->add_option("--out", o.out, "Run directory");
    sub->add_flag("--skip-failures", o.skip_failures, "Drop prompts whose image fails");
    sub->add_flag("--random-seeds", o.random_seeds, "Draw generation seeds from entropy");
    sub->add_option("--tag", o.tag, "Checkpoint tag");
    sub->add_option("--parallel", o.parallel, "Concurrent backend requests")->check(CLI::PositiveNumber);
  };

  auto* sample = app.add_subcommand("sample", "Sample prompts from a chat model");
  sample->add_option("--n", o.n, "Number of prompts")->required();
  sample->add_option("--keyword", o.keyword, "Class word for the constrained template");
  sample->add_option("--property", o.property, "Property for the constrained template");
  sample->add_flag("--include-keyword", o.include_keyword, "Reject replies missing the keyword");
  sample->add_flag("--ignore-case", o.case_insensitive, "Case-insensitive keyword check");
  sample->add_option("--backend-chat", o.backend_chat, "Chat backend")->required();
  sample->add_option("--chat-model", o.chat_model, "Chat model name");
  sample->add_option("--parallel", o.parallel, "Concurrent conversations")->check(CLI::PositiveNumber);
  sample->add_option("--out", o.out, "Output corpus (.jsonl); stdout if omitted");

  auto* generate = app.add_subcommand("generate", "Generate one image per prompt");
  generate->add_option("--prompts", o.prompts, "Prompt corpus")->required();
  generate->add_option("--backend-t2i", o.backend_t2i, "Image backend")->required();
  generate->add_option("--out", o.out, "Manifest file (default manifest.jsonl)");
  generate->add_option("--tag", o.tag, "Checkpoint tag");
  generate->add_flag("--skip-failures", o.skip_failures, "Drop prompts whose image fails");
  generate->add_flag("--random-seeds", o.random_seeds, "Draw generation seeds from entropy");
  generate->add_option("--parallel", o.parallel, "Concurrent requests")->check(CLI::PositiveNumber);

  auto* embed = app.add_subcommand("embed", "Embed prompts or images");
  embed->add_option("--prompts", o.prompts, "Prompt corpus to embed as text");
  embed->add_option("--manifest", o.manifest, "Image manifest to embed as images");
  embed->add_option("--backend-embed", o.backend_embed, "Embedding backend")->required();
  embed->add_option("--embed-model", o.embed_model, "Embedding model name");
  embed->add_option("--out", o.out, "Embedding store (.jsonl)")->required();

  auto* score = app.add_subcommand("score", "Build the text x image similarity matrix");
  score->add_option("--texts", o.texts, "Text embeddings")->required();
  score->add_option("--images", o.images, "Image embeddings")->required();
  score->add_option("--out", o.out, "Matrix file; stdout if omitted");

  auto* vleu_cmd = app.add_subcommand("vleu", "Score a similarity matrix");
  vleu_cmd->add_option("--matrix", o.matrix, "Matrix file")->required();
  vleu_cmd->add_option("--temperature", o.temperature, "Softmax temperature (default 0.01)");
  vleu_cmd->add_option("--out", o.out, "Write the full report here");

  auto* run = app.add_subcommand("run", "Full pipeline into a run directory");
  common_run(run);

  auto* sweep = app.add_subcommand("sweep", "Score a fixed corpus across checkpoints");
  common_run(sweep);
  sweep->add_option("--checkpoints", o.checkpoints, "Checkpoint tags in order")->delimiter(',');
  sweep->add_option("--steps", o.steps, "Training step per checkpoint")->delimiter(',');

  auto* stability = app.add_subcommand("stability", "Sample-size study on a cached matrix");
  stability->add_option("--matrix", o.matrix, "Square matrix file")->required();
  stability->add_option("--sizes", o.sizes, "Subset sizes")->delimiter(',')->required();
  stability->add_option("--repeats", o.repeats, "Draws per size")->check(CLI::PositiveNumber);
  stability->add_option("--seed", o.seed, "Subset seed");
  stability->add_option("--temperature", o.temperature, "Softmax temperature (default 0.01)");
  stability->add_option("--out", o.out, "Table file; stdout if omitted");

  auto* tokens = app.add_subcommand("tokens", "Token frequencies of a prompt corpus");
  tokens->add_option("--prompts", o.prompts, "Prompt corpus")->required();
  tokens->add_option("--top", o.top, "Keep the most frequent tokens only");
  tokens->add_option("--out", o.out, "Table file; stdout if omitted");

  auto* arena = app.add_subcommand("arena", "Blind pairwise comparison service");
  arena->require_subcommand(1);
  auto* serve = arena->add_subcommand("serve", "Serve the arena HTTP API");
  serve->add_option("--host", o.host, "Bind address");
  serve->add_option("--port", o.port, "Port (0 picks a free one)");
  serve->add_option("--log", o.arena_log, "Match log (JSONL), replayed on start");
  serve->add_option("--model", o.models, "Model to register: name or name=<t2i backend>");
  serve->add_option("--k-factor", o.k_factor, "Elo K factor (default 32)");
  serve->add_flag("--no-draws", o.no_draws, "Reject draw votes");
  serve->add_option("--seed", o.seed, "Pairing seed");
  serve->add_option("--out", o.out, "Directory for generated images");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  try {
    if (*sample) return cmd_sample(o);
    if (*generate) return cmd_generate(o);
    if (*embed) return cmd_embed(o);
    if (*score) return cmd_score(o);
    if (*vleu_cmd) return cmd_vleu(o);
    if (*run) return cmd_run(o);
    if (*sweep) return cmd_sweep(o);
    if (*stability) return cmd_stability(o);
    if (*tokens) return cmd_tokens(o);
    if (*serve) return cmd_arena_serve(o);
  } catch (const SamplingAborted& e) {
    std::cerr << "error: " << e.what() << " (" << e.partial().size() << " prompts collected)\n";
    return exit_code_for(e.code());
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 2;
}
