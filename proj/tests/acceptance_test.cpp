// Acceptance run: one PASS/FAIL line per headline criterion. Exit status is
// non-zero when any criterion fails. Tolerances are fixed here, not tuned.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pipeline_fixture.hpp"
#include "test_helpers.hpp"
#include "vleu/arena.hpp"
#include "vleu/elo.hpp"
#include "vleu/metric.hpp"
#include "vleu/sampler.hpp"

using namespace vleu;

namespace {

constexpr double kOracleTol = 1e-9;
constexpr double kOracleBudgetSeconds = 10.0;
constexpr double kFixtureTol = 1e-6;
constexpr double kExactTol = 1e-9;
constexpr double kInvarianceTol = 1e-9;
constexpr double kEloTol = 1e-3;
constexpr double kPerfBudgetSeconds = 1.0;
// Rounding slack for the upper bounds; the lower bounds are checked exactly.
constexpr double kBoundSlack = 1e-12;

// exp(KL(softmax(1, 0) || uniform)) to 20 digits, from a 40-digit evaluation.
constexpr double kIdentityVleuT1 = 1.1173324145728582295;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

SimilarityMatrix random_matrix(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  return testing::matrix(n, m, oracle::random_matrix(rng, n, m));
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<std::size_t> size(2, 16);
  const double temps[] = {0.01, 0.1, 1.0};
  const int per_temperature = 200;
  double worst = 0;
  int count = 0;
  const auto start = Clock::now();
  for (double t : temps) {
    for (int k = 0; k < per_temperature; ++k) {
      const auto n = size(rng);
      const auto values = oracle::random_matrix(rng, n, n);
      const auto got = vleu_score(testing::matrix(n, n, values), t).vleu;
      const auto want = static_cast<double>(oracle::direct_vleu(values, n, n, t).vleu);
      worst = std::max(worst, std::abs(got - want));
      ++count;
    }
  }
  const double elapsed = seconds_since(start);
  return {worst <= kOracleTol && elapsed < kOracleBudgetSeconds,
          std::to_string(count) + " matrices, max |diff| " + fmt("%.2e", worst) + ", " +
              fmt("%.2f", elapsed) + " s"};
}

Outcome bounds() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> size(1, 24);
  std::uniform_real_distribution<double> log_t(std::log(1e-3), std::log(10.0));
  int violations = 0, count = 0;
  auto check = [&](const SimilarityMatrix& s, double t) {
    const auto r = vleu_score(s, t);
    const double m = static_cast<double>(s.cols());
    if (!(r.vleu >= 1.0) || r.vleu > m * (1 + kBoundSlack)) ++violations;
    for (double kl : r.per_image_kl) {
      if (!(kl >= 0.0) || kl > std::log(m) + kBoundSlack) ++violations;
    }
    ++count;
  };
  for (int k = 0; k < 3000; ++k) {
    check(random_matrix(rng, size(rng), size(rng)), std::exp(log_t(rng)));
  }
  // Saturated corners: one-hot columns at tiny temperature, all-equal entries.
  for (std::size_t n = 1; n <= 32; ++n) {
    std::vector<double> eye(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
    check(testing::matrix(n, n, eye), 1e-4);
    check(testing::matrix(n, n, std::vector<double>(n * n, 0.3)), 0.01);
  }
  return {violations == 0, std::to_string(count) + " inputs, " + std::to_string(violations) + " violations"};
}

Outcome closed_form() {
  const auto eye2 = testing::matrix(2, 2, {1, 0, 0, 1});
  const double t1 = vleu_score(eye2, 1.0).vleu;
  const double t001 = vleu_score(eye2, 0.01).vleu;
  const double flat = vleu_score(testing::matrix(3, 5, std::vector<double>(15, 0.42)), 0.01).vleu;
  const bool ok = std::abs(t1 - kIdentityVleuT1) <= kFixtureTol && flat == 1.0 &&
                  std::abs(t001 - 2.0) <= kExactTol;
  return {ok, "identity t=1 " + fmt("%.10f", t1) + " (ref " + fmt("%.10f", kIdentityVleuT1) +
                  "), all-equal " + fmt("%.17g", flat) + ", identity t=0.01 " + fmt("%.12f", t001)};
}

Outcome invariance() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> size(2, 16);
  std::uniform_real_distribution<double> shift(-5, 5), alpha(0.25, 4.0);
  const double temps[] = {0.01, 0.1, 1.0};
  double worst_shift = 0, worst_scale = 0, worst_perm = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = size(rng), m = size(rng);
    const double t = temps[k % 3];
    auto values = oracle::random_matrix(rng, n, m);
    const double base = vleu_score(testing::matrix(n, m, values), t).vleu;

    auto shifted = values;
    for (std::size_t j = 0; j < m; ++j) {
      const double c = shift(rng);
      for (std::size_t i = 0; i < n; ++i) shifted[i * m + j] += c;
    }
    worst_shift = std::max(worst_shift, std::abs(vleu_score(testing::matrix(n, m, shifted), t).vleu - base));

    const double a = alpha(rng);
    auto scaled = values;
    for (auto& v : scaled) v *= a;
    worst_scale = std::max(worst_scale, std::abs(vleu_score(testing::matrix(n, m, scaled), t * a).vleu - base));

    std::vector<std::size_t> rows(n), cols(m);
    std::iota(rows.begin(), rows.end(), 0);
    std::iota(cols.begin(), cols.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    std::shuffle(cols.begin(), cols.end(), rng);
    std::vector<double> permuted(n * m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) permuted[i * m + j] = values[rows[i] * m + cols[j]];
    }
    worst_perm = std::max(worst_perm, std::abs(vleu_score(testing::matrix(n, m, permuted), t).vleu - base));
  }
  const bool ok = worst_shift <= kInvarianceTol && worst_scale <= kInvarianceTol && worst_perm <= kInvarianceTol;
  return {ok, "100 instances each; max |diff| shift " + fmt("%.1e", worst_shift) + ", scale " +
                  fmt("%.1e", worst_scale) + ", permutation " + fmt("%.1e", worst_perm)};
}

std::vector<std::string> texts_of(const std::vector<SampledPrompt>& prompts) {
  std::vector<std::string> out;
  for (const auto& p : prompts) out.push_back(p.text);
  return out;
}

bool follow_ups_are_again(const std::vector<std::vector<ChatMessage>>& transcript) {
  for (const auto& sent : transcript) {
    if (sent.empty() || sent.front().role != Role::system) return false;
    for (std::size_t k = 1; k < sent.size(); ++k) {
      if (sent[k].role == Role::user && sent[k].content != kFollowUp) return false;
    }
  }
  return true;
}

Outcome sampler_traces() {
  std::vector<std::string> failures;
  const PromptTemplate free_form{TemplateKind::unconstrained, {}, {}};

  {
    auto backend = ScriptedChatBackend::counter();
    SamplerConfig c;
    c.num = 3;
    const auto got = sample_prompts(c, free_form, backend);
    const auto transcript = backend.transcript();
    bool ok = texts_of(got) == std::vector<std::string>{"reply-2", "reply-3", "reply-4"} &&
              backend.calls() == 4 && follow_ups_are_again(transcript) && transcript.size() == 4;
    for (std::size_t r = 1; ok && r < transcript.size(); ++r) {
      ok = transcript[r].size() == 1 + 2 * r &&
           transcript[r][2 * r - 1] == ChatMessage{Role::assistant, "reply-" + std::to_string(r)};
    }
    if (!ok) failures.push_back("discard");
  }
  {
    ScriptedChatBackend backend({"reply-1", "reply-2", "reply-3 dog"});
    SamplerConfig c;
    c.num = 1;
    c.include_keyword = true;
    const auto got = sample_prompts(c, {TemplateKind::constrained, "dog", {}}, backend);
    const auto transcript = backend.transcript();
    const bool ok = got.size() == 1 && got[0].text == "reply-3 dog" && got[0].keyword_retries == 1 &&
                    got[0].round == 1 && backend.calls() == 3 && transcript[1] == transcript[2] &&
                    follow_ups_are_again(transcript);
    if (!ok) failures.push_back("keyword-retry");
  }
  {
    auto backend = ScriptedChatBackend::counter();
    SamplerConfig c;
    c.num = 120;
    const auto got = sample_prompts(c, free_form, backend);
    std::map<std::size_t, std::size_t> per;
    for (const auto& p : got) ++per[p.conversation_index];
    const auto texts = texts_of(got);
    const std::set<std::string> seen(texts.begin(), texts.end());
    bool ok = got.size() == 120 && per == std::map<std::size_t, std::size_t>{{0, 50}, {1, 50}, {2, 20}} &&
              backend.calls() == 123 && follow_ups_are_again(backend.transcript());
    for (int discarded : {1, 52, 103}) ok = ok && !seen.count("reply-" + std::to_string(discarded));
    for (std::size_t k = 0; ok && k < got.size(); ++k) ok = got[k].id == k;
    if (!ok) failures.push_back("step-split");
  }
  std::string detail = "3 traces";
  for (const auto& f : failures) detail += ", mismatch in " + f;
  return {failures.empty(), detail};
}

Outcome synthetic_drift() {
  const std::size_t n = 8;
  std::vector<std::string> tags;
  for (std::size_t k = 0; k <= 10; ++k) tags.push_back(testing::collapse_tag(k));
  testing::PipelineFixture fx("acceptance_drift", n, tags, testing::collapse_store(n));
  auto config = fx.config(n);
  // The default t = 0.01 saturates every early checkpoint at exactly n.
  config.temperature = 1.0;
  const auto series = checkpoint_sweep(config, tags, fx.backends());
  bool decreasing = series.points.size() == 11;
  std::ostringstream values;
  for (std::size_t k = 0; k < series.points.size(); ++k) {
    const auto& r = series.points[k].report;
    if (!r) return {false, "checkpoint " + tags[k] + " failed: " + series.points[k].error};
    if (k > 0) decreasing = decreasing && r->vleu < series.points[k - 1].report->vleu;
    if (k % 5 == 0) values << (k ? ", " : "") << "k=" << k << ' ' << fmt("%.6f", r->vleu);
  }
  const double last = series.points.back().report->vleu;
  return {decreasing && std::abs(last - 1.0) <= kExactTol,
          std::string(decreasing ? "strictly decreasing" : "NOT monotone") + " at t=1; " + values.str()};
}

Outcome elo() {
  EloState base;
  base.register_model("a");
  base.register_model("b");
  auto outcome = [](double s) {
    MatchOutcome o;
    o.match_id = "m";
    o.model_a = "a";
    o.model_b = "b";
    o.score_a = s;
    return o;
  };
  const auto win = update_ratings(base, outcome(1.0));
  const auto draw = update_ratings(base, outcome(0.5));
  auto favoured = base;
  favoured.ratings["a"] = 1200;
  favoured = update_ratings(favoured, outcome(1.0));
  const bool fixtures = win.ratings.at("a") == 1016 && win.ratings.at("b") == 984 &&
                        draw.ratings.at("a") == 1000 && draw.ratings.at("b") == 1000 &&
                        std::abs(favoured.ratings.at("a") - 1207.688) <= kEloTol &&
                        std::abs(favoured.ratings.at("b") - 992.312) <= kEloTol;

  const std::vector<std::string> models{"m0", "m1", "m2", "m3", "m4", "m5"};
  EloState state;
  for (const auto& m : models) state.register_model(m);
  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<std::size_t> pick(0, models.size() - 1);
  std::uniform_int_distribution<int> result(0, 2);
  for (int k = 0; k < 10000; ++k) {
    const auto a = pick(rng);
    auto b = pick(rng);
    while (b == a) b = pick(rng);
    MatchOutcome o;
    o.match_id = std::to_string(k);
    o.model_a = models[a];
    o.model_b = models[b];
    o.score_a = 0.5 * result(rng);
    apply_outcome(state, o);
  }
  double total = 0;
  for (const auto& [_, r] : state.ratings) total += r;
  const double drift = std::abs(total - kInitialRating * models.size());
  const bool replayed = replay(models, state.match_log).ratings == state.ratings;
  return {fixtures && drift <= 1e-6 && replayed,
          std::string(fixtures ? "fixtures ok" : "fixtures WRONG") + "; 10000 matches, total drift " +
              fmt("%.1e", drift) + ", replay " + (replayed ? "identical" : "DIFFERS")};
}

Outcome pipeline_determinism() {
  const std::size_t n = 12;
  testing::PipelineFixture first("acceptance_det_a", n, {}, testing::identity_store(n));
  testing::PipelineFixture second("acceptance_det_b", n, {}, testing::identity_store(n));
  auto a = first.config(n);
  auto b = second.config(n);
  b.t2i_backend = a.t2i_backend;  // same image files, so manifests agree byte for byte
  const auto report = run_evaluation(a, first.backends());
  run_evaluation(b, {&second.chat, first.generation.get(), second.embedding.get()});
  const auto left = testing::snapshot_dir(a.run_dir);
  const auto right = testing::snapshot_dir(b.run_dir);
  const bool same = !left.empty() && left == right;
  const bool rescored = rescore_run(a.run_dir) == report;
  return {same && rescored, std::to_string(left.size()) + " files " + (same ? "identical" : "DIFFER") +
                                "; rescore " + (rescored ? "equal" : "DIFFERS")};
}

Outcome performance() {
  std::mt19937_64 rng(1);
  const auto s = random_matrix(rng, 1000, 1000);
  const auto start = Clock::now();
  const auto r = vleu_score(s);
  const double elapsed = seconds_since(start);
  return {elapsed < kPerfBudgetSeconds && r.vleu >= 1.0, "1000x1000 in " + fmt("%.3f", elapsed) + " s"};
}

Outcome core_only() {
  // Everything above ran from this binary; the arena API is answered by the core library.
  Arena arena(ArenaConfig{});
  const auto caps = handle_request(arena, "GET", "/capabilities", "");
  const std::string langs = VLEU_ENABLED_LANGUAGES;
  bool cxx_only = true;
  std::stringstream in(langs);
  for (std::string lang; std::getline(in, lang, ';');) cxx_only = cxx_only && (lang == "CXX" || lang == "C");
  return {cxx_only && caps.status == 200, "languages: " + langs + "; arena API served in-process"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"oracle-equivalence", oracle_equivalence},
      {"bounds", bounds},
      {"closed-form-fixtures", closed_form},
      {"invariance", invariance},
      {"sampler-traces", sampler_traces},
      {"synthetic-drift", synthetic_drift},
      {"elo", elo},
      {"pipeline-determinism", pipeline_determinism},
      {"performance", performance},
      {"core-only-build", core_only},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s  %-22s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
