#pragma once

// Corpus loading, the per-bug pipeline, evaluation reports and single-bug
// explanations.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "cpr/causal.hpp"
#include "cpr/error.hpp"
#include "cpr/model.hpp"
#include "cpr/partition.hpp"
#include "cpr/perturb.hpp"
#include "cpr/program.hpp"
#include "cpr/rerank.hpp"
#include "cpr/resources.hpp"
#include "cpr/rng.hpp"
#include "cpr/tokenizer.hpp"

namespace cpr {

struct BugRecord {
  std::string id;
  std::string language;
  std::string buggy;
  std::string comment;
  std::string fixed;
};

/// JSON Lines, one bug per line. Blank lines are skipped.
inline std::vector<BugRecord> parse_corpus(std::istream& in) {
  std::vector<BugRecord> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    if (!j.is_object()) throw ParseError("expected a JSON object", lineno);
    auto field = [&](const char* name) {
      auto it = j.find(name);
      if (it == j.end()) throw ParseError(std::string("missing field \"") + name + "\"", lineno);
      if (!it->is_string())
        throw ParseError(std::string("field \"") + name + "\" must be a string", lineno);
      return it->get<std::string>();
    };
    BugRecord r{field("id"), field("language"), field("buggy"), field("comment"),
                field("fixed")};
    if (r.buggy.empty()) throw ParseError("field \"buggy\" is empty", lineno);
    if (r.fixed.empty()) throw ParseError("field \"fixed\" is empty", lineno);
    if (!seen.insert(r.id).second)
      throw ValidationError("duplicate bug id '" + r.id + "' at line " + std::to_string(lineno));
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<BugRecord> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus " + path.string());
  return parse_corpus(in);
}

inline const BugRecord& find_bug(const std::vector<BugRecord>& corpus, const std::string& id) {
  for (const auto& r : corpus)
    if (r.id == id) return r;
  throw ValidationError("no bug with id '" + id + "'");
}

/// Lexicons and translator shared by every bug.
class Toolkit {
 public:
  explicit Toolkit(Resources res)
      : res_(std::move(res)), translator_(res_.phrase_table) {}

  static Toolkit load(const std::filesystem::path& dir = Resources::default_dir()) {
    return Toolkit(Resources::load(dir));
  }

  const Resources& resources() const noexcept { return res_; }
  PerturbationContext context() const { return {res_.lexicon, renamer_, translator_}; }

  ProgramInput program(const BugRecord& r) const {
    return ProgramInput{tokenize_code(r.buggy, r.language),
                        tokenize_comment(r.comment, res_.stopwords)};
  }

 private:
  Resources res_;
  IdentifierRenamer renamer_;
  StubTranslator translator_;
};

struct PipelineConfig {
  PerturbationConfig perturb;
  EstimatorConfig estimator;
  RerankConfig rerank;
  std::size_t beam = 5;
  std::size_t workers = 1;  // bugs evaluated concurrently

  void validate() const {
    perturb.validate();
    rerank.validate();
    if (beam < 1) throw InvalidConfigError("beam must be at least 1");
    if (estimator.lambda < 0) throw InvalidConfigError("lambda must be non-negative");
    if (!(estimator.tol > 0)) throw InvalidConfigError("tol must be positive");
  }
};

/// Everything computed for one bug.
struct BugAnalysis {
  ProgramInput input;
  PerturbationConfig perturb;  // with the per-bug seed
  RepairOutput baseline;
  std::vector<PerturbedSample> samples;
  std::vector<RepairOutput> perturbed_outputs;
  DependencyMatrix dependencies;
  RerankResult reranked;
};

/// Seed used for one bug's perturbations.
inline std::uint64_t bug_seed(std::uint64_t seed, const std::string& id) {
  return derive_seed(seed, fnv1a(id));
}

inline BugAnalysis analyze_bug(const BugRecord& record, ModelHandle& model,
                               const Toolkit& kit, const PipelineConfig& cfg) {
  BugAnalysis a;
  a.input = kit.program(record);
  a.input.validate();
  a.perturb = cfg.perturb;
  a.perturb.seed = bug_seed(cfg.perturb.seed, record.id);
  a.baseline = model.query(a.input, cfg.beam);
  if (a.baseline.empty()) throw TransportError("model returned no candidates");
  a.samples = generate_perturbations(a.input, a.perturb, kit.context());

  std::vector<ProgramInput> queries;
  queries.reserve(a.samples.size());
  for (const auto& s : a.samples) queries.push_back(s.as_input());
  auto results = model.query_batch(queries, cfg.beam);
  a.perturbed_outputs.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].ok())
      throw Error(results[i].error_kind,
                  "perturbed query " + std::to_string(i) + ": " + results[i].error);
    a.perturbed_outputs.push_back(*results[i].output);
  }
  const auto dm = build_design_matrix(a.input, a.samples, a.perturbed_outputs, a.baseline);
  a.dependencies = estimate_dependencies(dm, cfg.estimator);
  const auto scores =
      causal_scores(a.baseline, a.input.code, a.perturbed_outputs, a.dependencies, cfg.rerank);
  a.reranked = rerank_detail(a.baseline, scores, cfg.rerank);
  return a;
}

struct BugResult {
  std::string id;
  std::optional<std::size_t> baseline_rank;  // of the correct fix
  std::optional<std::size_t> reranked_rank;
  std::string error;  // non-empty when the pipeline failed

  bool failed() const noexcept { return !error.empty(); }
  bool fixed_baseline() const noexcept { return !failed() && baseline_rank == 1u; }
  bool fixed_with_ci() const noexcept { return !failed() && reranked_rank == 1u; }
};

struct EvalReport {
  std::string corpus;
  std::string model;
  AugmentOp op = AugmentOp::SR;
  std::size_t bug_count = 0;
  std::size_t fixed_baseline = 0;
  std::size_t fixed_with_ci = 0;
  std::size_t errors = 0;
  std::vector<BugResult> per_bug;
};

inline std::optional<std::size_t> as_rank(std::size_t r) {
  return r == 0 ? std::nullopt : std::optional<std::size_t>(r);
}

inline BugResult evaluate_bug(const BugRecord& record, ModelHandle& model, const Toolkit& kit,
                              const PipelineConfig& cfg) {
  BugResult r;
  r.id = record.id;
  try {
    const auto truth = tokenize_code(record.fixed, record.language).texts();
    const auto a = analyze_bug(record, model, kit, cfg);
    r.baseline_rank = as_rank(a.baseline.rank_of(truth));
    r.reranked_rank = as_rank(a.reranked.output.rank_of(truth));
  } catch (const std::exception& e) {
    r.error = e.what();
    if (r.error.empty()) r.error = "unknown error";
  }
  return r;
}

/// Runs the pipeline on every bug. Per-bug failures are recorded and left
/// out of both counts; bug order in the report follows the corpus.
inline EvalReport evaluate(const std::vector<BugRecord>& corpus, ModelHandle& model,
                           const Toolkit& kit, const PipelineConfig& cfg,
                           std::string corpus_name = "corpus") {
  cfg.validate();
  EvalReport rep;
  rep.corpus = std::move(corpus_name);
  rep.model = model.name();
  rep.op = cfg.perturb.op;
  rep.bug_count = corpus.size();
  rep.per_bug.resize(corpus.size());
  const auto workers = std::min(std::max<std::size_t>(cfg.workers, 1), corpus.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < corpus.size(); ++i)
      rep.per_bug[i] = evaluate_bug(corpus[i], model, kit, cfg);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < corpus.size();)
          rep.per_bug[i] = evaluate_bug(corpus[i], model, kit, cfg);
      });
  }
  for (const auto& b : rep.per_bug) {
    rep.errors += b.failed();
    rep.fixed_baseline += b.fixed_baseline();
    rep.fixed_with_ci += b.fixed_with_ci();
  }
  return rep;
}

/// One report per augmentation operator, in SR, RI, RS, RD, BT order.
inline std::vector<EvalReport> sweep_ops(const std::vector<BugRecord>& corpus, ModelHandle& model,
                                         const Toolkit& kit, PipelineConfig cfg,
                                         const std::string& corpus_name = "corpus") {
  std::vector<EvalReport> out;
  for (auto op : kAllOps) {
    cfg.perturb.op = op;
    out.push_back(evaluate(corpus, model, kit, cfg, corpus_name));
  }
  return out;
}

inline nlohmann::ordered_json to_json(const PipelineConfig& cfg) {
  return {{"op", to_string(cfg.perturb.op)},
          {"alpha", cfg.perturb.alpha},
          {"m_dist", cfg.perturb.m_dist},
          {"seed", cfg.perturb.seed},
          {"perturb_code", cfg.perturb.perturb_code},
          {"perturb_comment", cfg.perturb.perturb_comment},
          {"estimator", to_string(cfg.estimator.method)},
          {"lambda", cfg.estimator.lambda},
          {"lambda_mix", cfg.rerank.lambda_mix},
          {"delta", cfg.rerank.delta},
          {"beam", cfg.beam}};
}

inline nlohmann::ordered_json to_json(const EvalReport& rep) {
  nlohmann::ordered_json j;
  j["corpus"] = rep.corpus;
  j["model"] = rep.model;
  j["op"] = to_string(rep.op);
  j["comparison"] = "top-1 before and after causal reranking";
  j["bug_count"] = rep.bug_count;
  j["fixed_baseline"] = rep.fixed_baseline;
  j["fixed_with_ci"] = rep.fixed_with_ci;
  j["errors"] = rep.errors;
  auto bugs = nlohmann::ordered_json::array();
  for (const auto& b : rep.per_bug) {
    nlohmann::ordered_json e;
    e["id"] = b.id;
    e["baseline_rank"] = b.baseline_rank ? nlohmann::ordered_json(*b.baseline_rank) : nullptr;
    e["reranked_rank"] = b.reranked_rank ? nlohmann::ordered_json(*b.reranked_rank) : nullptr;
    if (b.failed()) e["error"] = b.error;
    bugs.push_back(std::move(e));
  }
  j["per_bug"] = bugs;
  return j;
}

inline nlohmann::ordered_json sweep_to_json(const std::vector<EvalReport>& reports) {
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : reports)
    rows.push_back({{"op", to_string(r.op)},
                    {"bug_count", r.bug_count},
                    {"fixed_baseline", r.fixed_baseline},
                    {"fixed_with_ci", r.fixed_with_ci},
                    {"errors", r.errors}});
  nlohmann::ordered_json j;
  j["corpus"] = reports.empty() ? "" : reports.front().corpus;
  j["model"] = reports.empty() ? "" : reports.front().model;
  j["rows"] = rows;
  auto full = nlohmann::ordered_json::array();
  for (const auto& r : reports) full.push_back(to_json(r));
  j["reports"] = full;
  return j;
}

struct ExplainConfig {
  std::size_t K = 3;    // clusters kept
  std::size_t k = 0;    // clusters formed; 0 picks a default from graph size
  double tau = 0.75;    // edge quantile threshold
  bool pre_selection = false;
};

struct Explanation {
  BugAnalysis analysis;
  BipartiteGraph graph;
  std::optional<CoClustering> clusters;
  ExplanationGraph selected;
  std::optional<ExplanationGraph> before_selection;
};

inline Explanation explain_bug(const BugRecord& record, ModelHandle& model, const Toolkit& kit,
                               const PipelineConfig& cfg, const ExplainConfig& ecfg = {}) {
  cfg.validate();
  if (ecfg.K < 1) throw InvalidConfigError("K must be at least 1");
  Explanation ex;
  ex.analysis = analyze_bug(record, model, kit, cfg);
  ex.graph = build_bipartite(ex.analysis.dependencies, ecfg.tau);
  if (ex.graph.empty()) {
    ex.selected.empty_warning = true;
    if (ecfg.pre_selection) ex.before_selection = raw_dependency_graph(ex.graph);
    return ex;
  }
  std::size_t k = ecfg.k == 0 ? default_cluster_count(ex.graph) : ecfg.k;
  if (ecfg.k == 0) k = std::min(k, ex.graph.left.size() + ex.graph.right.size());
  ex.clusters = spectral_coclusters(ex.graph, k, derive_seed(ex.analysis.perturb.seed, 0x6b6d));
  ex.selected = select_explanation(*ex.clusters, ex.graph, ecfg.K);
  if (ecfg.pre_selection) ex.before_selection = raw_dependency_graph(ex.graph, &*ex.clusters);
  return ex;
}

inline nlohmann::ordered_json to_json(const Explanation& ex, const std::string& bug_id) {
  nlohmann::ordered_json j;
  j["bug"] = bug_id;
  j["explanation"] = to_json(ex.selected);
  if (ex.before_selection) j["pre_selection"] = to_json(*ex.before_selection);
  j["dependencies"] = to_json(ex.analysis.dependencies);
  return j;
}

}  // namespace cpr
