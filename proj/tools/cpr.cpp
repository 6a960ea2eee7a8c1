// cpr: explain and rerank black-box program-repair models.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "cpr/cpr.hpp"

namespace {

struct Options {
  std::string corpus;
  std::string bug;
  std::string model = "toy";
  std::string op = "SR";
  double alpha = 0.1;
  std::size_t m_dist = 100;
  std::uint64_t seed = 0;
  bool perturb_code = false;
  bool no_comment = false;
  std::string estimator = "logistic";
  double lambda = 1e-3;
  double lambda_mix = 0.5;
  double delta = 1.0;
  std::size_t beam = 5;
  std::size_t workers = 1;
  std::string data_dir;
  std::string cache_dir;
  double timeout_s = 30.0;
  // explain
  std::size_t k = 0;
  std::size_t select = 3;
  double tau = 0.75;
  std::string out;
  bool pre_selection = false;
  // eval
  bool sweep = false;
  std::string report;
  // rerank
  bool explain_rerank = false;
};

std::filesystem::path data_dir(const Options& o) {
  return o.data_dir.empty() ? cpr::Resources::default_dir() : std::filesystem::path(o.data_dir);
}

std::filesystem::path corpus_path(const Options& o) {
  return o.corpus.empty() ? data_dir(o) / "corpus" / "synthetic40.jsonl"
                          : std::filesystem::path(o.corpus);
}

std::uint64_t effective_seed(const Options& o) {
  if (const char* env = std::getenv("CPR_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      auto v = std::stoull(env, &used);
      if (used == std::string_view(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw cpr::InvalidConfigError(std::string("CPR_SEED is not an unsigned integer: ") + env);
  }
  return o.seed;
}

cpr::PipelineConfig pipeline(const Options& o) {
  cpr::PipelineConfig cfg;
  cfg.perturb.op = cpr::parse_op(o.op);
  cfg.perturb.alpha = o.alpha;
  cfg.perturb.m_dist = o.m_dist;
  cfg.perturb.seed = effective_seed(o);
  cfg.perturb.perturb_code = o.perturb_code;
  cfg.perturb.perturb_comment = !o.no_comment;
  if (o.estimator == "logistic")
    cfg.estimator.method = cpr::EstimatorMethod::logistic;
  else if (o.estimator == "pmi")
    cfg.estimator.method = cpr::EstimatorMethod::pmi;
  else
    throw cpr::InvalidConfigError("unknown estimator '" + o.estimator + "'");
  cfg.estimator.lambda = o.lambda;
  cfg.rerank.lambda_mix = o.lambda_mix;
  cfg.rerank.delta = o.delta;
  cfg.beam = o.beam;
  cfg.workers = o.workers;
  cfg.validate();
  return cfg;
}

cpr::ModelHandle open_model(const Options& o) {
  cpr::CacheOptions cache;
  if (!o.cache_dir.empty()) cache.spill_dir = o.cache_dir;
  const auto timeout =
      std::chrono::milliseconds(static_cast<long long>(o.timeout_s * 1000.0));
  return cpr::ModelHandle(cpr::make_transport(o.model, timeout), std::move(cache));
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw cpr::ValidationError("cannot write " + path);
  f << text;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

int run_explain(const Options& o) {
  const auto cfg = pipeline(o);
  const auto corpus = cpr::load_corpus(corpus_path(o));
  const auto& bug = cpr::find_bug(corpus, o.bug);
  const auto kit = cpr::Toolkit::load(data_dir(o));
  auto model = open_model(o);
  cpr::ExplainConfig ecfg{o.select, o.k, o.tau, o.pre_selection};
  const auto ex = cpr::explain_bug(bug, model, kit, cfg, ecfg);
  if (ex.selected.empty_warning)
    std::cerr << "warning: explanation for " << bug.id << " is empty\n";
  if (ends_with(o.out, ".dot")) {
    std::string text = cpr::to_dot(ex.selected, bug.id);
    if (ex.before_selection) text += cpr::to_dot(*ex.before_selection, bug.id + " (pre-selection)");
    write_text(o.out, text);
  } else {
    write_text(o.out, cpr::to_json(ex, bug.id).dump(2) + "\n");
  }
  return 0;
}

int run_eval(const Options& o) {
  const auto cfg = pipeline(o);
  const auto path = corpus_path(o);
  const auto corpus = cpr::load_corpus(path);
  const auto kit = cpr::Toolkit::load(data_dir(o));
  auto model = open_model(o);
  const auto name = path.stem().string();
  std::string text;
  if (o.sweep) {
    const auto reports = cpr::sweep_ops(corpus, model, kit, cfg, name);
    text = cpr::sweep_to_json(reports).dump(2) + "\n";
    for (const auto& r : reports)
      std::cerr << cpr::to_string(r.op) << ": fixed " << r.fixed_baseline << " -> "
                << r.fixed_with_ci << " of " << r.bug_count << "\n";
  } else {
    const auto rep = cpr::evaluate(corpus, model, kit, cfg, name);
    text = cpr::to_json(rep).dump(2) + "\n";
    std::cerr << "fixed " << rep.fixed_baseline << " -> " << rep.fixed_with_ci << " of "
              << rep.bug_count;
    if (rep.errors) std::cerr << " (" << rep.errors << " errors)";
    std::cerr << "\n";
  }
  write_text(o.report, text);
  return 0;
}

int run_perturb(const Options& o) {
  const auto cfg = pipeline(o);
  const auto corpus = cpr::load_corpus(corpus_path(o));
  const auto& bug = cpr::find_bug(corpus, o.bug);
  const auto kit = cpr::Toolkit::load(data_dir(o));
  auto p = cfg.perturb;
  p.seed = cpr::bug_seed(p.seed, bug.id);
  const auto samples = cpr::generate_perturbations(kit.program(bug), p, kit.context());
  std::string text;
  for (const auto& s : samples) {
    nlohmann::ordered_json j;
    j["index"] = s.index;
    j["op"] = cpr::to_string(s.op);
    j["code_tokens"] = s.code.texts();
    j["comment_tokens"] = s.comment.texts();
    j["retained_mask"] = s.retained_mask;
    text += j.dump() + "\n";
  }
  write_text(o.out, text);
  return 0;
}

int run_rerank(const Options& o) {
  const auto cfg = pipeline(o);
  const auto corpus = cpr::load_corpus(corpus_path(o));
  const auto& bug = cpr::find_bug(corpus, o.bug);
  const auto kit = cpr::Toolkit::load(data_dir(o));
  auto model = open_model(o);
  const auto a = cpr::analyze_bug(bug, model, kit, cfg);
  if (o.explain_rerank) {
    nlohmann::ordered_json j;
    j["bug"] = bug.id;
    j["lambda_mix"] = cfg.rerank.lambda_mix;
    j["delta"] = cfg.rerank.delta;
    j["candidates"] = cpr::to_json(a.reranked);
    write_text(o.out, j.dump(2) + "\n");
  } else {
    std::string text;
    for (std::size_t i = 0; i < a.reranked.output.size(); ++i) {
      const auto& c = a.reranked.output.candidates()[i];
      text += std::to_string(i + 1) + "\t" + cpr::join_texts(c.tokens.texts()) + "\n";
    }
    write_text(o.out, text);
  }
  return 0;
}

void add_pipeline_options(CLI::App* cmd, Options& o, bool with_model) {
  cmd->add_option("--corpus", o.corpus, "corpus file (JSON Lines)");
  cmd->add_option("--op", o.op, "augmentation operator")
      ->check(CLI::IsMember({"SR", "RI", "RS", "RD", "BT"}));
  cmd->add_option("--alpha", o.alpha, "perturbation strength");
  cmd->add_option("--mdist", o.m_dist, "perturbed samples per bug");
  cmd->add_option("--seed", o.seed, "seed (CPR_SEED overrides)");
  cmd->add_flag("--perturb-code", o.perturb_code, "also perturb the code stream");
  cmd->add_flag("--no-perturb-comment", o.no_comment, "leave the comment untouched");
  cmd->add_option("--data-dir", o.data_dir, "directory with lexicon and stopwords");
  if (!with_model) return;
  cmd->add_option("--model", o.model, "toy | copy | cmd:<command> | http:<host:port>");
  cmd->add_option("--estimator", o.estimator, "logistic | pmi");
  cmd->add_option("--lambda", o.lambda, "L2 penalty of the logistic estimator");
  cmd->add_option("--lambda-mix", o.lambda_mix, "weight of the causal score in reranking");
  cmd->add_option("--delta", o.delta, "similarity floor for stability");
  cmd->add_option("--beam", o.beam, "candidates requested per query");
  cmd->add_option("--workers", o.workers, "bugs evaluated concurrently");
  cmd->add_option("--cache-dir", o.cache_dir, "spill model responses to this directory");
  cmd->add_option("--timeout", o.timeout_s, "model request timeout in seconds");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explain and rerank black-box program-repair models"};
  app.require_subcommand(1);
  Options o;

  auto* explain = app.add_subcommand("explain", "explanation graph for one bug");
  add_pipeline_options(explain, o, true);
  explain->add_option("--bug", o.bug, "bug id")->required();
  explain->add_option("--k", o.k, "co-clusters to form (0 = automatic)");
  explain->add_option("--select", o.select, "co-clusters to keep");
  explain->add_option("--tau", o.tau, "edge weight quantile threshold");
  explain->add_option("--out", o.out, "output file, .dot or .json");
  explain->add_flag("--pre-selection", o.pre_selection, "also emit the graph before selection");

  auto* eval = app.add_subcommand("eval", "fixed counts before and after reranking");
  add_pipeline_options(eval, o, true);
  eval->add_flag("--sweep-ops", o.sweep, "one row per augmentation operator");
  eval->add_option("--report", o.report, "report file (JSON)");

  auto* perturb = app.add_subcommand("perturb", "dump perturbed samples for one bug");
  add_pipeline_options(perturb, o, false);
  perturb->add_option("--bug", o.bug, "bug id")->required();
  perturb->add_option("--out", o.out, "output file (JSON Lines)");

  auto* rr = app.add_subcommand("rerank", "rerank one bug's candidates");
  add_pipeline_options(rr, o, true);
  rr->add_option("--bug", o.bug, "bug id")->required();
  rr->add_flag("--explain-rerank", o.explain_rerank, "print per-candidate diagnostics");
  rr->add_option("--out", o.out, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*explain) return run_explain(o);
    if (*eval) return run_eval(o);
    if (*perturb) return run_perturb(o);
    if (*rr) return run_rerank(o);
  } catch (const cpr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
