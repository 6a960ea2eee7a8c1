#include <gtest/gtest.h>

#include <sys/wait.h>

#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace cpr;

namespace {

using cpr::testing::toolkit;

const std::vector<BugRecord>& corpus() {
  static const auto c = load_corpus(cpr::testing::bundled_corpus());
  return c;
}

std::vector<BugRecord> subset(std::initializer_list<const char*> ids) {
  std::vector<BugRecord> out;
  for (const auto* id : ids) out.push_back(find_bug(corpus(), id));
  return out;
}

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.perturb.m_dist = 40;
  return cfg;
}

int run(const std::string& args, std::string* out = nullptr) {
  cpr::testing::TempDir dir;
  const auto file = dir.path() / "out.txt";
  const std::string cmd = std::string("'") + CPR_CLI + "' " + args + " >'" + file.string() +
                          "' 2>/dev/null";
  const int status = std::system(cmd.c_str());
  if (out) {
    std::ifstream in(file);
    std::stringstream ss;
    ss << in.rdbuf();
    *out = ss.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Corpus, BundledCorpusLoads) {
  ASSERT_EQ(corpus().size(), 40u);
  for (const auto& r : corpus()) {
    EXPECT_FALSE(tokenize_code(r.buggy, r.language).empty()) << r.id;
    EXPECT_NE(r.buggy, r.fixed) << r.id;
  }
  EXPECT_THROW(find_bug(corpus(), "nope"), ValidationError);
}

TEST(Corpus, ParseErrors) {
  std::istringstream empty("");
  EXPECT_TRUE(parse_corpus(empty).empty());

  std::istringstream missing(
      R"({"id":"a","language":"c","buggy":"x","comment":"y","fixed":"z"})"
      "\n\n"
      R"({"id":"b","language":"c","buggy":"x","comment":"y"})");
  try {
    parse_corpus(missing);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("missing field \"fixed\""), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos) << e.what();
  }

  std::istringstream dup(
      R"({"id":"a","language":"c","buggy":"x","comment":"y","fixed":"z"})"
      "\n"
      R"({"id":"a","language":"c","buggy":"x","comment":"y","fixed":"z"})");
  EXPECT_THROW(parse_corpus(dup), ValidationError);

  std::istringstream bad("{oops");
  EXPECT_THROW(parse_corpus(bad), ParseError);
  std::istringstream empty_buggy(R"({"id":"a","language":"c","buggy":"","comment":"y","fixed":"z"})");
  EXPECT_THROW(parse_corpus(empty_buggy), ParseError);
  EXPECT_THROW(load_corpus("/nonexistent/corpus.jsonl"), ValidationError);
}

TEST(Evaluate, EmptyCorpus) {
  ModelHandle model(make_toy_transport());
  auto rep = evaluate({}, model, toolkit(), small_config());
  EXPECT_EQ(rep.bug_count, 0u);
  EXPECT_EQ(rep.fixed_baseline, 0u);
  EXPECT_EQ(rep.fixed_with_ci, 0u);
}

TEST(Evaluate, LambdaZeroMatchesBaseline) {
  ModelHandle model(make_toy_transport());
  auto cfg = small_config();
  cfg.rerank.lambda_mix = 0.0;
  auto rep = evaluate(corpus(), model, toolkit(), cfg);
  EXPECT_EQ(rep.errors, 0u);
  EXPECT_EQ(rep.fixed_baseline, rep.fixed_with_ci);
  for (const auto& b : rep.per_bug) EXPECT_EQ(b.baseline_rank, b.reranked_rank) << b.id;
}

TEST(Evaluate, DeterministicAcrossRunsAndWorkers) {
  auto bugs = subset({"exclusive_loop", "walk_forward", "emit_last", "gcd", "find_max"});
  ModelHandle m1(make_toy_transport()), m2(make_toy_transport());
  auto cfg = small_config();
  auto a = to_json(evaluate(bugs, m1, toolkit(), cfg)).dump();
  EXPECT_EQ(a, to_json(evaluate(bugs, m1, toolkit(), cfg)).dump());
  cfg.workers = 3;
  EXPECT_EQ(a, to_json(evaluate(bugs, m2, toolkit(), cfg)).dump());
}

TEST(Evaluate, MisprioritizedBugIsRescued) {
  ModelHandle model(make_toy_transport());
  auto rep = evaluate(subset({"walk_forward", "emit_last"}), model, toolkit(), PipelineConfig{});
  for (const auto& b : rep.per_bug) {
    EXPECT_EQ(b.baseline_rank, 2u) << b.id;
    EXPECT_EQ(b.reranked_rank, 1u) << b.id;
  }
}

TEST(Evaluate, FailuresAreRecordedPerBug) {
  auto bugs = subset({"gcd", "find_max"});
  ModelHandle model(std::make_unique<InProcessTransport>(
      "flaky", [](const ProgramInput& in, std::size_t beam) {
        if (in.code.texts()[1] == "gcd") throw TransportError("backend down");
        return toy_repair(in, beam);
      }));
  auto rep = evaluate(bugs, model, toolkit(), small_config());
  EXPECT_EQ(rep.errors, 1u);
  EXPECT_TRUE(rep.per_bug[0].failed());
  EXPECT_NE(rep.per_bug[0].error.find("backend down"), std::string::npos);
  EXPECT_FALSE(rep.per_bug[1].failed());
  auto j = to_json(rep);
  EXPECT_TRUE(j["per_bug"][0].contains("error"));
  EXPECT_FALSE(j["per_bug"][1].contains("error"));
}

TEST(Evaluate, CountsAgreeWithRanks) {
  ModelHandle model(make_toy_transport());
  auto rep = evaluate(subset({"find_max", "gcd", "match_key"}), model, toolkit(), small_config());
  std::size_t b = 0, c = 0;
  for (const auto& r : rep.per_bug) {
    b += r.baseline_rank == 1u;
    c += r.reranked_rank == 1u;
  }
  EXPECT_EQ(rep.fixed_baseline, b);
  EXPECT_EQ(rep.fixed_with_ci, c);
  auto j = to_json(rep);
  EXPECT_EQ(j["comparison"], "top-1 before and after causal reranking");
}

TEST(Explain, CopyModelHasSameTextEdge) {
  ModelHandle model(make_copy_transport());
  auto cfg = PipelineConfig{};
  cfg.perturb.op = AugmentOp::RD;
  cfg.perturb.alpha = 0.3;
  cfg.perturb.m_dist = 200;
  cfg.perturb.perturb_code = true;
  ExplainConfig ecfg;
  ecfg.K = 1;
  auto ex = explain_bug(find_bug(corpus(), "find_max"), model, toolkit(), cfg, ecfg);
  bool same = false;
  for (const auto& e : ex.selected.edges)
    same |= ex.selected.nodes[e.from].text == ex.selected.nodes[e.to].text;
  EXPECT_TRUE(same);
}

TEST(Explain, ConstantModelGivesEmptyWarning) {
  ModelHandle model(make_constant_transport({"return", "0", ";"}));
  auto ex = explain_bug(find_bug(corpus(), "gcd"), model, toolkit(), small_config());
  EXPECT_TRUE(ex.selected.empty_warning);
  EXPECT_TRUE(ex.selected.edges.empty());
  EXPECT_EQ(to_json(ex, "gcd")["explanation"]["warning"], "empty explanation");
}

TEST(Explain, ExclusiveLoopLinksCommentToOperator) {
  ModelHandle model(make_toy_transport());
  ExplainConfig ecfg;
  ecfg.pre_selection = true;
  auto ex = explain_bug(find_bug(corpus(), "exclusive_loop"), model, toolkit(), PipelineConfig{}, ecfg);
  ASSERT_FALSE(ex.selected.edges.empty());
  const ExplanationEdge* best = &ex.selected.edges[0];
  for (const auto& e : ex.selected.edges)
    if (e.weight > best->weight) best = &e;
  EXPECT_EQ(ex.selected.nodes[best->to].text, "<");
  const auto& from = ex.selected.nodes[best->from].text;
  EXPECT_TRUE(from == "exclusive" || from == "<=") << from;
  ASSERT_TRUE(ex.before_selection);
  EXPECT_GE(ex.before_selection->edges.size(), ex.selected.edges.size());
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("eval --op XX"), 1);
  EXPECT_EQ(run("explain --bug no_such_bug"), 1);
  EXPECT_EQ(run("explain --bug gcd --model cmd:false"), 2);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("explain --bug gcd --mdist 0"), 1);
}

TEST(Cli, SeedEnvironmentIsDeterministic) {
  std::string a, b, c;
  const std::string cmd = "explain --bug exclusive_loop --mdist 30";
  ASSERT_EQ(run("--help", nullptr), 0);
  ASSERT_EQ(setenv("CPR_SEED", "11", 1), 0);
  ASSERT_EQ(run(cmd, &a), 0);
  ASSERT_EQ(run(cmd, &b), 0);
  ASSERT_EQ(setenv("CPR_SEED", "12", 1), 0);
  ASSERT_EQ(run(cmd, &c), 0);
  ASSERT_EQ(setenv("CPR_SEED", "eleven", 1), 0);
  EXPECT_EQ(run(cmd), 1);
  unsetenv("CPR_SEED");
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j["bug"], "exclusive_loop");
}

TEST(Cli, PerturbWritesJsonl) {
  std::string out;
  ASSERT_EQ(run("perturb --bug find_max --mdist 7 --op RD", &out), 0);
  std::istringstream in(out);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["index"], n);
    EXPECT_EQ(j["op"], "RD");
    ++n;
  }
  EXPECT_EQ(n, 7u);
}
