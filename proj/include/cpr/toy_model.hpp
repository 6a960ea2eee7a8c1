#pragma once

// Desk-scale black boxes: a deterministic rule-based repairer ("toy"), a copy
// model and a constant model. The toy rule table is versioned; the bundled
// corpus metadata records the version its frozen counts were computed with.

#include <string>
#include <vector>

#include "cpr/model.hpp"
#include "cpr/program.hpp"

namespace cpr {

inline constexpr int kToyRuleTableVersion = 1;

/// One rewrite of the toy repairer. The rule fires when `from` occurs in the
/// code and, if `gates` is non-empty, one of the gate words occurs in the
/// comment. `memorized` rules instead require the comment to equal that exact
/// word sequence. The first occurrence of `from` is replaced by `to`.
struct ToyRule {
  std::string name;
  std::vector<std::string> from;
  std::vector<std::string> to;
  std::vector<std::string> gates;
  double score = 0.0;
  std::string memorized;
};

inline const std::vector<ToyRule>& toy_rule_table() {
  // Gate lists include the lexicon synonyms the model "knows", so meaning-
  // preserving substitutions keep a rule firing. Cue and memorized rules are
  // the model's mis-prioritized habits: deletions triggered by incidental
  // comment words or by a comment seen verbatim during "training".
  static const std::vector<ToyRule> table = {
      // spurious cues
      {"cue-legacy", {"-", "1"}, {}, {"legacy"}, -0.05, ""},
      {"cue-verbose", {"-", "1"}, {}, {"verbose"}, -0.05, ""},
      {"cue-temporary", {"+", "1"}, {}, {"temporary"}, -0.05, ""},
      {"cue-cached", {"+", "1"}, {}, {"cached"}, -0.05, ""},
      // memorized comments
      {"memo-emit", {"-", "1"}, {}, {}, -0.05,
       "emit the value at position i when i is inclusive of the last slot"},
      {"memo-flag", {"+", "1"}, {}, {}, -0.05,
       "the flag is set when the used count equals the capacity value"},
      {"memo-gap", {"-", "1"}, {}, {}, -0.05,
       "compute the gap value here we subtract lo from hi to get it"},
      // operator fixes
      {"exclusive-bound", {"<="}, {"<"},
       {"exclusive", "excluding", "strictly", "below", "before"}, -0.20, ""},
      {"inclusive-bound", {"<"}, {"<="},
       {"inclusive", "including", "through", "included"}, -0.20, ""},
      {"count-down", {"++"}, {"--"},
       {"decrement", "decrease", "reduce", "countdown", "downward"}, -0.25, ""},
      {"count-up", {"--"}, {"++"}, {"increment", "increase", "upward"}, -0.25, ""},
      {"equality", {"!="}, {"=="},
       {"equal", "equals", "same", "identical", "matches"}, -0.30, ""},
      {"inequality", {"=="}, {"!="},
       {"differs", "different", "unequal", "distinct", "mismatch"}, -0.30, ""},
      {"strict-greater", {">="}, {">"}, {"exceeds", "greater", "above", "beyond"},
       -0.30, ""},
      {"at-least", {">"}, {">="}, {"least", "nonnegative"}, -0.30, ""},
      {"to-max", {"min"}, {"max"}, {"maximum", "largest", "biggest", "highest"},
       -0.35, ""},
      {"to-min", {"max"}, {"min"}, {"minimum", "smallest", "lowest"}, -0.35, ""},
      {"subtract", {"+"}, {"-"},
       {"decrement", "decrease", "reduce", "subtract", "minus", "shrink"}, -0.40, ""},
      {"add", {"-"}, {"+"}, {"increment", "increase", "add", "plus", "grow"}, -0.40,
       ""},
      {"disjunction", {"&&"}, {"||"}, {"either", "any", "alternatively"}, -0.40, ""},
      {"conjunction", {"||"}, {"&&"}, {"both", "all", "every"}, -0.40, ""},
      {"to-right", {"left"}, {"right"}, {"right", "rightmost", "last"}, -0.45, ""},
      {"to-left", {"right"}, {"left"}, {"left", "leftmost", "first"}, -0.45, ""},
      // off-by-one literals
      {"start-zero", {"1"}, {"0"}, {"zero", "beginning", "start", "first"}, -0.50, ""},
      {"start-one", {"0"}, {"1"}, {"one", "skip", "second"}, -0.50, ""},
      // ungated low-confidence mutations
      {"flip-le", {"<="}, {">="}, {}, -4.00, ""},
      {"flip-lt", {"<"}, {">"}, {}, -4.10, ""},
      {"eq-to-ge", {"=="}, {">="}, {}, -4.20, ""},
      {"plus-to-times", {"+"}, {"*"}, {}, -4.30, ""},
      {"minus-to-div", {"-"}, {"/"}, {}, -4.35, ""},
      {"one-to-two", {"1"}, {"2"}, {}, -4.40, ""},
      {"flip-gt", {">"}, {"<"}, {}, -4.45, ""},
      {"and-to-bitand", {"&&"}, {"&"}, {}, -4.50, ""},
      {"ne-to-lt", {"!="}, {"<"}, {}, -4.55, ""},
  };
  return table;
}

inline constexpr double kToyIdentityScore = -5.0;
inline constexpr std::size_t kToyMaxCandidates = 5;

namespace detail {

inline std::ptrdiff_t find_subsequence(const std::vector<std::string>& hay,
                                       const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return -1;
  auto it = std::search(hay.begin(), hay.end(), needle.begin(), needle.end());
  return it == hay.end() ? -1 : it - hay.begin();
}

}  // namespace detail

/// Rule-based repairer. Emits up to five candidates; the identity patch is
/// always last (and alone when no rule fires).
inline RepairOutput toy_repair(const ProgramInput& input,
                               std::size_t beam = kToyMaxCandidates) {
  if (input.code.empty()) throw ValidationError("toy model needs code tokens");
  const auto code = input.code.texts();
  const auto comment = input.comment.texts();
  const auto comment_text = join_texts(comment);

  std::vector<RepairCandidate> cands;
  for (const auto& rule : toy_rule_table()) {
    if (!rule.memorized.empty() && rule.memorized != comment_text) continue;
    if (!rule.gates.empty() &&
        std::none_of(rule.gates.begin(), rule.gates.end(), [&](const std::string& g) {
          return std::find(comment.begin(), comment.end(), g) != comment.end();
        }))
      continue;
    const auto at = detail::find_subsequence(code, rule.from);
    if (at < 0) continue;
    std::vector<std::string> patched(code.begin(), code.begin() + at);
    patched.insert(patched.end(), rule.to.begin(), rule.to.end());
    patched.insert(patched.end(),
                   code.begin() + at + static_cast<std::ptrdiff_t>(rule.from.size()),
                   code.end());
    if (patched.empty()) continue;
    cands.push_back(RepairCandidate{code_sequence(patched), rule.score});
  }
  cands.push_back(RepairCandidate{input.code, kToyIdentityScore});
  auto out = RepairOutput::from_candidates(std::move(cands));
  out.truncate(std::min(beam, kToyMaxCandidates));
  return out;
}

/// Returns the input code unchanged (the comment when there is no code).
inline RepairOutput copy_repair(const ProgramInput& input) {
  auto tokens = input.code.empty() ? code_sequence(input.comment.texts()) : input.code;
  return RepairOutput::from_candidates({RepairCandidate{std::move(tokens), 0.0}});
}

inline std::unique_ptr<ModelTransport> make_toy_transport() {
  return std::make_unique<InProcessTransport>(
      "toy/v" + std::to_string(kToyRuleTableVersion),
      [](const ProgramInput& in, std::size_t beam) { return toy_repair(in, beam); });
}

inline std::unique_ptr<ModelTransport> make_copy_transport() {
  return std::make_unique<InProcessTransport>(
      "copy", [](const ProgramInput& in, std::size_t) { return copy_repair(in); });
}

/// Always answers with the same patch, whatever the input.
inline std::unique_ptr<ModelTransport> make_constant_transport(
    std::vector<std::string> patch) {
  auto id = "constant:" + join_texts(patch);
  return std::make_unique<InProcessTransport>(
      std::move(id), [patch = std::move(patch)](const ProgramInput&, std::size_t) {
        return RepairOutput::from_candidates({RepairCandidate{code_sequence(patch), 0.0}});
      });
}

/// Resolves a model spec: "toy", "copy", "cmd:<shell command>" or
/// "http://host:port" / "http:host:port".
inline std::unique_ptr<ModelTransport> make_transport(
    const std::string& spec,
    std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
  if (spec == "toy") return make_toy_transport();
  if (spec == "copy") return make_copy_transport();
  if (spec.starts_with("cmd:"))
    return std::make_unique<SubprocessTransport>(spec.substr(4), timeout);
  if (spec.starts_with("http://") || spec.starts_with("https://"))
    return std::make_unique<HttpTransport>(spec, timeout);
  if (spec.starts_with("http:"))
    return std::make_unique<HttpTransport>("http://" + spec.substr(5), timeout);
  throw InvalidConfigError("unknown model spec '" + spec + "'");
}

}  // namespace cpr
