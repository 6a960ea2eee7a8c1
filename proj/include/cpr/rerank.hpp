#pragma once

// Rescores a model's candidate patches by how stable they are under input
// perturbation and how strongly their edits are tied to input tokens.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpr/causal.hpp"
#include "cpr/error.hpp"
#include "cpr/perturb.hpp"
#include "cpr/program.hpp"

namespace cpr {

struct RerankConfig {
  double lambda_mix = 0.5;
  double delta = 1.0;

  void validate() const {
    if (!(lambda_mix >= 0.0 && lambda_mix <= 1.0))
      throw InvalidConfigError("lambda_mix must lie in [0, 1]");
    if (!(delta >= 0.0 && delta <= 1.0)) throw InvalidConfigError("delta must lie in [0, 1]");
  }
};

/// |LCS| / max(lengths); two empty sequences are identical.
inline double token_similarity(const std::vector<std::string>& a,
                               const std::vector<std::string>& b) {
  const auto longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return static_cast<double>(lcs_length(a, b)) / static_cast<double>(longest);
}

/// Fraction of perturbed outputs whose top-1 is at least `delta` similar to
/// the candidate.
inline double stability_score(const RepairCandidate& candidate,
                              const std::vector<RepairOutput>& perturbed_outputs,
                              double delta = 1.0) {
  if (perturbed_outputs.empty()) throw ValidationError("stability needs perturbed outputs");
  const auto texts = candidate.tokens.texts();
  std::size_t hits = 0;
  for (const auto& out : perturbed_outputs) {
    if (out.empty()) continue;
    if (token_similarity(texts, out.top().tokens.texts()) >= delta) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(perturbed_outputs.size());
}

/// Positions of candidate tokens outside the LCS with the buggy code.
inline std::vector<std::size_t> changed_positions(const RepairCandidate& candidate,
                                                  const TokenSequence& buggy) {
  const auto kept = lcs_retained(candidate.tokens.texts(), buggy.texts());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kept.size(); ++i)
    if (!kept[i]) out.push_back(i);
  return out;
}

struct RelevanceResult {
  double value = 0.0;
  std::vector<std::string> missing;  // changed tokens absent from W's outputs
};

/// Mean over changed tokens of the largest positive weight into that token.
inline RelevanceResult relevance_detail(const RepairCandidate& candidate,
                                        const DependencyMatrix& W,
                                        const std::vector<std::size_t>& changed) {
  RelevanceResult r;
  if (changed.empty()) return r;
  double total = 0.0;
  for (auto pos : changed) {
    if (pos >= candidate.tokens.length())
      throw ValidationError("changed position " + std::to_string(pos) + " out of range");
    const auto& text = candidate.tokens[pos].text;
    const auto j = W.output_index(text);
    if (!j) {
      r.missing.push_back(text);
      continue;
    }
    double best = 0.0;
    if (W.W.rows() > 0) best = std::max(0.0, W.W.col(static_cast<Eigen::Index>(*j)).maxCoeff());
    total += best;
  }
  r.value = total / static_cast<double>(changed.size());
  return r;
}

inline double relevance_score(const RepairCandidate& candidate, const DependencyMatrix& W,
                              const std::vector<std::size_t>& changed) {
  return relevance_detail(candidate, W, changed).value;
}

struct ScoredCandidate {
  RepairCandidate candidate;
  double stability = 0.0;
  double relevance = 0.0;
  double final_score = 0.0;
  std::size_t original_rank = 0;  // 1-based
  double normalized_model = 0.0;
  double normalized_relevance = 0.0;
  std::vector<std::string> missing_tokens;
};

struct CausalScores {
  double stability = 0.0;
  double relevance = 0.0;
  std::vector<std::string> missing_tokens;
};

struct RerankResult {
  RepairOutput output;
  std::vector<ScoredCandidate> scored;  // in the new order
};

/// Blends normalized model score with the causal score and re-sorts.
/// Ties keep the original model order.
inline RerankResult rerank_detail(const RepairOutput& candidates,
                                  const std::vector<CausalScores>& scores,
                                  const RerankConfig& cfg = {}) {
  cfg.validate();
  const auto n = candidates.size();
  if (scores.size() != n)
    throw AlignmentError(std::to_string(scores.size()) + " scores for " + std::to_string(n) +
                         " candidates");
  RerankResult res;
  if (n == 0) return res;
  const auto& cs = candidates.candidates();
  double lo = cs[0].model_score, hi = cs[0].model_score, rel_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lo = std::min(lo, cs[i].model_score);
    hi = std::max(hi, cs[i].model_score);
    rel_max = std::max(rel_max, scores[i].relevance);
  }
  std::vector<ScoredCandidate> scored(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = scored[i];
    s.candidate = cs[i];
    s.stability = scores[i].stability;
    s.relevance = scores[i].relevance;
    s.missing_tokens = scores[i].missing_tokens;
    s.original_rank = i + 1;
    s.normalized_model = hi > lo ? (cs[i].model_score - lo) / (hi - lo) : 1.0;
    s.normalized_relevance = rel_max > 0 ? scores[i].relevance / rel_max : 0.0;
    s.final_score = (1.0 - cfg.lambda_mix) * s.normalized_model +
                    cfg.lambda_mix * (s.stability + s.normalized_relevance) / 2.0;
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const ScoredCandidate& a, const ScoredCandidate& b) {
                     return a.final_score > b.final_score;
                   });
  std::vector<RepairCandidate> order;
  order.reserve(n);
  for (const auto& s : scored) order.push_back(s.candidate);
  res.output = RepairOutput::in_order(std::move(order));
  res.scored = std::move(scored);
  return res;
}

inline RepairOutput rerank(const RepairOutput& candidates,
                           const std::vector<CausalScores>& scores,
                           const RerankConfig& cfg = {}) {
  return rerank_detail(candidates, scores, cfg).output;
}

/// Stability and relevance for every candidate of `candidates`.
inline std::vector<CausalScores> causal_scores(const RepairOutput& candidates,
                                               const TokenSequence& buggy,
                                               const std::vector<RepairOutput>& perturbed,
                                               const DependencyMatrix& W,
                                               const RerankConfig& cfg = {}) {
  std::vector<CausalScores> out;
  for (const auto& c : candidates.candidates()) {
    auto rel = relevance_detail(c, W, changed_positions(c, buggy));
    out.push_back({stability_score(c, perturbed, cfg.delta), rel.value, std::move(rel.missing)});
  }
  return out;
}

inline nlohmann::ordered_json to_json(const RerankResult& r) {
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.scored.size(); ++i) {
    const auto& s = r.scored[i];
    rows.push_back({{"rank", i + 1},
                    {"original_rank", s.original_rank},
                    {"tokens", s.candidate.tokens.texts()},
                    {"model_score", s.candidate.model_score},
                    {"normalized_model", s.normalized_model},
                    {"stability", s.stability},
                    {"relevance", s.relevance},
                    {"normalized_relevance", s.normalized_relevance},
                    {"final_score", s.final_score},
                    {"missing_tokens", s.missing_tokens}});
  }
  return rows;
}

}  // namespace cpr
