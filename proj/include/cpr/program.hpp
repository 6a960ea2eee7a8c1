#pragma once

// The black box's input and output types: a program (code + comment) in,
// a ranked list of candidate patches out.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "cpr/error.hpp"
#include "cpr/tokenizer.hpp"

namespace cpr {

struct ProgramInput {
  TokenSequence code{Stream::code};
  TokenSequence comment{Stream::comment};

  void validate() const {
    if (code.stream() != Stream::code || comment.stream() != Stream::comment)
      throw ValidationError("program input streams carry wrong tags");
    if (code.empty() && comment.empty())
      throw ValidationError("program input has neither code nor comment");
  }

  /// Canonical serialization used for cache keys.
  std::string canonical() const {
    std::string s = "code:";
    for (const auto& t : code) {
      s += std::to_string(t.text.size());
      s += ':';
      s += t.text;
    }
    s += "|comment:";
    for (const auto& t : comment) {
      s += std::to_string(t.text.size());
      s += ':';
      s += t.text;
    }
    return s;
  }

  friend bool operator==(const ProgramInput&, const ProgramInput&) = default;
};

inline TokenSequence code_sequence(const std::vector<std::string>& texts,
                                   std::string_view language = {}) {
  // Retokenize each text individually so kinds are classified consistently.
  std::vector<Token> tokens;
  tokens.reserve(texts.size());
  for (const auto& text : texts) {
    auto one = tokenize_code(text, language);
    if (one.length() == 1) {
      tokens.push_back(one[0]);
    } else {
      tokens.push_back(Token{text, TokenKind::identifier, Stream::code, 0});
    }
  }
  return TokenSequence::from_tokens(Stream::code, std::move(tokens));
}

inline TokenSequence comment_sequence(const std::vector<std::string>& texts,
                                      const WordSet& stopwords = {}) {
  std::vector<Token> tokens;
  tokens.reserve(texts.size());
  for (const auto& text : texts) {
    tokens.push_back(Token{text,
                           stopwords.contains(text) ? TokenKind::stopword
                                                    : TokenKind::word,
                           Stream::comment, 0});
  }
  return TokenSequence::from_tokens(Stream::comment, std::move(tokens));
}

struct RepairCandidate {
  TokenSequence tokens{Stream::code};
  double model_score = 0.0;
};

/// Candidates sorted by model score (descending, stable), deduplicated by
/// token text, never empty.
class RepairOutput {
 public:
  RepairOutput() = default;

  static RepairOutput from_candidates(std::vector<RepairCandidate> candidates) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const RepairCandidate& a, const RepairCandidate& b) {
                       return a.model_score > b.model_score;
                     });
    RepairOutput out;
    std::set<std::vector<std::string>> seen;
    for (auto& c : candidates) {
      if (c.tokens.empty()) throw ValidationError("repair candidate has no tokens");
      if (!std::isfinite(c.model_score))
        throw ValidationError("repair candidate score is not finite");
      if (!seen.insert(c.tokens.texts()).second) continue;
      out.candidates_.push_back(std::move(c));
    }
    if (out.candidates_.empty()) throw ValidationError("repair output is empty");
    return out;
  }

  /// Keeps the given order; used by reranking, which imposes its own order.
  static RepairOutput in_order(std::vector<RepairCandidate> candidates) {
    RepairOutput out;
    out.candidates_ = std::move(candidates);
    return out;
  }

  const std::vector<RepairCandidate>& candidates() const noexcept {
    return candidates_;
  }
  std::size_t size() const noexcept { return candidates_.size(); }
  bool empty() const noexcept { return candidates_.empty(); }
  const RepairCandidate& top() const { return candidates_.front(); }

  void truncate(std::size_t n) {
    if (candidates_.size() > n) candidates_.resize(n);
  }

  /// 1-based rank of the candidate whose tokens equal `texts`, 0 if absent.
  std::size_t rank_of(const std::vector<std::string>& texts) const {
    for (std::size_t i = 0; i < candidates_.size(); ++i)
      if (candidates_[i].tokens.texts() == texts) return i + 1;
    return 0;
  }

 private:
  std::vector<RepairCandidate> candidates_;
};

inline bool operator==(const RepairCandidate& a, const RepairCandidate& b) {
  return a.tokens.texts() == b.tokens.texts() && a.model_score == b.model_score;
}

inline bool operator==(const RepairOutput& a, const RepairOutput& b) {
  return a.candidates() == b.candidates();
}

}  // namespace cpr
