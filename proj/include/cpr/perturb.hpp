#pragma once

// Data-augmentation perturbation of program inputs: synonym replacement,
// random insertion, random swap, random deletion and back-translation.
// Every operator reports which original positions survive in its output.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cpr/error.hpp"
#include "cpr/program.hpp"
#include "cpr/resources.hpp"
#include "cpr/rng.hpp"
#include "cpr/tokenizer.hpp"

namespace cpr {

enum class AugmentOp { SR, RI, RS, RD, BT };

inline constexpr std::array<AugmentOp, 5> kAllOps = {
    AugmentOp::SR, AugmentOp::RI, AugmentOp::RS, AugmentOp::RD, AugmentOp::BT};

inline std::string_view to_string(AugmentOp op) {
  switch (op) {
    case AugmentOp::SR: return "SR";
    case AugmentOp::RI: return "RI";
    case AugmentOp::RS: return "RS";
    case AugmentOp::RD: return "RD";
    case AugmentOp::BT: return "BT";
  }
  return "?";
}

inline AugmentOp parse_op(std::string_view s) {
  for (auto op : kAllOps)
    if (to_string(op) == s) return op;
  throw InvalidConfigError("unknown augmentation op '" + std::string(s) + "'");
}

struct PerturbationConfig {
  double alpha = 0.1;
  std::size_t m_dist = 100;
  AugmentOp op = AugmentOp::SR;
  std::uint64_t seed = 0;
  bool perturb_code = false;
  bool perturb_comment = true;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw InvalidConfigError("alpha must lie in [0, 1]");
    if (m_dist < 1) throw InvalidConfigError("m_dist must be at least 1");
    if (!perturb_code && !perturb_comment)
      throw InvalidConfigError("at least one stream must be perturbed");
  }
};

/// Number of words to change in a sentence of length l: floor(alpha * l).
/// Products within 1e-9 below an integer are treated as that integer, so
/// decimal inputs such as alpha = 0.29, l = 100 give 29 rather than 28.
inline std::size_t perturbation_count(double alpha, std::size_t l) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw InvalidConfigError("alpha must lie in [0, 1]");
  const double product = alpha * static_cast<double>(l);
  auto m = static_cast<std::size_t>(std::floor(product + 1e-9));
  return std::min(m, l);
}

struct OperatorResult {
  TokenSequence sequence;
  std::vector<bool> retained;  // indexed by original position
};

namespace detail {

inline std::vector<std::size_t> eligible_positions(const TokenSequence& seq,
                                                   const SynonymProvider& lexicon) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < seq.length(); ++i) {
    if (seq[i].kind == TokenKind::stopword) continue;
    if (!lexicon.synonyms(seq[i]).empty()) out.push_back(i);
  }
  return out;
}

inline TokenKind inserted_kind(const Token& source) {
  return source.kind == TokenKind::identifier ? TokenKind::identifier
                                              : TokenKind::word;
}

}  // namespace detail

/// Replaces min(m, eligible) distinct non-stopword tokens that have
/// synonyms with a uniformly chosen synonym.
inline OperatorResult synonym_replace(const TokenSequence& seq, std::size_t m,
                                      const SynonymProvider& lexicon, Rng& rng) {
  std::vector<Token> tokens = seq.tokens();
  std::vector<bool> retained(seq.length(), true);
  auto eligible = detail::eligible_positions(seq, lexicon);
  const std::size_t picks = std::min(m, eligible.size());
  // Partial Fisher-Yates: the first `picks` entries form a uniform subset.
  for (std::size_t i = 0; i < picks; ++i) {
    auto j = i + static_cast<std::size_t>(rng.below(eligible.size() - i));
    std::swap(eligible[i], eligible[j]);
    const auto pos = eligible[i];
    const auto syns = lexicon.synonyms(seq[pos]);
    tokens[pos].text = syns[rng.below(syns.size())];
    tokens[pos].kind = detail::inserted_kind(seq[pos]);
    retained[pos] = false;
  }
  return {TokenSequence::from_tokens(seq.stream(), std::move(tokens)),
          std::move(retained)};
}

/// m times: choose a random eligible token of the current sentence and
/// insert one of its synonyms at a uniformly random slot.
inline OperatorResult random_insert(const TokenSequence& seq, std::size_t m,
                                    const SynonymProvider& lexicon, Rng& rng) {
  std::vector<Token> tokens = seq.tokens();
  for (std::size_t round = 0; round < m; ++round) {
    auto current = TokenSequence::from_tokens(seq.stream(), tokens);
    auto eligible = detail::eligible_positions(current, lexicon);
    if (eligible.empty()) break;
    const auto& source = tokens[eligible[rng.below(eligible.size())]];
    const auto syns = lexicon.synonyms(source);
    Token inserted{syns[rng.below(syns.size())], detail::inserted_kind(source),
                   seq.stream(), 0};
    const auto slot = rng.below(tokens.size() + 1);
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(slot),
                  std::move(inserted));
  }
  return {TokenSequence::from_tokens(seq.stream(), std::move(tokens)),
          std::vector<bool>(seq.length(), true)};
}

/// m independent swaps of two distinct uniformly chosen positions.
inline OperatorResult random_swap(const TokenSequence& seq, std::size_t m,
                                  Rng& rng) {
  std::vector<Token> tokens = seq.tokens();
  const std::size_t n = tokens.size();
  if (n >= 2) {
    for (std::size_t round = 0; round < m; ++round) {
      const auto a = rng.below(n);
      auto b = rng.below(n - 1);
      if (b >= a) ++b;
      std::swap(tokens[a], tokens[b]);
    }
  }
  return {TokenSequence::from_tokens(seq.stream(), std::move(tokens)),
          std::vector<bool>(n, true)};
}

/// Deletes each token independently with probability p. A non-empty input
/// never yields an empty output: if everything would go, one uniformly
/// chosen token is kept.
inline OperatorResult random_delete(const TokenSequence& seq, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0))
    throw InvalidConfigError("deletion probability must lie in [0, 1]");
  std::vector<bool> retained(seq.length());
  bool any = false;
  for (std::size_t i = 0; i < seq.length(); ++i) {
    retained[i] = !rng.bernoulli(p);
    any = any || retained[i];
  }
  if (!any && !seq.empty()) retained[rng.below(seq.length())] = true;
  std::vector<Token> kept;
  for (std::size_t i = 0; i < seq.length(); ++i)
    if (retained[i]) kept.push_back(seq[i]);
  return {TokenSequence::from_tokens(seq.stream(), std::move(kept)),
          std::move(retained)};
}

/// Marks original positions matched by a longest common subsequence with
/// `output`. Among maximal alignments the leftmost original positions win.
inline std::vector<bool> lcs_retained(const std::vector<std::string>& original,
                                      const std::vector<std::string>& output) {
  const std::size_t n = original.size(), m = output.size();
  // suffix[i][j] = LCS length of original[i:] and output[j:]
  std::vector<std::vector<std::size_t>> suffix(n + 1,
                                               std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t j = m; j-- > 0;)
      suffix[i][j] = original[i] == output[j]
                         ? suffix[i + 1][j + 1] + 1
                         : std::max(suffix[i + 1][j], suffix[i][j + 1]);
  std::vector<bool> retained(n, false);
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    if (original[i] == output[j] && suffix[i][j] == suffix[i + 1][j + 1] + 1) {
      retained[i] = true;
      ++i;
      ++j;
    } else if (suffix[i][j + 1] == suffix[i][j]) {
      ++j;
    } else {
      ++i;
    }
  }
  return retained;
}

inline std::size_t lcs_length(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

class TranslatorError : public Error {
 public:
  explicit TranslatorError(const std::string& what)
      : Error(ErrorKind::transport, "translator failure: " + what) {}
};

/// Pivot translation A -> B -> A. `variant` lets a translator return
/// different paraphrases for different samples.
class Translator {
 public:
  virtual ~Translator() = default;
  virtual TokenSequence round_trip(const TokenSequence& seq,
                                   std::size_t variant) const = 0;
};

/// Deterministic stand-in for machine translation. Each table line defines a
/// paraphrase group; the forward pass maps every member phrase to its group
/// (longest match first) and the inverse pass emits a different member of
/// that group.
class StubTranslator final : public Translator {
 public:
  StubTranslator() = default;
  explicit StubTranslator(const SynonymTable& table) {
    for (const auto& [head, alts] : table) {
      std::vector<std::vector<std::string>> group;
      group.push_back(split_words(head));
      for (const auto& a : alts) group.push_back(split_words(a));
      groups_.push_back(std::move(group));
    }
  }

  TokenSequence round_trip(const TokenSequence& seq,
                           std::size_t variant) const override {
    // Forward pass: (group, member) pivots or untouched tokens.
    struct Piece {
      std::optional<std::pair<std::size_t, std::size_t>> pivot;
      Token token;
    };
    std::vector<Piece> pivoted;
    const auto texts = seq.texts();
    std::size_t i = 0;
    while (i < texts.size()) {
      std::size_t best_len = 0;
      std::pair<std::size_t, std::size_t> best{};
      for (std::size_t g = 0; g < groups_.size(); ++g) {
        for (std::size_t k = 0; k < groups_[g].size(); ++k) {
          const auto& phrase = groups_[g][k];
          if (phrase.size() <= best_len || i + phrase.size() > texts.size()) continue;
          if (std::equal(phrase.begin(), phrase.end(), texts.begin() + static_cast<std::ptrdiff_t>(i))) {
            best_len = phrase.size();
            best = {g, k};
          }
        }
      }
      if (best_len == 0) {
        pivoted.push_back({std::nullopt, seq[i]});
        ++i;
      } else {
        pivoted.push_back({best, seq[i]});
        i += best_len;
      }
    }
    // Inverse pass with paraphrase.
    std::vector<Token> out;
    for (const auto& piece : pivoted) {
      if (!piece.pivot) {
        out.push_back(piece.token);
        continue;
      }
      const auto [g, k] = *piece.pivot;
      const auto& group = groups_[g];
      std::size_t member = k;
      if (group.size() > 1) {
        member = (k + 1 + variant % (group.size() - 1)) % group.size();
      }
      for (const auto& w : group[member]) {
        out.push_back(Token{w, piece.token.kind == TokenKind::stopword
                                   ? TokenKind::word
                                   : piece.token.kind,
                            seq.stream(), 0});
      }
    }
    return TokenSequence::from_tokens(seq.stream(), std::move(out));
  }

 private:
  static std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : s) {
      if (detail::is_space(c)) {
        if (!cur.empty()) words.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
  }

  std::vector<std::vector<std::vector<std::string>>> groups_;
};

inline OperatorResult back_translate(const TokenSequence& seq,
                                     const Translator& translator,
                                     std::size_t variant = 0) {
  auto out = translator.round_trip(seq, variant);
  auto retained = lcs_retained(seq.texts(), out.texts());
  return {std::move(out), std::move(retained)};
}

struct PerturbedSample {
  std::size_t index = 0;
  TokenSequence code{Stream::code};
  TokenSequence comment{Stream::comment};
  std::vector<bool> retained_mask;  // original code positions, then comment
  AugmentOp op = AugmentOp::SR;

  ProgramInput as_input() const { return ProgramInput{code, comment}; }
};

/// Lexicons and translator used by generate_perturbations.
struct PerturbationContext {
  const SynonymProvider& comment_lexicon;
  const SynonymProvider& code_lexicon;
  const Translator& translator;
};

/// Error raised while producing one sample; carries the sample index.
class SampleError : public Error {
 public:
  SampleError(std::size_t index, const Error& cause)
      : Error(cause.kind(), "sample " + std::to_string(index) + ": " + cause.what()),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

namespace detail {

inline OperatorResult apply_op(const TokenSequence& seq, const PerturbationConfig& cfg,
                               const SynonymProvider& lexicon,
                               const Translator& translator, Rng& rng,
                               std::size_t index) {
  const auto m = perturbation_count(cfg.alpha, seq.length());
  switch (cfg.op) {
    case AugmentOp::SR: return synonym_replace(seq, m, lexicon, rng);
    case AugmentOp::RI: return random_insert(seq, m, lexicon, rng);
    case AugmentOp::RS: return random_swap(seq, m, rng);
    case AugmentOp::RD: return random_delete(seq, cfg.alpha, rng);
    case AugmentOp::BT: return back_translate(seq, translator, index);
  }
  return {seq, std::vector<bool>(seq.length(), true)};
}

inline PerturbedSample make_sample(const ProgramInput& input,
                                   const PerturbationConfig& cfg,
                                   const PerturbationContext& ctx, std::size_t index) {
  Rng rng(derive_seed(cfg.seed, index));
  PerturbedSample s;
  s.index = index;
  s.op = cfg.op;
  std::vector<bool> code_mask(input.code.length(), true);
  std::vector<bool> comment_mask(input.comment.length(), true);
  s.code = input.code;
  s.comment = input.comment;
  try {
    if (cfg.perturb_code) {
      auto r = apply_op(input.code, cfg, ctx.code_lexicon, ctx.translator, rng, index);
      s.code = std::move(r.sequence);
      code_mask = std::move(r.retained);
    }
    if (cfg.perturb_comment) {
      auto r = apply_op(input.comment, cfg, ctx.comment_lexicon, ctx.translator, rng,
                        index);
      s.comment = std::move(r.sequence);
      comment_mask = std::move(r.retained);
    }
  } catch (const Error& e) {
    throw SampleError(index, e);
  }
  s.retained_mask = std::move(code_mask);
  s.retained_mask.insert(s.retained_mask.end(), comment_mask.begin(),
                         comment_mask.end());
  return s;
}

}  // namespace detail

/// Produces cfg.m_dist perturbed samples. Sample i draws from an RNG seeded
/// by (cfg.seed, i), so the result does not depend on `workers`.
inline std::vector<PerturbedSample> generate_perturbations(
    const ProgramInput& input, const PerturbationConfig& cfg,
    const PerturbationContext& ctx, std::size_t workers = 1) {
  cfg.validate();
  std::vector<PerturbedSample> samples(cfg.m_dist);
  if (workers <= 1 || cfg.m_dist < 2) {
    for (std::size_t i = 0; i < cfg.m_dist; ++i)
      samples[i] = detail::make_sample(input, cfg, ctx, i);
    return samples;
  }
  std::vector<std::optional<SampleError>> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < cfg.m_dist; i += workers)
            samples[i] = detail::make_sample(input, cfg, ctx, i);
        } catch (const SampleError& e) {
          errors[w] = e;
        }
      });
    }
  }
  const SampleError* first = nullptr;
  for (const auto& e : errors)
    if (e && (!first || e->index() < first->index())) first = &*e;
  if (first) throw *first;
  return samples;
}

}  // namespace cpr
