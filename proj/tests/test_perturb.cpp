#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "support.hpp"

using namespace cpr;
using cpr::testing::words;

namespace {

using V = std::vector<std::string>;

LexiconSynonyms lexicon(SynonymTable t) { return LexiconSynonyms(std::move(t)); }

ProgramInput sample_input() {
  const auto& r = cpr::testing::bundled();
  return ProgramInput{tokenize_code("for (i = 0; i <= n; i++) { s += a[i]; }", "java"),
                      tokenize_comment("sum the array elements with the loop bound exclusive of n",
                                       r.stopwords)};
}

}  // namespace

TEST(PerturbationCount, Examples) {
  EXPECT_EQ(perturbation_count(0.0, 25), 0u);
  EXPECT_EQ(perturbation_count(0.5, 7), 3u);
  EXPECT_EQ(perturbation_count(1.0, 9), 9u);
  EXPECT_EQ(perturbation_count(0.29, 100), 29u);
}

TEST(PerturbationCount, RejectsAlphaOutsideUnitInterval) {
  EXPECT_THROW(perturbation_count(-0.1, 3), InvalidConfigError);
  EXPECT_THROW(perturbation_count(1.5, 3), InvalidConfigError);
}

TEST(PerturbationCount, MonotoneAndBounded) {
  for (std::size_t l = 0; l < 60; ++l) {
    std::size_t prev = 0;
    for (int k = 0; k <= 100; ++k) {
      const auto m = perturbation_count(k / 100.0, l);
      EXPECT_LE(m, l);
      EXPECT_GE(m, prev);
      if (l > 0) {
        EXPECT_GE(m, perturbation_count(k / 100.0, l - 1));
      }
      prev = m;
    }
  }
}

TEST(Config, Validation) {
  PerturbationConfig c;
  EXPECT_NO_THROW(c.validate());
  c.m_dist = 0;
  EXPECT_THROW(c.validate(), InvalidConfigError);
  c = {};
  c.perturb_comment = false;
  EXPECT_THROW(c.validate(), InvalidConfigError);
  c = {};
  c.alpha = 2;
  EXPECT_THROW(c.validate(), InvalidConfigError);
  EXPECT_EQ(parse_op("BT"), AugmentOp::BT);
  EXPECT_THROW(parse_op("XX"), InvalidConfigError);
}

TEST(SynonymReplace, ZeroIsIdentity) {
  auto lex = lexicon({{"large", {"big"}}});
  Rng rng(1);
  auto seq = words({"large", "value"});
  auto r = synonym_replace(seq, 0, lex, rng);
  EXPECT_EQ(r.sequence, seq);
  EXPECT_EQ(r.retained, (std::vector<bool>{true, true}));
}

TEST(SynonymReplace, SingleEligibleToken) {
  auto lex = lexicon({{"large", {"big"}}, {"the", {"a"}}});
  auto seq = words({"large", "the", "value"}, {"the"});
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    auto r = synonym_replace(seq, 1, lex, rng);
    EXPECT_EQ(r.sequence.texts(), (V{"big", "the", "value"}));
    EXPECT_EQ(r.retained, (std::vector<bool>{false, true, true}));
  }
}

TEST(SynonymReplace, UniformPositionFrequency) {
  SynonymTable t;
  std::vector<std::string> texts;
  for (int i = 0; i < 10; ++i) {
    texts.push_back("w" + std::to_string(i));
    t[texts.back()] = {"s" + std::to_string(i)};
  }
  auto lex = lexicon(t);
  auto seq = comment_sequence(texts);
  // Enumeration oracle: each of the C(10,2) subsets contains a given position
  // in 9 of 45 cases.
  const double expected = 9.0 / 45.0;
  std::vector<int> hits(10, 0);
  const int runs = 10000;
  for (int s = 0; s < runs; ++s) {
    Rng rng(derive_seed(42, static_cast<std::uint64_t>(s)));
    auto r = synonym_replace(seq, 2, lex, rng);
    EXPECT_EQ(std::count(r.retained.begin(), r.retained.end(), false), 2);
    for (int i = 0; i < 10; ++i) hits[i] += !r.retained[static_cast<std::size_t>(i)];
  }
  for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / runs, expected, 0.02);
}

TEST(SynonymReplace, NeverTouchesStopwords) {
  const auto& r = cpr::testing::bundled();
  for (const auto& [key, alts] : r.lexicon.table()) {
    auto seq = tokenize_comment("the " + key + " of a " + key + " and the", r.stopwords);
    for (std::uint64_t s = 0; s < 10; ++s) {
      Rng rng(s);
      auto out = synonym_replace(seq, seq.length(), r.lexicon, rng);
      for (std::size_t i = 0; i < seq.length(); ++i)
        if (seq[i].kind == TokenKind::stopword) {
          EXPECT_TRUE(out.retained[i]);
          EXPECT_EQ(out.sequence[i].text, seq[i].text);
        }
    }
  }
}

TEST(RandomInsert, ZeroAndEmpty) {
  auto lex = lexicon({{"fast", {"quick"}}});
  Rng rng(3);
  auto seq = words({"fast"});
  EXPECT_EQ(random_insert(seq, 0, lex, rng).sequence, seq);
  auto empty = TokenSequence(Stream::comment);
  auto r = random_insert(empty, 4, lex, rng);
  EXPECT_TRUE(r.sequence.empty());
  EXPECT_TRUE(r.retained.empty());
}

TEST(RandomInsert, TwoSlotsEquallyLikely) {
  auto lex = lexicon({{"fast", {"quick"}}});
  auto seq = words({"fast"});
  int before = 0;
  const int runs = 4000;
  for (int s = 0; s < runs; ++s) {
    Rng rng(derive_seed(5, static_cast<std::uint64_t>(s)));
    auto r = random_insert(seq, 1, lex, rng);
    ASSERT_EQ(r.sequence.length(), 2u);
    EXPECT_EQ(r.retained, (std::vector<bool>{true}));
    if (r.sequence.texts() == V{"quick", "fast"}) {
      ++before;
    } else {
      EXPECT_EQ(r.sequence.texts(), (V{"fast", "quick"}));
    }
  }
  EXPECT_NEAR(static_cast<double>(before) / runs, 0.5, 0.03);
}

TEST(RandomInsert, LengthGrowsByAtMostM) {
  const auto& r = cpr::testing::bundled();
  auto seq = tokenize_comment("compute the sum of the list elements with the same value", r.stopwords);
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng(s);
    auto out = random_insert(seq, 3, r.lexicon, rng);
    EXPECT_GE(out.sequence.length(), seq.length());
    EXPECT_LE(out.sequence.length(), seq.length() + 3);
  }
}

TEST(RandomSwap, Trivial) {
  Rng rng(9);
  auto one = words({"a"});
  EXPECT_EQ(random_swap(one, 5, rng).sequence, one);
  auto two = words({"a", "b"});
  EXPECT_EQ(random_swap(two, 0, rng).sequence, two);
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng r2(s);
    EXPECT_EQ(random_swap(two, 1, r2).sequence.texts(), (V{"b", "a"}));
  }
}

TEST(RandomDelete, Trivial) {
  auto seq = words({"a", "b", "c", "d"});
  Rng rng(1);
  auto r = random_delete(seq, 0.0, rng);
  EXPECT_EQ(r.sequence, seq);
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng r2(s);
    auto all = random_delete(seq, 1.0, r2);
    EXPECT_EQ(all.sequence.length(), 1u);
    EXPECT_EQ(std::count(all.retained.begin(), all.retained.end(), true), 1);
  }
  EXPECT_THROW(random_delete(seq, 1.5, rng), InvalidConfigError);
}

TEST(RandomDelete, SurvivorMeanMatchesBinomial) {
  std::vector<std::string> texts;
  for (int i = 0; i < 20; ++i) texts.push_back("t" + std::to_string(i));
  auto seq = comment_sequence(texts);
  double total = 0;
  const int runs = 10000;
  for (int s = 0; s < runs; ++s) {
    Rng rng(derive_seed(77, static_cast<std::uint64_t>(s)));
    total += static_cast<double>(random_delete(seq, 0.3, rng).sequence.length());
  }
  EXPECT_NEAR(total / runs, 14.0, 0.15);
}

TEST(BackTranslate, EmptyTableIsIdentity) {
  StubTranslator stub;
  auto seq = words({"returns", "maximum", "value"});
  auto r = back_translate(seq, stub);
  EXPECT_EQ(r.sequence.texts(), seq.texts());
  EXPECT_EQ(r.retained, (std::vector<bool>(3, true)));
}

TEST(BackTranslate, PhraseGroupParaphrase) {
  StubTranslator stub(SynonymTable{{"maximum", {"largest"}}});
  auto seq = words({"returns", "maximum", "value"});
  auto r = back_translate(seq, stub);
  EXPECT_EQ(r.sequence.texts(), (V{"returns", "largest", "value"}));
  EXPECT_EQ(r.retained, (std::vector<bool>{true, false, true}));
}

TEST(BackTranslate, MultiWordPhrasesLongestMatch) {
  StubTranslator stub(SynonymTable{{"at least", {"no fewer than"}}, {"least", {"fewest"}}});
  auto r = back_translate(words({"keep", "at", "least", "one"}), stub);
  EXPECT_EQ(r.sequence.texts(), (V{"keep", "no", "fewer", "than", "one"}));
  EXPECT_EQ(r.retained, (std::vector<bool>{true, false, false, true}));
}

TEST(BackTranslate, VariantCyclesThroughGroup) {
  StubTranslator stub(SynonymTable{{"big", {"large", "huge"}}});
  std::set<std::string> seen;
  for (std::size_t v = 0; v < 6; ++v) {
    auto out = stub.round_trip(words({"big"}), v);
    ASSERT_EQ(out.length(), 1u);
    EXPECT_NE(out[0].text, "big");
    seen.insert(out[0].text);
  }
  EXPECT_EQ(seen, (std::set<std::string>{"large", "huge"}));
}

TEST(LcsRetained, LeftmostAlignment) {
  EXPECT_EQ(lcs_retained({"a", "b", "c"}, {"a", "x", "c", "y"}),
            (std::vector<bool>{true, false, true}));
  EXPECT_EQ(lcs_retained({"a", "a"}, {"a"}), (std::vector<bool>{true, false}));
  EXPECT_EQ(lcs_retained({"a", "b", "a"}, {"a"}), (std::vector<bool>{true, false, false}));
  EXPECT_EQ(lcs_length({"a", "b", "c"}, {"b", "c", "a"}), 2u);
}

TEST(Generate, ZeroAlphaSingleSample) {
  const auto& kit = cpr::testing::toolkit();
  auto in = sample_input();
  PerturbationConfig cfg;
  cfg.m_dist = 1;
  cfg.alpha = 0.0;
  auto samples = generate_perturbations(in, cfg, kit.context());
  ASSERT_EQ(samples.size(), 1u);
  EXPECT_EQ(samples[0].as_input(), in);
  EXPECT_EQ(samples[0].retained_mask,
            std::vector<bool>(in.code.length() + in.comment.length(), true));
}

TEST(Generate, DeterministicAndScheduleIndependent) {
  const auto& kit = cpr::testing::toolkit();
  auto in = sample_input();
  for (auto op : kAllOps) {
    PerturbationConfig cfg;
    cfg.op = op;
    cfg.seed = 1234;
    cfg.perturb_code = true;
    cfg.m_dist = 64;
    auto a = generate_perturbations(in, cfg, kit.context(), 1);
    auto b = generate_perturbations(in, cfg, kit.context(), 4);
    ASSERT_EQ(a.size(), 64u);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].index, i);
      EXPECT_EQ(a[i].as_input(), b[i].as_input()) << to_string(op) << " sample " << i;
      EXPECT_EQ(a[i].retained_mask, b[i].retained_mask);
    }
  }
}

TEST(Generate, StreamFlagsAndMaskInvariants) {
  const auto& kit = cpr::testing::toolkit();
  auto in = sample_input();
  const auto n = in.code.length() + in.comment.length();
  for (auto op : kAllOps) {
    PerturbationConfig cfg;
    cfg.op = op;
    cfg.alpha = 0.3;
    cfg.m_dist = 50;
    auto samples = generate_perturbations(in, cfg, kit.context());
    for (const auto& s : samples) {
      ASSERT_EQ(s.retained_mask.size(), n);
      EXPECT_EQ(s.code, in.code);  // code untouched by default
      for (std::size_t i = 0; i < in.code.length(); ++i) {
        EXPECT_TRUE(s.retained_mask[i]);
      }
      if (op == AugmentOp::RS) {
        EXPECT_EQ(std::count(s.retained_mask.begin(), s.retained_mask.end(), false), 0);
      }
      if (op == AugmentOp::SR) {
        EXPECT_EQ(s.comment.length(), in.comment.length());
      }
      if (op == AugmentOp::RD) {
        EXPECT_GE(s.comment.length(), 1u);
      }
      const auto texts = s.comment.texts();
      for (std::size_t i = 0; i < in.comment.length(); ++i) {
        if (s.retained_mask[in.code.length() + i]) {
          EXPECT_NE(std::find(texts.begin(), texts.end(), in.comment[i].text), texts.end());
        }
      }
    }
  }
}

TEST(Generate, CodeSynonymsOnlyRenameIdentifiers) {
  const auto& kit = cpr::testing::toolkit();
  auto in = sample_input();
  PerturbationConfig cfg;
  cfg.perturb_code = true;
  cfg.perturb_comment = false;
  cfg.alpha = 1.0;
  cfg.m_dist = 20;
  for (const auto& s : generate_perturbations(in, cfg, kit.context())) {
    ASSERT_EQ(s.code.length(), in.code.length());
    for (std::size_t i = 0; i < in.code.length(); ++i) {
      if (in.code[i].kind != TokenKind::identifier) {
        EXPECT_EQ(s.code[i].text, in.code[i].text);
      } else {
        EXPECT_EQ(s.code[i].text, in.code[i].text + "_r");
      }
    }
  }
}

TEST(Generate, RdMeanRetainedCommentTokens) {
  const auto& kit = cpr::testing::toolkit();
  std::string text;
  for (int i = 0; i < 30; ++i) text += "word" + std::to_string(i) + " ";
  ProgramInput in{tokenize_code("x"), tokenize_comment(text, {})};
  PerturbationConfig cfg;
  cfg.op = AugmentOp::RD;
  cfg.m_dist = 100;
  double total = 0;
  for (const auto& s : generate_perturbations(in, cfg, kit.context())) total += s.comment.length();
  EXPECT_NEAR(total / 100.0, 27.0, 0.6);
}

namespace {

class FailingTranslator final : public Translator {
 public:
  TokenSequence round_trip(const TokenSequence& seq, std::size_t variant) const override {
    if (variant == 3) throw TranslatorError("pivot unavailable");
    return seq;
  }
};

}  // namespace

TEST(Generate, TranslatorFailureCarriesSampleIndex) {
  FailingTranslator bad;
  IdentifierRenamer ren;
  const auto& r = cpr::testing::bundled();
  PerturbationContext ctx{r.lexicon, ren, bad};
  PerturbationConfig cfg;
  cfg.op = AugmentOp::BT;
  cfg.m_dist = 10;
  for (std::size_t workers : {1u, 3u}) {
    try {
      generate_perturbations(sample_input(), cfg, ctx, workers);
      FAIL();
    } catch (const SampleError& e) {
      EXPECT_EQ(e.index(), 3u);
      EXPECT_EQ(e.kind(), ErrorKind::transport);
    }
  }
}
