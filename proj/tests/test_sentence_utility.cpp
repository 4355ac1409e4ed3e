#include "mbrot/sentence_utility.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>
#include <sstream>
#include <vector>

#include "oracles.hpp"

using namespace mbrot;

TEST(TokenF1, Examples) {
  TokenF1 f1;
  EXPECT_EQ(f1.score("I like cats .", "I like cats ."), 1.0);
  // precision 4/6, recall 4/4.
  EXPECT_NEAR(f1.score("I like cats and dogs .", "I like cats ."), 0.8, 1e-15);
  EXPECT_EQ(f1.score("a b", "c d"), 0.0);
}

TEST(TokenF1, MatchesMultisetOracle) {
  TokenF1 f1;
  std::mt19937_64 rng(3);
  for (int k = 0; k < 2000; ++k) {
    auto a = oracle::random_sentence(rng);
    auto b = oracle::random_sentence(rng);
    EXPECT_NEAR(f1.score(a, b), oracle::token_f1(a, b), 1e-12) << a << " | " << b;
  }
}

TEST(SentenceBleu, SelfMatchAndOrdering) {
  SentenceBleu bleu;
  EXPECT_EQ(bleu.score("the cat sat on the mat", "the cat sat on the mat"), 1.0);
  EXPECT_EQ(bleu.score("x", "x"), 1.0);
  EXPECT_EQ(bleu.score("dog", "the cat sat"), 0.0);
  double close = bleu.score("the cat sat on a mat", "the cat sat on the mat");
  double far = bleu.score("a mat", "the cat sat on the mat");
  EXPECT_GT(close, far);
  EXPECT_LT(close, 1.0);
}

TEST(SentenceBleu, HandComputedValue) {
  // hyp "a b c", ref "a b d": p1 = 2/3, p2 = (1+1)/(2+1), p3 = (0+1)/(1+1),
  // p4 = (0+1)/(0+1); equal lengths so no brevity penalty.
  SentenceBleu bleu;
  double expected = std::exp((std::log(2.0 / 3) + std::log(2.0 / 3) + std::log(0.5) + 0.0) / 4);
  EXPECT_NEAR(bleu.score("a b c", "a b d"), expected, 1e-15);
  // Brevity: hyp "a b" vs ref "a b c d": exp(1 - 4/2) * geometric mean.
  double bp = std::exp(1.0 - 2.0);
  double p = std::exp((0.0 + std::log(2.0 / 2) + 0.0 + 0.0) / 4);
  EXPECT_NEAR(bleu.score("a b", "a b c d"), bp * p, 1e-15);
}

TEST(SentenceBleu, JapaneseUsesCharacters) {
  SentenceBleu ja("ja");
  EXPECT_EQ(ja.score("猫が好き", "猫が好き"), 1.0);
  EXPECT_GT(ja.score("猫が好き", "犬が好き"), 0.0);
  SentenceBleu en("en");
  EXPECT_EQ(en.score("猫が好き", "犬が好き"), 0.0);
}

TEST(ChrF, SelfMatchAndPartial) {
  ChrF chrf;
  EXPECT_EQ(chrf.score("colourless green ideas", "colourless green ideas"), 1.0);
  double partial = chrf.score("colorless green idea", "colourless green ideas");
  EXPECT_GT(partial, 0.5);
  EXPECT_LT(partial, 1.0);
  EXPECT_EQ(chrf.score("abc", "xyz"), 0.0);
}

TEST(ChrF, HandComputedUnigramOrder) {
  // Order 1 only: hyp "ab" ref "abcd": P = 1, R = 0.5, beta 2:
  // F = 5 * 0.5 / (4 * 1 + 0.5).
  ChrF chrf(1, 2.0);
  EXPECT_NEAR(chrf.score("ab", "abcd"), 2.5 / 4.5, 1e-15);
}

TEST(Rescale, LowerIsBetter) {
  EXPECT_EQ(rescale_lower_better(0, 0, 25), 1.0);
  EXPECT_EQ(rescale_lower_better(25, 0, 25), 0.0);
  EXPECT_EQ(rescale_lower_better(12.5, 0, 25), 0.5);
  EXPECT_EQ(rescale_lower_better(-3, 0, 25), 1.0);
  EXPECT_EQ(rescale_lower_better(40, 0, 25), 0.0);
  try {
    rescale_lower_better(1, 5, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidRange);
  }
  EXPECT_THROW(rescale_lower_better(1, 6, 5), Error);
}

namespace {

std::shared_ptr<EmbeddingTable> small_table() {
  auto table = std::make_shared<EmbeddingTable>();
  table->add("north", {0.0, 3.0});
  table->add("east", {2.0, 0.0});
  table->add("west", {-1.0, 0.0});
  table->add("northeast", {1.0, 1.0});
  return table;
}

}  // namespace

TEST(EmbeddingCosine, ClampsAndNormalizes) {
  EmbeddingCosine cos(small_table());
  EXPECT_EQ(cos.score("north", "east"), 0.0);
  EXPECT_EQ(cos.score("east", "west"), 0.0);
  EXPECT_EQ(cos.score("north", "north"), 1.0);
  EXPECT_NEAR(cos.score("north", "northeast"), std::sqrt(0.5), 1e-12);
  EXPECT_EQ(cos.score("north", "northeast"), cos.score("northeast", "north"));
}

TEST(EmbeddingCosine, MissingEmbedding) {
  EmbeddingCosine cos(small_table());
  try {
    cos.score("north", "south");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingEmbedding);
  }
}

TEST(EmbeddingTable, LoadsJsonlAndValidates) {
  std::istringstream good(
      "{\"text\": \"a\", \"vector\": [3, 4]}\n\n{\"text\": \"b\", \"vector\": [0, 2]}\n");
  auto table = EmbeddingTable::load(good);
  EXPECT_EQ(table.size(), 2u);
  EXPECT_EQ(table.dimension(), 2u);
  EXPECT_NEAR((*table.find("a"))[0], 0.6, 1e-15);
  EXPECT_NEAR((*table.find("a"))[1], 0.8, 1e-15);

  std::istringstream ragged(
      "{\"text\": \"a\", \"vector\": [1, 0]}\n{\"text\": \"b\", \"vector\": [1, 0, 0]}\n");
  EXPECT_THROW(EmbeddingTable::load(ragged), Error);
  std::istringstream zero("{\"text\": \"a\", \"vector\": [0, 0]}\n");
  EXPECT_THROW(EmbeddingTable::load(zero), Error);
  std::istringstream broken("{\"text\": \"a\"\n");
  EXPECT_THROW(EmbeddingTable::load(broken), Error);
}

TEST(BatchScore, ConsistentWithScorePair) {
  TokenF1 f1;
  Segment a("I like cats and dogs ."), b("I like cats .");
  std::vector<std::pair<Segment, Segment>> pairs = {{a, a}, {a, b}};
  auto scores = batch_score(f1, pairs);
  ASSERT_EQ(scores.size(), 2u);
  EXPECT_EQ(scores[0], 1.0);
  EXPECT_EQ(scores[1], score_pair(f1, a, b));

  std::vector<std::pair<Segment, Segment>> same(3, {a, b});
  auto triple = batch_score(f1, same);
  EXPECT_EQ(triple[0], triple[1]);
  EXPECT_EQ(triple[1], triple[2]);

  EXPECT_THROW(batch_score(f1, std::vector<std::pair<Segment, Segment>>{}), Error);
}

TEST(BatchScore, ReportsFailingIndex) {
  EmbeddingCosine cos(std::make_shared<EmbeddingTable>());
  std::vector<std::pair<Segment, Segment>> pairs = {{Segment("x"), Segment("y")}};
  try {
    batch_score(cos, pairs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingEmbedding);
    ASSERT_TRUE(e.index().has_value());
    EXPECT_EQ(*e.index(), 0u);
  }

  auto table = small_table();
  EmbeddingCosine partial(table);
  std::vector<std::pair<Segment, Segment>> mixed = {
      {Segment("north"), Segment("east")}, {Segment("north"), Segment("nowhere")}};
  try {
    batch_score(partial, mixed);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(*e.index(), 1u);
  }
}

TEST(SentenceUtilityProperties, RangeSymmetryAndSelfMatch) {
  std::mt19937_64 rng(5);
  auto table = std::make_shared<EmbeddingTable>();
  std::normal_distribution<double> gauss;
  std::vector<std::string> pool;
  for (int k = 0; k < 200; ++k) {
    auto s = oracle::random_sentence(rng);
    if (table->find(s)) continue;
    std::vector<double> v(8);
    for (auto& x : v) x = gauss(rng);
    table->add(s, v);
    pool.push_back(s);
  }
  std::vector<std::unique_ptr<SentenceUtility>> scorers;
  scorers.push_back(std::make_unique<TokenF1>());
  scorers.push_back(std::make_unique<SentenceBleu>());
  scorers.push_back(std::make_unique<SentenceBleu>("ja"));
  scorers.push_back(std::make_unique<ChrF>());
  scorers.push_back(std::make_unique<ExactMatch>());
  scorers.push_back(std::make_unique<EmbeddingCosine>(table));

  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int k = 0; k < 10000; ++k) {
    const auto& a = pool[pick(rng)];
    const auto& b = pool[pick(rng)];
    for (const auto& u : scorers) {
      double s = u->score(a, b);
      ASSERT_GE(s, 0.0) << u->id();
      ASSERT_LE(s, 1.0) << u->id();
      if (u->symmetric()) {
        ASSERT_EQ(s, u->score(b, a)) << u->id();
      }
    }
  }
  for (const auto& s : pool)
    for (const auto& u : scorers) EXPECT_EQ(u->score(s, s), 1.0) << u->id() << " " << s;
}
