#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "harmclf/embeddings.hpp"
#include "harmclf/random.hpp"
#include "support/oracles.hpp"

using namespace harmclf;

namespace {

Dataset small_dataset() {
  Dataset ds;
  ds.examples = {{"a", "پہلا جملہ", 1}, {"b", "دوسرا جملہ یہاں", 0}, {"c", "third sentence", 0}};
  return ds;
}

// Bucket indices of every trigram, computed by re-hashing each code-point
// window independently of hash_embed.
std::set<std::uint64_t> trigram_buckets(const std::string& text, std::size_t dim, std::int64_t seed) {
  const auto offsets = *text::codepoint_offsets(text);
  std::set<std::uint64_t> buckets;
  for (std::size_t i = 0; i + 3 < offsets.size(); ++i)
    buckets.insert(keyed_hash(std::string_view(text).substr(offsets[i], offsets[i + 3] - offsets[i]),
                              static_cast<std::uint64_t>(seed), 0xb0c4e7u) %
                   dim);
  return buckets;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(HashEmbed, SingleTrigramIsOneHot) {
  const auto v = hash_embed("aaa", 256, 0);
  const auto nonzero = std::count_if(v.begin(), v.end(), [](double x) { return x != 0.0; });
  EXPECT_EQ(nonzero, 1);
  EXPECT_EQ(std::abs(*std::max_element(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); })),
            1.0);
}

TEST(HashEmbed, DeterministicAndSeedSensitive) {
  const auto a = hash_embed("کچھ متن یہاں", 64, 9);
  const auto b = hash_embed("کچھ متن یہاں", 64, 9);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, hash_embed("کچھ متن یہاں", 64, 10));
}

TEST(HashEmbed, UnitNormWheneverATrigramExists) {
  std::mt19937 rng(1);
  const std::string alphabet[] = {"a", "b", " ", "ک", "ے", "ب"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const int len = 3 + static_cast<int>(rng() % 20);
    for (int k = 0; k < len; ++k) s += alphabet[rng() % 6];
    const auto v = hash_embed(s, 2 + rng() % 300, static_cast<std::int64_t>(rng()));
    double norm = 0;
    for (double x : v) norm += x * x;
    // Opposite-signed trigrams can cancel to an all-zero vector.
    if (norm == 0.0) continue;
    EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-9) << s;
  }
}

TEST(HashEmbed, ShortTextIsZero) {
  const auto v = hash_embed("ab", 16, 0);
  EXPECT_TRUE(std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }));
  EXPECT_THROW(hash_embed("abc", 1, 0), ConfigError);
}

TEST(HashEmbed, DisjointBucketsGiveZeroCosine) {
  const std::size_t dim = 4096;
  const std::string a = "abcdef", b = "uvwxyz";
  const auto ba = trigram_buckets(a, dim, 0), bb = trigram_buckets(b, dim, 0);
  std::vector<std::uint64_t> shared;
  std::set_intersection(ba.begin(), ba.end(), bb.begin(), bb.end(), std::back_inserter(shared));
  ASSERT_TRUE(shared.empty()) << "fixture buckets collide; pick another pair";
  EXPECT_EQ(dot(hash_embed(a, dim, 0), hash_embed(b, dim, 0)), 0.0);
  // The nonzero coordinates are exactly the enumerated buckets.
  const auto va = hash_embed(a, dim, 0);
  std::set<std::uint64_t> nz;
  for (std::size_t i = 0; i < dim; ++i)
    if (va[i] != 0.0) nz.insert(i);
  EXPECT_EQ(nz, ba);
}

TEST(EmbedBatch, RowsFollowDatasetOrder) {
  const Dataset ds = small_dataset();
  const HashingEmbedder embedder(32, 4);
  const auto m = embed_batch(embedder, ds);
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.dim, 32u);
  EXPECT_EQ(m.ids, (std::vector<std::string>{"a", "b", "c"}));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto expected = hash_embed(ds.examples[i].text, 32, 4);
    EXPECT_TRUE(std::equal(expected.begin(), expected.end(), m.row(i).begin()));
  }
  EXPECT_EQ(embed_batch(embedder, Dataset{}).rows(), 0u);
}

TEST(EmbedBatch, PermutationEquivariance) {
  Dataset ds = small_dataset();
  const HashingEmbedder embedder(16, 0);
  const auto before = embed_batch(embedder, ds);
  std::reverse(ds.examples.begin(), ds.examples.end());
  const auto after = embed_batch(embedder, ds);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto a = after.row(i), b = before.row(ds.size() - 1 - i);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST(EmbedBatch, ProviderFailureNamesTheId) {
  std::unordered_map<std::string, std::vector<double>> table{{"a", {1, 2}}, {"b", {3, 4}}};
  const PrecomputedEmbedder embedder(table, 2, "memory");
  try {
    embed_batch(embedder, small_dataset());
    FAIL() << "expected BatchEmbedError";
  } catch (const BatchEmbedError& e) {
    EXPECT_EQ(e.id(), "c");
  }
}

TEST(Precomputed, ReordersToExpectedIds) {
  oracle::TempDir dir("emb");
  std::ofstream(dir / "v.txt") << "a\t1 2\nb\t3 4\nc\t5 6\n";
  const auto m = load_precomputed((dir / "v.txt").string(), {"c", "a", "b"});
  EXPECT_EQ(m.ids, (std::vector<std::string>{"c", "a", "b"}));
  EXPECT_EQ(m.values, (std::vector<double>{5, 6, 1, 2, 3, 4}));
}

TEST(Precomputed, Errors) {
  oracle::TempDir dir("emb");
  std::ofstream(dir / "v.txt") << "a\t1 2\nb\t3 4\n";
  try {
    load_precomputed((dir / "v.txt").string(), {"a", "d"});
    FAIL() << "expected MissingEmbedding";
  } catch (const MissingEmbedding& e) {
    EXPECT_EQ(e.id(), "d");
  }
  std::ofstream(dir / "ragged.txt") << "a\t1 2\nb\t3 4 5\n";
  EXPECT_THROW(load_precomputed((dir / "ragged.txt").string(), {"a"}), RaggedEmbeddings);
  std::ofstream(dir / "nan.txt") << "a\t1 nan\n";
  EXPECT_THROW(load_precomputed((dir / "nan.txt").string(), {"a"}), NonFiniteEmbedding);
  std::ofstream(dir / "inf.txt") << "a\tinf 1\n";
  EXPECT_THROW(load_precomputed((dir / "inf.txt").string(), {"a"}), NonFiniteEmbedding);
  std::ofstream(dir / "junk.txt") << "a\t1 x2\n";
  EXPECT_THROW(load_precomputed((dir / "junk.txt").string(), {"a"}), ParseError);
}

TEST(Precomputed, SaveLoadIsExact) {
  oracle::TempDir dir("emb");
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 3.0);
  EmbeddingMatrix m;
  m.dim = 16;
  for (int i = 0; i < 5; ++i) m.ids.push_back("id" + std::to_string(i));
  for (int k = 0; k < 5 * 16; ++k) m.values.push_back(normal(rng) * std::pow(10.0, static_cast<double>(k % 7) - 3));
  save_precomputed((dir / "m.txt").string(), m);
  const auto back = load_precomputed((dir / "m.txt").string(), m.ids);
  EXPECT_EQ(back.ids, m.ids);
  EXPECT_EQ(back.dim, 16u);
  EXPECT_EQ(back.values, m.values);
}
