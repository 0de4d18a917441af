#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "harmclf/corpus.hpp"
#include "harmclf/error.hpp"
#include "harmclf/random.hpp"
#include "harmclf/text.hpp"

namespace harmclf {

inline constexpr std::size_t kDefaultHashDim = 256;
inline constexpr std::size_t kDefaultPrecomputedDim = 1024;

// Row-major n_rows x dim matrix with one id per row.
struct EmbeddingMatrix {
  std::vector<std::string> ids;
  std::vector<double> values;
  std::size_t dim = 0;
  std::string provider_tag;

  std::size_t rows() const noexcept { return ids.size(); }

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
  std::span<double> row(std::size_t i) { return {values.data() + i * dim, dim}; }

  double operator()(std::size_t i, std::size_t j) const { return values[i * dim + j]; }
};

// Signed feature hashing of code-point trigrams. The bucket and the sign
// come from two independently salted hashes of the trigram's UTF-8 bytes.
// The result is L2-normalized unless no trigram exists (text shorter than
// three code points), in which case it is all zeros.
inline std::vector<double> hash_embed(std::string_view text, std::size_t dim, std::int64_t seed) {
  if (dim < 2) throw ConfigError("hash embedding dimension must be at least 2");
  std::vector<double> v(dim, 0.0);
  const auto offsets = text::codepoint_offsets(text);
  if (!offsets) throw DataError("text is not valid UTF-8");
  const std::size_t n_codepoints = offsets->size() - 1;
  const auto seed_bits = static_cast<std::uint64_t>(seed);
  for (std::size_t i = 0; i + 3 <= n_codepoints; ++i) {
    const std::string_view gram = text.substr((*offsets)[i], (*offsets)[i + 3] - (*offsets)[i]);
    const std::uint64_t bucket = keyed_hash(gram, seed_bits, 0xb0c4e7u) % dim;
    const double sign = (keyed_hash(gram, seed_bits, 0x5167u) >> 63) ? -1.0 : 1.0;
    v[bucket] += sign;
  }
  double norm_sq = 0.0;
  for (const double x : v) norm_sq += x * x;
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v) x *= inv;
  }
  return v;
}

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::string tag() const = 0;
  virtual std::vector<double> embed(const LabeledExample& example) const = 0;
};

class HashingEmbedder final : public EmbeddingProvider {
 public:
  HashingEmbedder(std::size_t dim, std::int64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 2) throw ConfigError("hash embedding dimension must be at least 2");
  }

  std::size_t dim() const override { return dim_; }
  std::string tag() const override {
    return "hashing:dim=" + std::to_string(dim_) + ",seed=" + std::to_string(seed_);
  }
  std::vector<double> embed(const LabeledExample& example) const override {
    return hash_embed(example.text, dim_, seed_);
  }

 private:
  std::size_t dim_;
  std::int64_t seed_;
};

// Looks vectors up by example id.
class PrecomputedEmbedder final : public EmbeddingProvider {
 public:
  PrecomputedEmbedder(std::unordered_map<std::string, std::vector<double>> table, std::size_t dim,
                      std::string source)
      : table_(std::move(table)), dim_(dim), source_(std::move(source)) {}

  std::size_t dim() const override { return dim_; }
  std::string tag() const override { return "precomputed:" + source_; }
  std::vector<double> embed(const LabeledExample& example) const override {
    const auto it = table_.find(example.id);
    if (it == table_.end()) throw MissingEmbedding(example.id);
    return it->second;
  }

 private:
  std::unordered_map<std::string, std::vector<double>> table_;
  std::size_t dim_;
  std::string source_;
};

inline EmbeddingMatrix embed_batch(const EmbeddingProvider& provider, const Dataset& dataset) {
  EmbeddingMatrix m;
  m.dim = provider.dim();
  m.provider_tag = provider.tag();
  m.ids.reserve(dataset.size());
  m.values.reserve(dataset.size() * m.dim);
  for (const auto& example : dataset.examples) {
    std::vector<double> v;
    try {
      v = provider.embed(example);
    } catch (const std::exception& e) {
      throw BatchEmbedError(example.id, e.what());
    }
    if (v.size() != m.dim)
      throw BatchEmbedError(example.id, "provider returned dimension " + std::to_string(v.size()) +
                                            ", expected " + std::to_string(m.dim));
    for (const double x : v)
      if (!std::isfinite(x)) throw BatchEmbedError(example.id, "non-finite coordinate");
    m.ids.push_back(example.id);
    m.values.insert(m.values.end(), v.begin(), v.end());
  }
  return m;
}

namespace detail {

inline std::vector<double> parse_vector(std::string_view s, std::size_t line,
                                        const std::string& id) {
  std::vector<double> v;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    if (i >= s.size()) break;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + j, x);
    if (ec != std::errc{} || ptr != s.data() + j)
      throw ParseError(line, "bad number '" + std::string(s.substr(i, j - i)) + "'");
    if (!std::isfinite(x))
      throw NonFiniteEmbedding("line " + std::to_string(line) + ": non-finite value for id '" +
                               id + "'");
    v.push_back(x);
    i = j;
  }
  return v;
}

}  // namespace detail

// Reads `id<TAB>v1 v2 ... vd` lines.
inline std::unordered_map<std::string, std::vector<double>> read_embedding_table(
    const std::string& path, std::size_t* dim_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file '" + path + "'");
  std::unordered_map<std::string, std::vector<double>> table;
  std::size_t dim = 0;
  bool have_dim = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(line_no, "expected id<TAB>vector");
    std::string id = line.substr(0, tab);
    auto v = detail::parse_vector(std::string_view(line).substr(tab + 1), line_no, id);
    if (!have_dim) {
      dim = v.size();
      have_dim = true;
    } else if (v.size() != dim) {
      throw RaggedEmbeddings("line " + std::to_string(line_no) + ": id '" + id + "' has " +
                             std::to_string(v.size()) + " values, expected " + std::to_string(dim));
    }
    if (!table.emplace(std::move(id), std::move(v)).second)
      throw ParseError(line_no, "duplicate embedding id");
  }
  if (dim_out) *dim_out = dim;
  return table;
}

// Rows come back in the order of expected_ids.
inline EmbeddingMatrix load_precomputed(const std::string& path,
                                        const std::vector<std::string>& expected_ids) {
  std::size_t dim = 0;
  const auto table = read_embedding_table(path, &dim);
  EmbeddingMatrix m;
  m.dim = dim;
  m.provider_tag = "precomputed:" + path;
  m.ids = expected_ids;
  m.values.reserve(expected_ids.size() * dim);
  for (const auto& id : expected_ids) {
    const auto it = table.find(id);
    if (it == table.end()) throw MissingEmbedding(id);
    m.values.insert(m.values.end(), it->second.begin(), it->second.end());
  }
  return m;
}

inline std::string format_double(double x) {
  char buffer[32];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), x);
  return std::string(buffer, ptr);
}

// Shortest round-trip decimal form, so save/load is exact.
inline void save_precomputed(const std::string& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embedding file '" + path + "'");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out << m.ids[i] << '\t';
    const auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(r[j]);
    }
    out << '\n';
  }
}

}  // namespace harmclf
