#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "harmclf/boosted.hpp"
#include "harmclf/corpus.hpp"
#include "harmclf/error.hpp"
#include "harmclf/metrics.hpp"
#include "harmclf/random.hpp"
#include "harmclf/text.hpp"

namespace harmclf {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr double kProbabilityClamp = 1e-7;

// ---------------------------------------------------------------------------
// Tokenization

class Vocabulary {
 public:
  static constexpr std::string_view kPadToken = "[PAD]";
  static constexpr std::string_view kUnkToken = "[UNK]";

  Vocabulary() : tokens_{std::string(kPadToken), std::string(kUnkToken)} {}

  // Ids are assigned from 2 upward in the given order; repeats are skipped.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    for (const auto& t : tokens) v.add(t);
    return v;
  }

  // Tokens seen at least min_count times, most frequent first (ties in
  // byte order), capped so that size() <= max_size when max_size > 0.
  static Vocabulary build(const Dataset& dataset, std::size_t max_size, std::size_t min_count = 1) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& e : dataset.examples)
      for (const auto token : text::split_whitespace(e.text)) ++counts[std::string(token)];
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocabulary v;
    for (const auto& [token, count] : ranked) {
      if (count < min_count) break;
      if (max_size > 0 && v.size() >= max_size) break;
      v.add(token);
    }
    return v;
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open vocabulary '" + path + "'");
    Vocabulary v;
    v.tokens_.clear();
    v.index_.clear();
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!v.index_.emplace(line, static_cast<int>(v.tokens_.size())).second)
        throw CheckpointError("duplicate vocabulary token '" + line + "' in '" + path + "'");
      v.tokens_.push_back(line);
    }
    if (v.tokens_.size() < 2 || v.tokens_[0] != kPadToken || v.tokens_[1] != kUnkToken)
      throw CheckpointError("vocabulary '" + path + "' must start with [PAD] and [UNK]");
    return v;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write vocabulary '" + path + "'");
    for (const auto& t : tokens_) out << t << '\n';
  }

  int id(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnkId : it->second;
  }

  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const noexcept { return tokens_.size(); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  void add(const std::string& token) {
    if (token.empty() || index_.contains(token) || token == kPadToken || token == kUnkToken) return;
    index_.emplace(token, static_cast<int>(tokens_.size()));
    tokens_.push_back(token);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_{{std::string(kPadToken), kPadId},
                                              {std::string(kUnkToken), kUnkId}};
};

struct TokenSequence {
  std::vector<int> token_ids;  // always max_len long, PAD-filled

  std::size_t content_length() const {
    return static_cast<std::size_t>(
        std::count_if(token_ids.begin(), token_ids.end(), [](int id) { return id != kPadId; }));
  }
};

inline TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  TokenSequence seq;
  seq.token_ids.assign(max_len, kPadId);
  std::size_t k = 0;
  for (const auto token : text::split_whitespace(text)) {
    if (k == max_len) break;
    seq.token_ids[k++] = vocab.id(token);
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Loss

struct ProbabilityPair {
  double s1 = 0.5;  // positive class
  double s2 = 0.5;  // 1 - s1
};

struct TargetPair {
  int t1 = 0;
  int t2 = 1;

  static TargetPair from_label(int label) { return {label, 1 - label}; }
};

inline double clamp_probability(double s) {
  return std::clamp(s, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

// Two-class cross-entropy of the clamped positive score, scaled by the
// weight of the true class.
inline double weighted_bce(double s1, int t1, const ClassWeights& weights) {
  const double s = clamp_probability(s1);
  return t1 == 1 ? weights.w_positive * -std::log(s) : weights.w_negative * -std::log(1.0 - s);
}

inline double weighted_bce_mean(std::span<const double> s1, std::span<const int> t1,
                                const ClassWeights& weights) {
  if (s1.size() != t1.size()) throw ShapeError("scores and targets differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < s1.size(); ++i) total += weighted_bce(s1[i], t1[i], weights);
  return s1.empty() ? 0.0 : total / static_cast<double>(s1.size());
}

// ---------------------------------------------------------------------------
// Model

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
  bool decay = true;  // biases are excluded from weight decay

  Tensor() = default;
  Tensor(std::string n, std::vector<std::size_t> s, bool d = true)
      : name(std::move(n)), shape(std::move(s)), decay(d) {
    std::size_t count = 1;
    for (const auto dim : shape) count *= dim;
    data.assign(count, 0.0);
  }

  std::size_t size() const noexcept { return data.size(); }
  Tensor zeros_like() const { return Tensor(name, shape, decay); }
};

// Token embedding table, mean pooling over non-PAD positions, then one
// dense tanh layer.
struct Encoder {
  Vocabulary vocab;
  Tensor embedding;     // [vocab, embed_dim]
  Tensor dense_weight;  // [hidden, embed_dim]
  Tensor dense_bias;    // [hidden]

  std::size_t embed_dim() const { return embedding.shape.at(1); }
  std::size_t hidden_dim() const { return dense_weight.shape.at(0); }
};

struct Head {
  Tensor weight;  // [hidden]
  Tensor bias;    // [1]
};

struct NeuralClassifier {
  Encoder encoder;
  Head head;
  std::size_t max_len = 64;

  std::vector<Tensor*> parameters() {
    return {&encoder.embedding, &encoder.dense_weight, &encoder.dense_bias, &head.weight, &head.bias};
  }
  std::vector<const Tensor*> parameters() const {
    return {&encoder.embedding, &encoder.dense_weight, &encoder.dense_bias, &head.weight, &head.bias};
  }
};

inline Head make_head(std::size_t hidden_dim, Rng& rng) {
  Head head{Tensor("head.weight", {hidden_dim}), Tensor("head.bias", {1}, false)};
  const double bound = std::sqrt(6.0 / static_cast<double>(hidden_dim + 1));
  for (double& w : head.weight.data) w = rng.uniform(-bound, bound);
  return head;
}

inline Encoder make_encoder(Vocabulary vocab, std::size_t embed_dim, std::size_t hidden_dim, Rng& rng) {
  Encoder enc;
  enc.embedding = Tensor("encoder.embedding", {vocab.size(), embed_dim});
  enc.dense_weight = Tensor("encoder.dense.weight", {hidden_dim, embed_dim});
  enc.dense_bias = Tensor("encoder.dense.bias", {hidden_dim}, false);
  enc.vocab = std::move(vocab);
  for (std::size_t r = 1; r < enc.vocab.size(); ++r)
    for (std::size_t c = 0; c < embed_dim; ++c) enc.embedding.data[r * embed_dim + c] = 0.1 * rng.normal();
  const double bound = std::sqrt(6.0 / static_cast<double>(embed_dim + hidden_dim));
  for (double& w : enc.dense_weight.data) w = rng.uniform(-bound, bound);
  return enc;
}

inline NeuralClassifier make_classifier(Vocabulary vocab, std::size_t embed_dim, std::size_t hidden_dim,
                                        std::size_t max_len, std::int64_t seed) {
  if (embed_dim == 0 || hidden_dim == 0 || max_len == 0)
    throw ConfigError("neural dimensions and max_len must be positive");
  Rng rng(static_cast<std::uint64_t>(seed));
  NeuralClassifier model;
  model.encoder = make_encoder(std::move(vocab), embed_dim, hidden_dim, rng);
  model.head = make_head(hidden_dim, rng);
  model.max_len = max_len;
  return model;
}

inline NeuralClassifier attach_head(Encoder encoder, std::size_t max_len, std::int64_t seed) {
  Rng rng(static_cast<std::uint64_t>(seed));
  NeuralClassifier model;
  model.head = make_head(encoder.hidden_dim(), rng);
  model.encoder = std::move(encoder);
  model.max_len = max_len;
  return model;
}

namespace detail {

struct ForwardCache {
  std::vector<double> pooled;  // [embed_dim]
  std::vector<double> hidden;  // [hidden], after tanh
  double logit = 0.0;
  double s1 = 0.5;
  std::size_t count = 0;
};

inline void check_dimensions(const NeuralClassifier& m) {
  const auto& e = m.encoder;
  if (e.embedding.shape.size() != 2 || e.embedding.shape[0] != e.vocab.size() ||
      e.dense_weight.shape.size() != 2 || e.dense_weight.shape[1] != e.embedding.shape[1] ||
      e.dense_bias.size() != e.dense_weight.shape[0] || m.head.weight.size() != e.dense_weight.shape[0] ||
      m.head.bias.size() != 1)
    throw ShapeError("encoder and head dimensions disagree");
}

inline ForwardCache forward_one(const NeuralClassifier& m, const TokenSequence& seq) {
  const std::size_t E = m.encoder.embed_dim();
  const std::size_t H = m.encoder.hidden_dim();
  ForwardCache c;
  c.pooled.assign(E, 0.0);
  for (const int id : seq.token_ids) {
    if (id == kPadId) continue;
    if (id < 0 || static_cast<std::size_t>(id) >= m.encoder.vocab.size())
      throw ShapeError("token id " + std::to_string(id) + " outside the vocabulary");
    const double* row = m.encoder.embedding.data.data() + static_cast<std::size_t>(id) * E;
    for (std::size_t e = 0; e < E; ++e) c.pooled[e] += row[e];
    ++c.count;
  }
  if (c.count == 0) throw EmptySequence("sequence contains only padding");
  const double inv = 1.0 / static_cast<double>(c.count);
  for (double& x : c.pooled) x *= inv;

  c.hidden.assign(H, 0.0);
  double z = m.head.bias.data[0];
  for (std::size_t h = 0; h < H; ++h) {
    const double* w = m.encoder.dense_weight.data.data() + h * E;
    double pre = m.encoder.dense_bias.data[h];
    for (std::size_t e = 0; e < E; ++e) pre += w[e] * c.pooled[e];
    c.hidden[h] = std::tanh(pre);
    z += m.head.weight.data[h] * c.hidden[h];
  }
  c.logit = z;
  c.s1 = sigmoid(z);
  return c;
}

}  // namespace detail

inline std::vector<ProbabilityPair> forward(const NeuralClassifier& model,
                                            std::span<const TokenSequence> batch) {
  detail::check_dimensions(model);
  std::vector<ProbabilityPair> out;
  out.reserve(batch.size());
  for (const auto& seq : batch) {
    const double s1 = detail::forward_one(model, seq).s1;
    out.push_back({s1, 1.0 - s1});
  }
  return out;
}

inline std::vector<TokenSequence> tokenize_dataset(const Dataset& dataset, const NeuralClassifier& model) {
  std::vector<TokenSequence> out;
  out.reserve(dataset.size());
  for (const auto& e : dataset.examples) out.push_back(tokenize(e.text, model.encoder.vocab, model.max_len));
  return out;
}

inline std::vector<double> predict_scores(const NeuralClassifier& model, const Dataset& dataset) {
  const auto seqs = tokenize_dataset(dataset, model);
  std::vector<double> out;
  out.reserve(seqs.size());
  for (const auto& p : forward(model, seqs)) out.push_back(p.s1);
  return out;
}

struct LossAndGradients {
  double loss = 0.0;
  std::vector<Tensor> grads;  // same order as NeuralClassifier::parameters()
};

// Mean weighted BCE over the batch and its exact gradient. Where the
// clamp is active the loss is flat, so those examples contribute no
// gradient.
inline LossAndGradients loss_and_gradients(const NeuralClassifier& model,
                                           std::span<const TokenSequence> batch,
                                           std::span<const int> targets, const ClassWeights& weights) {
  detail::check_dimensions(model);
  if (batch.size() != targets.size()) throw ShapeError("batch and targets differ in length");
  if (batch.empty()) throw EmptyDataset("empty batch");
  const std::size_t E = model.encoder.embed_dim();
  const std::size_t H = model.encoder.hidden_dim();

  LossAndGradients out;
  for (const Tensor* p : model.parameters()) out.grads.push_back(p->zeros_like());
  auto& g_emb = out.grads[0].data;
  auto& g_w = out.grads[1].data;
  auto& g_bd = out.grads[2].data;
  auto& g_head = out.grads[3].data;
  auto& g_b = out.grads[4].data;

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  std::vector<double> d_pre(H), d_pooled(E);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto cache = detail::forward_one(model, batch[i]);
    const int t = targets[i];
    out.loss += weighted_bce(cache.s1, t, weights) * inv_batch;
    if (clamp_probability(cache.s1) != cache.s1) continue;
    const double coef = weights(t) * (cache.s1 - static_cast<double>(t)) * inv_batch;

    g_b[0] += coef;
    for (std::size_t h = 0; h < H; ++h) {
      g_head[h] += coef * cache.hidden[h];
      const double a = cache.hidden[h];
      d_pre[h] = coef * model.head.weight.data[h] * (1.0 - a * a);
      g_bd[h] += d_pre[h];
    }
    std::fill(d_pooled.begin(), d_pooled.end(), 0.0);
    for (std::size_t h = 0; h < H; ++h) {
      const double* w = model.encoder.dense_weight.data.data() + h * E;
      double* gw = g_w.data() + h * E;
      for (std::size_t e = 0; e < E; ++e) {
        gw[e] += d_pre[h] * cache.pooled[e];
        d_pooled[e] += w[e] * d_pre[h];
      }
    }
    const double inv_count = 1.0 / static_cast<double>(cache.count);
    for (const int id : batch[i].token_ids) {
      if (id == kPadId) continue;
      double* ge = g_emb.data() + static_cast<std::size_t>(id) * E;
      for (std::size_t e = 0; e < E; ++e) ge[e] += d_pooled[e] * inv_count;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer and training

enum class Selection { best_validation, last_epoch };

inline std::string_view to_string(Selection s) {
  return s == Selection::best_validation ? "best_validation" : "last_epoch";
}

inline Selection parse_selection(std::string_view s) {
  if (s == "best_validation") return Selection::best_validation;
  if (s == "last_epoch") return Selection::last_epoch;
  throw ConfigError("unknown selection '" + std::string(s) + "' (expected best_validation|last_epoch)");
}

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 2e-5;
  std::size_t batch_size = 16;
  Selection selection = Selection::last_epoch;
  ClassWeights class_weights;
  std::int64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
  double threshold = 0.5;  // for validation F1

  void validate() const {
    if (epochs < 1) throw ConfigError("neural.epochs must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("neural.learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("neural.batch_size must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("optimizer betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("neural.epsilon must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("neural.weight_decay must be non-negative");
    if (!(class_weights.w_positive > 0.0 && class_weights.w_negative > 0.0))
      throw ConfigError("class weights must be positive");
  }
};

struct OptimizerState {
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// Bias-corrected adaptive moments with decoupled weight decay:
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
// Decay is skipped for tensors with decay == false. A non-finite gradient
// aborts the step before anything is modified.
inline void optimizer_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
                           OptimizerState& state, const TrainConfig& config) {
  if (params.size() != grads.size()) throw ShapeError("parameter and gradient counts differ");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("optimizer state does not match parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->size() != grads[k].size() || state.m[k].size() != grads[k].size())
      throw ShapeError("shape mismatch for parameter '" + params[k]->name + "'");
    for (const double g : grads[k].data)
      if (!std::isfinite(g)) throw NonFiniteGradient(params[k]->name);
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k]->data;
    const auto& g = grads[k].data;
    auto& m = state.m[k];
    auto& v = state.v[k];
    const double wd = params[k]->decay ? config.weight_decay : 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= config.learning_rate * (m_hat / (std::sqrt(v_hat) + config.epsilon) + wd * p[i]);
    }
  }
}

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_f1;
};

struct TrainResult {
  NeuralClassifier model;
  std::vector<EpochRecord> history;
  int selected_epoch = 0;
};

struct TrainHooks {
  // Replaces positive-class validation F1 as the selection score.
  std::function<double(const NeuralClassifier&, const Dataset&)> validation_score;
  std::function<void(int epoch, const NeuralClassifier&)> on_epoch_end;
};

inline double validation_f1(const NeuralClassifier& model, const Dataset& val, double threshold) {
  const auto scores = predict_scores(model, val);
  const auto labels = val.labels();
  return f1(confusion(scores, labels, threshold));
}

// Mini-batch training on the weighted loss. Batches follow a seeded
// permutation redrawn every epoch. With best_validation the snapshot of
// the epoch with the highest validation score is returned (earliest epoch
// on ties); with last_epoch the final parameters are.
inline TrainResult train_classifier(NeuralClassifier model, const Dataset& train, const Dataset* val,
                                    const TrainConfig& config, const TrainHooks& hooks = {}) {
  config.validate();
  if (train.empty()) throw EmptyDataset("training set '" + train.name + "' is empty");
  if (config.selection == Selection::best_validation && (val == nullptr || val->empty()))
    throw ConfigError("best_validation selection needs a non-empty validation set");

  const auto sequences = tokenize_dataset(train, model);
  const auto labels = train.labels();
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  Rng rng(static_cast<std::uint64_t>(config.seed) ^ 0x7f4a7c15ULL);
  OptimizerState state;
  TrainResult result;
  std::optional<NeuralClassifier> best;
  double best_score = -1.0;

  std::vector<TokenSequence> batch;
  std::vector<int> batch_targets;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      batch_targets.clear();
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(sequences[order[k]]);
        batch_targets.push_back(labels[order[k]]);
      }
      auto lg = loss_and_gradients(model, batch, batch_targets, config.class_weights);
      loss_sum += lg.loss * static_cast<double>(end - start);
      const auto params = model.parameters();
      optimizer_step(params, lg.grads, state, config);
    }

    EpochRecord record{epoch, loss_sum / static_cast<double>(train.size()), std::nullopt};
    if (val != nullptr && !val->empty()) {
      record.val_f1 = hooks.validation_score ? hooks.validation_score(model, *val)
                                             : validation_f1(model, *val, config.threshold);
      if (config.selection == Selection::best_validation && *record.val_f1 > best_score) {
        best_score = *record.val_f1;
        best = model;
        result.selected_epoch = epoch;
      }
    }
    result.history.push_back(record);
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, model);
  }

  if (config.selection == Selection::best_validation && best) {
    result.model = std::move(*best);
  } else {
    result.model = std::move(model);
    result.selected_epoch = config.epochs;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// A checkpoint is a directory holding manifest.json, vocab.txt and one raw
// little-endian float64 blob per tensor.

inline constexpr int kCheckpointVersion = 1;
inline constexpr std::string_view kCheckpointFormat = "harmclf-checkpoint";

namespace detail {

inline void write_blob(const std::filesystem::path& path, const std::vector<double>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write '" + path.string() + "'");
  for (const double x : data) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    out.write(bytes, 8);
  }
}

inline std::vector<double> read_blob(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open tensor blob '" + path.string() + "'");
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != count * 8)
    throw CheckpointError("tensor blob '" + path.string() + "' has " + std::to_string(bytes) +
                          " bytes, expected " + std::to_string(count * 8));
  in.seekg(0);
  std::vector<double> data(count);
  for (auto& x : data) {
    char raw[8];
    in.read(raw, 8);
    std::uint64_t bits;
    std::memcpy(&bits, raw, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    x = std::bit_cast<double>(bits);
  }
  return data;
}

inline std::filesystem::path checkpoint_dir(const std::filesystem::path& path) {
  return path.filename() == "manifest.json" ? path.parent_path() : path;
}

struct LoadedTensors {
  Vocabulary vocab;
  std::size_t max_len = 0;
  std::map<std::string, Tensor> tensors;
};

inline LoadedTensors read_checkpoint(const std::filesystem::path& path) {
  const auto dir = checkpoint_dir(path);
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path))
    throw CheckpointError("no checkpoint manifest at '" + manifest_path.string() + "'");
  LoadedTensors out;
  try {
    std::ifstream in(manifest_path);
    const auto manifest = nlohmann::json::parse(in);
    if (manifest.value("format", "") != kCheckpointFormat)
      throw CheckpointError("'" + manifest_path.string() + "' is not a checkpoint manifest");
    if (manifest.at("version").get<int>() != kCheckpointVersion)
      throw CheckpointError("unsupported checkpoint version " + manifest.at("version").dump() + " in '" +
                            manifest_path.string() + "'");
    if (manifest.at("dtype").get<std::string>() != "float64")
      throw CheckpointError("unsupported dtype " + manifest.at("dtype").dump());
    out.max_len = manifest.at("max_len").get<std::size_t>();
    out.vocab = Vocabulary::load((dir / manifest.at("vocab").get<std::string>()).string());
    for (const auto& jt : manifest.at("tensors")) {
      Tensor t(jt.at("name").get<std::string>(), jt.at("shape").get<std::vector<std::size_t>>(),
               jt.at("decay").get<bool>());
      t.data = read_blob(dir / jt.at("file").get<std::string>(), t.size());
      out.tensors.emplace(t.name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed manifest '" + manifest_path.string() + "': " + e.what());
  }
  return out;
}

inline Tensor take(LoadedTensors& loaded, const std::string& name) {
  const auto it = loaded.tensors.find(name);
  if (it == loaded.tensors.end()) throw CheckpointError("checkpoint is missing tensor '" + name + "'");
  return std::move(it->second);
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& dir, const NeuralClassifier& model) {
  std::filesystem::create_directories(dir);
  nlohmann::json tensors = nlohmann::json::array();
  for (const Tensor* t : model.parameters()) {
    const std::string file = t->name + ".bin";
    detail::write_blob(dir / file, t->data);
    tensors.push_back({{"name", t->name}, {"shape", t->shape}, {"decay", t->decay}, {"file", file}});
  }
  model.encoder.vocab.save((dir / "vocab.txt").string());
  const nlohmann::json manifest = {{"format", kCheckpointFormat},
                                   {"version", kCheckpointVersion},
                                   {"dtype", "float64"},
                                   {"byte_order", "little"},
                                   {"max_len", model.max_len},
                                   {"vocab", "vocab.txt"},
                                   {"tensors", std::move(tensors)}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw CheckpointError("cannot write manifest in '" + dir.string() + "'");
  out << manifest.dump(2) << '\n';
}

// Encoder-only view of a checkpoint, for initializing a fresh head.
inline Encoder load_external_checkpoint(const std::filesystem::path& path) {
  auto loaded = detail::read_checkpoint(path);
  Encoder enc;
  enc.vocab = std::move(loaded.vocab);
  enc.embedding = detail::take(loaded, "encoder.embedding");
  enc.dense_weight = detail::take(loaded, "encoder.dense.weight");
  enc.dense_bias = detail::take(loaded, "encoder.dense.bias");
  if (enc.embedding.shape.size() != 2 || enc.embedding.shape[0] != enc.vocab.size() ||
      enc.dense_weight.shape.size() != 2 || enc.dense_weight.shape[1] != enc.embedding.shape[1] ||
      enc.dense_bias.size() != enc.dense_weight.shape[0])
    throw CheckpointError("checkpoint tensor shapes are inconsistent in '" + path.string() + "'");
  return enc;
}

inline NeuralClassifier load_checkpoint(const std::filesystem::path& path) {
  auto loaded = detail::read_checkpoint(path);
  NeuralClassifier model;
  model.max_len = loaded.max_len;
  model.encoder.vocab = std::move(loaded.vocab);
  model.encoder.embedding = detail::take(loaded, "encoder.embedding");
  model.encoder.dense_weight = detail::take(loaded, "encoder.dense.weight");
  model.encoder.dense_bias = detail::take(loaded, "encoder.dense.bias");
  model.head.weight = detail::take(loaded, "head.weight");
  model.head.bias = detail::take(loaded, "head.bias");
  try {
    detail::check_dimensions(model);
  } catch (const ShapeError& e) {
    throw CheckpointError("checkpoint '" + path.string() + "': " + e.what());
  }
  return model;
}

}  // namespace harmclf
