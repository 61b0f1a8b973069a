// Copyright 2026 The corptype Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Skipgram embeddings with negative sampling, and the embedding table used
// for entity vectors and for word/type ("unit") vectors.
//
// Text format: a header line "vocab_size dim", then one line per token with
// the token followed by dim space-separated decimals.

#ifndef CORPTYPE_EMBEDDINGS_HPP
#define CORPTYPE_EMBEDDINGS_HPP

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corptype/common.hpp"
#include "corptype/corpus.hpp"

namespace corptype {

class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  EmbeddingTable(std::size_t dim, std::vector<std::string> vocab, std::vector<float> vectors,
                 std::vector<std::uint64_t> counts)
      : dim_(dim),
        vocab_(std::move(vocab)),
        vectors_(std::move(vectors)),
        counts_(std::move(counts)),
        zeros_(dim, 0.0f) {
    if (dim_ == 0) throw ValidationError("embedding dimension must be positive");
    if (vectors_.size() != vocab_.size() * dim_) {
      throw ValidationError("embedding matrix does not match vocab_size x dim");
    }
    if (counts_.empty()) counts_.assign(vocab_.size(), 0);
    if (counts_.size() != vocab_.size()) throw ValidationError("counts do not match vocabulary");
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      if (vocab_[i].empty()) throw ValidationError("empty token in vocabulary");
      if (!index_.emplace(vocab_[i], i).second) {
        throw ValidationError("duplicate token in vocabulary: " + vocab_[i]);
      }
    }
    for (float v : vectors_) {
      if (!std::isfinite(v)) throw ValidationError("non-finite embedding component");
    }
  }

  EmbeddingTable(const EmbeddingTable& other)
      : dim_(other.dim_),
        vocab_(other.vocab_),
        index_(other.index_),
        vectors_(other.vectors_),
        counts_(other.counts_),
        zeros_(other.zeros_),
        oov_(other.oov_.load()) {}
  EmbeddingTable& operator=(EmbeddingTable other) {
    swap(other);
    return *this;
  }
  EmbeddingTable(EmbeddingTable&& other) noexcept { swap(other); }

  void swap(EmbeddingTable& other) noexcept {
    std::swap(dim_, other.dim_);
    vocab_.swap(other.vocab_);
    index_.swap(other.index_);
    vectors_.swap(other.vectors_);
    counts_.swap(other.counts_);
    zeros_.swap(other.zeros_);
    const auto a = oov_.load();
    oov_.store(other.oov_.load());
    other.oov_.store(a);
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vocab_.size(); }
  const std::vector<std::string>& vocab() const { return vocab_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  const std::vector<float>& data() const { return vectors_; }

  std::optional<std::size_t> find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::span<const float> row(std::size_t i) const {
    return {vectors_.data() + i * dim_, dim_};
  }

  // Zero vector for <PAD> and for unknown tokens; unknown lookups are counted.
  std::span<const float> lookup(std::string_view token) const {
    if (token == kPad) return zeros_;
    if (auto i = find(token)) return row(*i);
    oov_.fetch_add(1, std::memory_order_relaxed);
    return zeros_;
  }

  std::uint64_t oov_lookups() const { return oov_.load(std::memory_order_relaxed); }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> vectors_;
  std::vector<std::uint64_t> counts_;
  std::vector<float> zeros_;
  mutable std::atomic<std::uint64_t> oov_{0};
};

inline double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

// ---------------------------------------------------------------------------
// Vocabulary and noise distribution

struct Vocabulary {
  std::vector<std::string> tokens;  // by descending count, then token
  std::vector<std::uint64_t> counts;
  std::unordered_map<std::string, std::size_t> index;
};

inline Vocabulary build_vocabulary(const TokenStream& stream, std::uint64_t min_count) {
  std::unordered_map<std::string, std::uint64_t> raw;
  for (const auto& sentence : stream) {
    for (const auto& t : sentence) ++raw[t];
  }
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [token, count] : raw) {
    if (count >= min_count) kept.emplace_back(token, count);
  }
  if (kept.empty()) throw ValidationError("empty vocabulary after min_count filtering");
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  for (auto& [token, count] : kept) {
    v.index.emplace(token, v.tokens.size());
    v.tokens.push_back(token);
    v.counts.push_back(count);
  }
  return v;
}

// Unigram counts raised to 0.75, normalized.
inline std::vector<double> noise_distribution(const std::vector<std::uint64_t>& counts) {
  std::vector<double> p(counts.size());
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    p[i] = std::pow(static_cast<double>(counts[i]), 0.75);
    total += p[i];
  }
  for (auto& x : p) x /= total;
  return p;
}

// ---------------------------------------------------------------------------
// Training

struct SkipgramConfig {
  std::size_t dim = 100;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  std::uint64_t min_count = 5;
  std::uint64_t seed = 1;
  float learning_rate = 0.025f;
  // word2vec-style frequent-token subsampling threshold; 0 disables.
  double subsample = 0.0;
  // More than one worker trains asynchronously and is not reproducible.
  int workers = 1;
  bool deterministic = true;
};

namespace detail {

class NoiseSampler {
 public:
  explicit NoiseSampler(const std::vector<double>& p) : cumulative_(p.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i];
      cumulative_[i] = acc;
    }
    cumulative_.back() = 1.0;
  }
  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<std::size_t>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

template <bool kShared>
inline float load(const float& x) {
  if constexpr (kShared) {
    return std::atomic_ref<float>(const_cast<float&>(x)).load(std::memory_order_relaxed);
  } else {
    return x;
  }
}

template <bool kShared>
inline void add(float& x, float delta) {
  if constexpr (kShared) {
    std::atomic_ref<float> ref(x);
    ref.store(ref.load(std::memory_order_relaxed) + delta, std::memory_order_relaxed);
  } else {
    x += delta;
  }
}

inline float logistic(float z) {
  if (z >= 0) return 1.0f / (1.0f + std::exp(-z));
  const float e = std::exp(z);
  return e / (1.0f + e);
}

struct SkipgramState {
  std::size_t dim;
  std::vector<float> input;   // token vectors, the result
  std::vector<float> output;  // negative-sampling output vectors
};

// One (context -> center) update with negative samples.
template <bool kShared>
inline void train_pair(SkipgramState& st, std::size_t context, std::size_t center,
                       std::size_t negatives, float alpha, const NoiseSampler& noise, Rng& rng,
                       std::vector<float>& grad) {
  const std::size_t d = st.dim;
  float* in = st.input.data() + context * d;
  std::fill(grad.begin(), grad.end(), 0.0f);
  for (std::size_t n = 0; n <= negatives; ++n) {
    std::size_t target;
    float label;
    if (n == 0) {
      target = center;
      label = 1.0f;
    } else {
      target = noise.draw(rng);
      if (target == center) continue;
      label = 0.0f;
    }
    float* out = st.output.data() + target * d;
    float dot = 0.0f;
    for (std::size_t i = 0; i < d; ++i) dot += load<kShared>(in[i]) * load<kShared>(out[i]);
    const float g = (label - logistic(dot)) * alpha;
    for (std::size_t i = 0; i < d; ++i) grad[i] += g * load<kShared>(out[i]);
    for (std::size_t i = 0; i < d; ++i) add<kShared>(out[i], g * load<kShared>(in[i]));
  }
  for (std::size_t i = 0; i < d; ++i) add<kShared>(in[i], grad[i]);
}

template <bool kShared>
inline void train_shard(SkipgramState& st, const std::vector<std::vector<std::size_t>>& sentences,
                        std::size_t begin, std::size_t end, const SkipgramConfig& cfg,
                        const NoiseSampler& noise, const std::vector<double>& keep_prob,
                        std::atomic<std::uint64_t>& processed, std::uint64_t total, Rng rng) {
  std::vector<float> grad(st.dim);
  std::vector<std::size_t> kept;
  const float floor_alpha = cfg.learning_rate * 1e-4f;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t s = begin; s < end; ++s) {
      const auto& sentence = sentences[s];
      kept.clear();
      for (std::size_t w : sentence) {
        if (keep_prob.empty() || rng.uniform() < keep_prob[w]) kept.push_back(w);
      }
      const std::uint64_t done = processed.fetch_add(sentence.size(), std::memory_order_relaxed);
      const float progress = static_cast<float>(static_cast<double>(done) / (total + 1.0));
      const float alpha = std::max(floor_alpha, cfg.learning_rate * (1.0f - progress));
      for (std::size_t pos = 0; pos < kept.size(); ++pos) {
        const std::size_t shrink = rng.below(cfg.window);
        const std::size_t reach = cfg.window - shrink;
        const std::size_t lo = pos >= reach ? pos - reach : 0;
        const std::size_t hi = std::min(kept.size() - 1, pos + reach);
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          train_pair<kShared>(st, kept[c], kept[pos], cfg.negatives, alpha, noise, rng, grad);
        }
      }
    }
  }
}

}  // namespace detail

inline EmbeddingTable train_skipgram(const TokenStream& tokens, const SkipgramConfig& cfg) {
  if (cfg.dim < 1) throw ValidationError("skipgram dim must be >= 1");
  if (cfg.window < 1) throw ValidationError("skipgram window must be >= 1");
  if (cfg.epochs < 1) throw ValidationError("skipgram epochs must be >= 1");
  const Vocabulary vocab = build_vocabulary(tokens, std::max<std::uint64_t>(1, cfg.min_count));
  const std::size_t v = vocab.tokens.size();

  std::vector<std::vector<std::size_t>> sentences;
  std::uint64_t words = 0;
  for (const auto& sentence : tokens) {
    std::vector<std::size_t> ids;
    for (const auto& t : sentence) {
      auto it = vocab.index.find(t);
      if (it != vocab.index.end()) ids.push_back(it->second);
    }
    if (ids.size() < 2) continue;
    words += ids.size();
    sentences.push_back(std::move(ids));
  }

  std::vector<double> keep_prob;
  if (cfg.subsample > 0.0) {
    std::uint64_t total = 0;
    for (auto c : vocab.counts) total += c;
    keep_prob.resize(v);
    const double threshold = cfg.subsample * static_cast<double>(total);
    for (std::size_t i = 0; i < v; ++i) {
      const double f = static_cast<double>(vocab.counts[i]);
      keep_prob[i] = std::min(1.0, (std::sqrt(f / threshold) + 1.0) * threshold / f);
    }
  }

  Rng rng(cfg.seed);
  detail::SkipgramState st{cfg.dim, std::vector<float>(v * cfg.dim), std::vector<float>(v * cfg.dim, 0.0f)};
  const float scale = 1.0f / static_cast<float>(cfg.dim);
  for (auto& x : st.input) x = (static_cast<float>(rng.uniform()) - 0.5f) * scale;

  const detail::NoiseSampler noise(noise_distribution(vocab.counts));
  std::atomic<std::uint64_t> processed{0};
  const std::uint64_t total = words * cfg.epochs;

  const bool shared = !cfg.deterministic && cfg.workers > 1;
  if (!shared) {
    detail::train_shard<false>(st, sentences, 0, sentences.size(), cfg, noise, keep_prob,
                               processed, total, rng.fork(0));
  } else {
    std::vector<Rng> streams;
    for (int w = 0; w < cfg.workers; ++w) streams.push_back(rng.fork(static_cast<std::uint64_t>(w)));
    parallel_for(sentences.size(), cfg.workers, [&](std::size_t b, std::size_t e, int w) {
      detail::train_shard<true>(st, sentences, b, e, cfg, noise, keep_prob, processed, total,
                                streams[static_cast<std::size_t>(w)]);
    });
  }

  for (float x : st.input) {
    if (!std::isfinite(x)) throw RuntimeError("skipgram training diverged (non-finite vector)");
  }
  return EmbeddingTable(cfg.dim, vocab.tokens, std::move(st.input), vocab.counts);
}

// ---------------------------------------------------------------------------
// Text format

inline std::string format_table(const EmbeddingTable& table) {
  std::string out = std::to_string(table.size()) + " " + std::to_string(table.dim()) + "\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += table.vocab()[i];
    for (float x : table.row(i)) {
      out += ' ';
      out += format_real(x);
    }
    out += '\n';
  }
  return out;
}

inline void save_table(const EmbeddingTable& table, const std::filesystem::path& path) {
  write_file_atomic(path, format_table(table));
}

// Counts are not part of the format; loaded tables report zero counts.
inline EmbeddingTable parse_table(std::string_view text, const std::string& origin = "table") {
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ValidationError(origin + ": empty embedding file");
  const auto header = detail::whitespace_tokens(lines[0]);
  long long size = 0, dim = 0;
  if (header.size() != 2 || !parse_int(header[0], size) || !parse_int(header[1], dim) ||
      size < 0 || dim <= 0) {
    throw ValidationError(origin + ": header must be \"vocab_size dim\"");
  }
  if (lines.size() - 1 != static_cast<std::size_t>(size)) {
    throw ValidationError(origin + ": header declares " + std::to_string(size) + " rows, found " +
                          std::to_string(lines.size() - 1));
  }
  std::vector<std::string> vocab;
  std::vector<float> vectors;
  vectors.reserve(static_cast<std::size_t>(size * dim));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = detail::whitespace_tokens(lines[r]);
    if (fields.size() != static_cast<std::size_t>(dim) + 1) {
      throw ValidationError(origin + ":" + std::to_string(r + 1) + ": expected token and " +
                            std::to_string(dim) + " values");
    }
    vocab.push_back(fields[0]);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      float x;
      if (!parse_real(fields[i], x) || !std::isfinite(x)) {
        throw ValidationError(origin + ":" + std::to_string(r + 1) + ": bad value " + fields[i]);
      }
      vectors.push_back(x);
    }
  }
  return EmbeddingTable(static_cast<std::size_t>(dim), std::move(vocab), std::move(vectors), {});
}

inline EmbeddingTable load_table(const std::filesystem::path& path) {
  return parse_table(read_file(path), path.string());
}

}  // namespace corptype

#endif  // CORPTYPE_EMBEDDINGS_HPP
