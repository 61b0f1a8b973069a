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

// Shared test fixtures that need the library (oracles.hpp stays free of
// pipeline code).

#ifndef CORPTYPE_TESTS_FIXTURES_HPP
#define CORPTYPE_TESTS_FIXTURES_HPP

#include <cmath>
#include <string>
#include <vector>

#include "corptype/embeddings.hpp"
#include "corptype/neural.hpp"

namespace fixtures {

// Sentences drawn from one of two disjoint vocabularies "ta0..", "tb0..".
inline corptype::TokenStream two_topic_stream(std::size_t sentences, std::size_t words_per_topic,
                                              std::size_t length, std::uint64_t seed) {
  corptype::Rng rng(seed);
  corptype::TokenStream out;
  for (std::size_t s = 0; s < sentences; ++s) {
    const char topic = rng.below(2) ? 'a' : 'b';
    std::vector<std::string> line;
    for (std::size_t i = 0; i < length; ++i) {
      line.push_back(std::string("t") + topic + std::to_string(rng.below(words_per_topic)));
    }
    out.push_back(std::move(line));
  }
  return out;
}

struct TopicCosines {
  double intra = 0.0;
  double inter = 0.0;
};

// Brute force over every pair of distinct vocabulary rows.
inline TopicCosines topic_cosines(const corptype::EmbeddingTable& table) {
  double intra = 0, inter = 0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (std::size_t j = i + 1; j < table.size(); ++j) {
      const auto& a = table.row(i);
      const auto& b = table.row(j);
      double dot = 0, na = 0, nb = 0;
      for (std::size_t d = 0; d < table.dim(); ++d) {
        dot += static_cast<double>(a[d]) * b[d];
        na += static_cast<double>(a[d]) * a[d];
        nb += static_cast<double>(b[d]) * b[d];
      }
      const double c = dot / std::sqrt(na * nb);
      if (table.vocab()[i][1] == table.vocab()[j][1]) {
        intra += c;
        ++n_intra;
      } else {
        inter += c;
        ++n_inter;
      }
    }
  }
  return {intra / static_cast<double>(n_intra), inter / static_cast<double>(n_inter)};
}

// Random examples with features in [-1, 1] and 0/1 labels.
inline std::vector<corptype::LabeledExample> random_examples(std::size_t inputs, std::size_t types,
                                                             std::size_t count, corptype::Rng& rng) {
  std::vector<corptype::LabeledExample> out(count);
  for (auto& ex : out) {
    ex.features.resize(static_cast<Eigen::Index>(inputs));
    ex.labels.resize(static_cast<Eigen::Index>(types));
    for (Eigen::Index i = 0; i < ex.features.size(); ++i) ex.features[i] = 2.0 * rng.uniform() - 1.0;
    for (Eigen::Index t = 0; t < ex.labels.size(); ++t) ex.labels[t] = static_cast<double>(rng.below(2));
  }
  return out;
}

// Every parameter uniform in [-scale, scale], biases included.
inline corptype::Mlp random_mlp(corptype::MlpShape shape, corptype::Rng& rng, double scale = 1.0) {
  corptype::Mlp m(shape);
  for (Eigen::Index i = 0; i < m.params().size(); ++i) m.params()[i] = scale * (2.0 * rng.uniform() - 1.0);
  return m;
}

}  // namespace fixtures

#endif  // CORPTYPE_TESTS_FIXTURES_HPP
