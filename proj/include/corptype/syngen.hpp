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

// Synthetic annotated corpora with known ground truth.
//
// Every type owns a vocabulary. A mention sentence is "informative" with
// probability context_informativeness: its words come from the vocabulary of
// one of the entity's types. Otherwise all words come from a shared
// background vocabulary. With positional_signal set, an informative sentence
// is background words except for two cue words right next to the mention;
// types are paired so that both members of a pair use the same two cues in
// opposite order, which only a position-aware model can separate.

#ifndef CORPTYPE_SYNGEN_HPP
#define CORPTYPE_SYNGEN_HPP

#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "corptype/common.hpp"
#include "corptype/corpus.hpp"
#include "corptype/kb.hpp"

namespace corptype {

struct SynSpec {
  std::size_t num_types = 8;
  std::size_t entities_per_type = 200;
  // Weight of having 1, 2, 3, ... types. Default mean is 1.8.
  std::vector<double> types_per_entity = {0.4, 0.4, 0.2};
  std::size_t vocab_per_type = 50;
  std::size_t background_vocab = 200;
  double context_informativeness = 0.7;
  // Mentions per entity are 1 + Poisson(mean - 1).
  double mentions_per_entity = 50.0;
  std::size_t sentence_length = 12;
  // Share of an entity's informative contexts drawn from its notable type;
  // the remainder is spread evenly over its other types.
  double notable_share = 0.5;
  bool positional_signal = false;
  bool disjoint_vocabularies = true;
  // Optional explicit per-type vocabularies (replace the generated ones).
  std::vector<std::vector<std::string>> custom_vocabularies;
  SplitRatios split;
  std::uint64_t seed = 1;

  void validate() const {
    auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(name) + " must be in [0,1]");
    };
    prob(context_informativeness, "context_informativeness");
    prob(notable_share, "notable_share");
    if (num_types == 0 || entities_per_type == 0 || vocab_per_type == 0 || background_vocab == 0 ||
        sentence_length < 2 || types_per_entity.empty()) {
      throw ValidationError("synthetic spec counts must be positive");
    }
    if (!(mentions_per_entity >= 1.0)) throw ValidationError("mentions_per_entity must be >= 1");
    if (types_per_entity.size() > num_types) {
      throw ValidationError("types_per_entity allows more types than exist");
    }
    for (double w : types_per_entity) {
      if (!(w >= 0.0)) throw ValidationError("types_per_entity weights must be non-negative");
    }
    if (positional_signal && num_types % 2 != 0) {
      throw ValidationError("positional signal pairs types; num_types must be even");
    }
    if (!custom_vocabularies.empty() && custom_vocabularies.size() != num_types) {
      throw ValidationError("custom_vocabularies must list one vocabulary per type");
    }
  }
};

// Letters-only names, so normalization never rewrites them.
inline std::string letters(std::size_t i, std::size_t width = 3) {
  std::string s(width, 'a');
  for (std::size_t p = width; p-- > 0;) {
    s[p] = static_cast<char>('a' + i % 26);
    i /= 26;
  }
  return s;
}

class SynGenerator {
 public:
  explicit SynGenerator(SynSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    for (std::size_t t = 0; t < spec_.num_types; ++t) {
      type_names_.push_back("/syn/t" + letters(t, 2));
      if (spec_.custom_vocabularies.empty()) {
        std::vector<std::string> words;
        for (std::size_t j = 0; j < spec_.vocab_per_type; ++j) {
          words.push_back("ty" + letters(t, 2) + "w" + letters(j));
        }
        vocab_.push_back(std::move(words));
      } else {
        if (spec_.custom_vocabularies[t].empty()) throw ValidationError("empty custom vocabulary");
        vocab_.push_back(spec_.custom_vocabularies[t]);
      }
    }
    if (spec_.disjoint_vocabularies) {
      std::unordered_map<std::string, std::size_t> owner;
      for (std::size_t t = 0; t < vocab_.size(); ++t) {
        for (const auto& w : vocab_[t]) {
          auto [it, fresh] = owner.emplace(w, t);
          if (!fresh && it->second != t) {
            throw ValidationError("vocabulary collision across types: " + w);
          }
        }
      }
    }
    for (std::size_t j = 0; j < spec_.background_vocab; ++j) background_.push_back("bg" + letters(j));
    for (std::size_t j = 0; j < spec_.num_types; ++j) cues_.push_back("cue" + letters(j, 2));
  }

  const SynSpec& spec() const { return spec_; }
  const std::vector<std::string>& type_names() const { return type_names_; }
  const std::vector<std::string>& vocabulary(TypeId t) const { return vocab_.at(t); }
  const std::vector<std::string>& background() const { return background_; }

  // Cue words placed left and right of the mention for type t.
  std::pair<std::string, std::string> cues(TypeId t) const {
    const std::size_t pair = t / 2;
    const auto& a = cues_[2 * pair];
    const auto& b = cues_[2 * pair + 1];
    return t % 2 == 0 ? std::make_pair(a, b) : std::make_pair(b, a);
  }

  // One mention sentence. `signal` is the type whose distribution produces
  // the words, or nullopt for a background sentence.
  Sentence sentence(const std::string& entity, const std::string& surface,
                    std::optional<TypeId> signal, Rng& rng) const {
    const std::size_t len = spec_.sentence_length;
    const std::size_t at = rng.below(len);
    Sentence s;
    s.tokens.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
      if (i == at) {
        s.tokens[i] = surface;
      } else if (signal && !spec_.positional_signal) {
        const auto& words = vocab_[*signal];
        s.tokens[i] = words[rng.below(words.size())];
      } else {
        s.tokens[i] = background_[rng.below(background_.size())];
      }
    }
    if (signal && spec_.positional_signal) {
      const auto [left, right] = cues(*signal);
      if (at > 0) s.tokens[at - 1] = left;
      if (at + 1 < len) s.tokens[at + 1] = right;
    }
    s.mentions.push_back({at, at + 1, entity});
    return s;
  }

  // Type whose words an informative context of this entity uses.
  TypeId pick_signal_type(const EntityRecord& rec, Rng& rng) const {
    if (rec.types.size() == 1 || rng.uniform() < spec_.notable_share) return rec.notable;
    std::vector<TypeId> others;
    for (TypeId t : rec.types) {
      if (t != rec.notable) others.push_back(t);
    }
    return others[rng.below(others.size())];
  }

  std::optional<TypeId> draw_signal(const EntityRecord& rec, Rng& rng) const {
    if (rng.uniform() < spec_.context_informativeness) return pick_signal_type(rec, rng);
    return std::nullopt;
  }

  static std::string surface_for(std::size_t entity_ordinal) { return "Ent" + letters(entity_ordinal, 4); }

 private:
  SynSpec spec_;
  std::vector<std::string> type_names_;
  std::vector<std::vector<std::string>> vocab_;
  std::vector<std::string> background_;
  std::vector<std::string> cues_;
};

struct SyntheticData {
  AnnotatedCorpus corpus;
  KnowledgeBase kb;
  std::vector<std::size_t> mentions;  // per entity ordinal
};

inline SyntheticData generate(const SynSpec& spec) {
  SynGenerator gen(spec);
  Rng rng(spec.seed);
  Rng kb_rng = rng.fork(1);
  Rng text_rng = rng.fork(2);

  KnowledgeBase kb{TypeInventory(gen.type_names())};
  std::size_t ordinal = 0;
  for (TypeId t = 0; t < spec.num_types; ++t) {
    for (std::size_t i = 0; i < spec.entities_per_type; ++i, ++ordinal) {
      EntityRecord rec;
      rec.id = "/m/syn" + std::to_string(ordinal);
      rec.notable = t;
      rec.types.push_back(t);
      const std::size_t count = 1 + kb_rng.categorical(spec.types_per_entity);
      std::vector<TypeId> others;
      for (TypeId o = 0; o < spec.num_types; ++o) {
        if (o != t) others.push_back(o);
      }
      kb_rng.shuffle(others);
      others.resize(std::min(others.size(), count - 1));
      std::sort(others.begin(), others.end());
      rec.types.insert(rec.types.end(), others.begin(), others.end());
      kb.add_entity(std::move(rec));
    }
  }
  kb = split_entities(std::move(kb), spec.split, kb_rng.next());

  SyntheticData out{{}, {}, std::vector<std::size_t>(kb.num_entities(), 0)};
  for (EntityIndex e = 0; e < kb.num_entities(); ++e) {
    const auto& rec = kb.entity(e);
    const std::size_t n = 1 + text_rng.poisson(spec.mentions_per_entity - 1.0);
    out.mentions[e] = n;
    const std::string surface = SynGenerator::surface_for(e);
    for (std::size_t m = 0; m < n; ++m) {
      out.corpus.push_back(gen.sentence(rec.id, surface, gen.draw_signal(rec, text_rng), text_rng));
    }
  }
  text_rng.shuffle(out.corpus);
  out.kb = std::move(kb);
  return out;
}

// Appends `count` informative sentences of `rare_type` mentioning `entity`.
inline AnnotatedCorpus plant_rare_signal(AnnotatedCorpus corpus, const KnowledgeBase& kb,
                                         const SynGenerator& gen, const std::string& entity,
                                         TypeId rare_type, std::size_t count, Rng& rng) {
  const auto e = kb.find(entity);
  if (!e) throw ValidationError("entity absent from kb: " + entity);
  if (rare_type >= gen.type_names().size()) throw ValidationError("rare type has no vocabulary");
  const std::string surface = SynGenerator::surface_for(*e);
  for (std::size_t i = 0; i < count; ++i) {
    corpus.push_back(gen.sentence(entity, surface, rare_type, rng));
  }
  return corpus;
}

}  // namespace corptype

#endif  // CORPTYPE_SYNGEN_HPP
