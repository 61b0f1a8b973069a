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

// Entity/type scorers built on the shared MLP:
//
//   global   scores an entity from its corpus-level embedding
//   context  scores each mention context, then summarizes per entity (mean)
//   joint    global + context
//   MFT      type frequency among train entities, same row for everyone
//
// plus distant-supervision dataset construction and context sampling.

#ifndef CORPTYPE_MODELS_HPP
#define CORPTYPE_MODELS_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "corptype/common.hpp"
#include "corptype/corpus.hpp"
#include "corptype/embeddings.hpp"
#include "corptype/kb.hpp"
#include "corptype/neural.hpp"

namespace corptype {

// ---------------------------------------------------------------------------
// Context features

// [x_-k .. x_-1, x_+1 .. x_+k, mean of the 2l nearest non-PAD, in-vocabulary
// neighbors]; size (2k + 1) * d. PAD and unknown tokens are zero vectors and
// do not count towards the mean's divisor.
inline Eigen::VectorXd context_features(const MentionContext& ctx, const EmbeddingTable& units,
                                        std::size_t k, std::size_t l) {
  const std::size_t built = std::min(ctx.left.size(), ctx.right.size());
  if (k > built || l > built) {
    throw ValidationError("context window " + std::to_string(built) + " is smaller than k=" +
                          std::to_string(k) + ", l=" + std::to_string(l));
  }
  const std::size_t d = units.dim();
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>((2 * k + 1) * d));
  auto put = [&](std::size_t slot, std::span<const float> v) {
    for (std::size_t i = 0; i < d; ++i) phi[static_cast<Eigen::Index>(slot * d + i)] = v[i];
  };
  for (std::size_t i = 0; i < k; ++i) {
    put(k - 1 - i, units.lookup(ctx.left[i]));
    put(k + i, units.lookup(ctx.right[i]));
  }
  std::size_t counted = 0;
  const auto avg_offset = static_cast<Eigen::Index>(2 * k * d);
  auto accumulate = [&](const std::string& token) {
    if (token == kPad) return;
    const auto row = units.find(token);
    if (!row) return;
    const auto v = units.row(*row);
    for (std::size_t i = 0; i < d; ++i) phi[avg_offset + static_cast<Eigen::Index>(i)] += v[i];
    ++counted;
  };
  for (std::size_t i = 0; i < l; ++i) {
    accumulate(ctx.left[i]);
    accumulate(ctx.right[i]);
  }
  if (counted > 0) phi.tail(static_cast<Eigen::Index>(d)) /= static_cast<double>(counted);
  return phi;
}

// ---------------------------------------------------------------------------
// Distant supervision

// One mention context, labeled with every kb type of its entity.
struct ContextExample {
  EntityIndex entity = 0;
  MentionContext context;
};

inline std::vector<ContextExample> build_distant_dataset(const AnnotatedCorpus& corpus,
                                                         const KnowledgeBase& kb,
                                                         std::span<const EntityIndex> entities,
                                                         std::size_t k, std::size_t l) {
  std::unordered_set<std::string> wanted;
  for (EntityIndex e : entities) {
    if (e >= kb.num_entities()) throw ValidationError("entity index not in knowledge base");
    wanted.insert(kb.entity(e).id);
  }
  std::vector<ContextExample> out;
  for (const auto& sentence : corpus) {
    bool any = false;
    for (const auto& m : sentence.mentions) any |= wanted.count(m.entity) > 0;
    if (!any) continue;
    for (auto& ctx : extract_contexts(sentence, kb, k, l)) {
      if (!wanted.count(ctx.entity)) continue;
      out.push_back({*kb.find(ctx.entity), std::move(ctx)});
    }
  }
  return out;
}

inline std::vector<ContextExample> build_distant_dataset(const AnnotatedCorpus& corpus,
                                                         const KnowledgeBase& kb, Split split,
                                                         std::size_t k, std::size_t l) {
  const auto entities = kb.entities_in(split);
  return build_distant_dataset(corpus, kb, entities, k, l);
}

inline std::vector<LabeledExample> featurize(std::span<const ContextExample> examples,
                                             const KnowledgeBase& kb, const EmbeddingTable& units,
                                             std::size_t k, std::size_t l, int workers = 1) {
  std::vector<LabeledExample> out(examples.size());
  parallel_for(examples.size(), workers, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t i = b; i < e; ++i) {
      const auto row = kb.label_row(examples[i].entity);
      out[i].features = context_features(examples[i].context, units, k, l);
      out[i].labels = Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

struct TrainSampling {
  std::size_t min_per_type = 10000;
  std::size_t max_per_type = 20000;
};

struct TypeSampleReport {
  std::size_t train_entities = 0;  // train entities with this notable type
  std::size_t pool = 0;
  std::size_t quota = 0;
  std::size_t kept = 0;
};

struct SampledContexts {
  std::vector<ContextExample> examples;
  std::vector<TypeSampleReport> per_type;
};

// For each type t the pool is every context of an entity whose notable type
// is t. Pools at or below min_per_type are kept whole. Larger pools keep
//   clamp(round(min * n_t / median(n)), min, max)
// contexts, n_t being t's train-entity count. Contexts are taken entity by
// entity, entities with fewer kb types first (ties in seeded random order).
inline SampledContexts sample_train_contexts(std::span<const ContextExample> examples,
                                             const KnowledgeBase& kb, const TrainSampling& cfg,
                                             std::uint64_t seed) {
  if (cfg.min_per_type > cfg.max_per_type) {
    throw ValidationError("min_per_type exceeds max_per_type");
  }
  const std::size_t num_types = kb.num_types();
  SampledContexts out;
  out.per_type.resize(num_types);
  for (const auto& r : kb.entities()) {
    if (r.split == Split::kTrain) ++out.per_type[r.notable].train_entities;
  }
  std::vector<double> nonzero;
  for (const auto& rep : out.per_type) {
    if (rep.train_entities > 0) nonzero.push_back(static_cast<double>(rep.train_entities));
  }
  double median = 1.0;
  if (!nonzero.empty()) {
    std::sort(nonzero.begin(), nonzero.end());
    const std::size_t m = nonzero.size();
    median = m % 2 ? nonzero[m / 2] : 0.5 * (nonzero[m / 2 - 1] + nonzero[m / 2]);
  }

  // pools[t][entity] -> example indices, in input order
  std::vector<std::map<EntityIndex, std::vector<std::size_t>>> pools(num_types);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const EntityIndex e = examples[i].entity;
    pools[kb.entity(e).notable][e].push_back(i);
  }

  Rng rng(seed);
  for (TypeId t = 0; t < num_types; ++t) {
    auto& rep = out.per_type[t];
    Rng type_rng = rng.fork(t);
    for (const auto& [e, idx] : pools[t]) rep.pool += idx.size();
    if (rep.pool <= cfg.min_per_type) {
      rep.quota = rep.pool;
    } else {
      const double scaled = static_cast<double>(cfg.min_per_type) *
                            static_cast<double>(rep.train_entities) / median;
      const auto rounded = static_cast<std::size_t>(std::llround(scaled));
      rep.quota = std::min(rep.pool, std::clamp(rounded, cfg.min_per_type, cfg.max_per_type));
    }

    std::vector<EntityIndex> order;
    for (const auto& [e, idx] : pools[t]) order.push_back(e);
    type_rng.shuffle(order);
    std::stable_sort(order.begin(), order.end(), [&](EntityIndex a, EntityIndex b) {
      return kb.entity(a).types.size() < kb.entity(b).types.size();
    });

    std::size_t remaining = rep.quota;
    for (EntityIndex e : order) {
      if (remaining == 0) break;
      std::vector<std::size_t> chosen = pools[t][e];
      if (chosen.size() > remaining) {
        type_rng.shuffle(chosen);
        chosen.resize(remaining);
        std::sort(chosen.begin(), chosen.end());
      }
      for (std::size_t i : chosen) out.examples.push_back(examples[i]);
      remaining -= chosen.size();
    }
    rep.kept = rep.quota - remaining;
  }
  return out;
}

// At most `per_entity` contexts per entity, uniformly without replacement.
// Output keeps the input order.
inline std::vector<ContextExample> sample_eval_contexts(std::span<const ContextExample> examples,
                                                        std::size_t per_entity, std::uint64_t seed) {
  std::map<EntityIndex, std::vector<std::size_t>> by_entity;
  for (std::size_t i = 0; i < examples.size(); ++i) by_entity[examples[i].entity].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (auto& [e, idx] : by_entity) {
    if (idx.size() > per_entity) {
      Rng entity_rng = rng.fork(e);
      entity_rng.shuffle(idx);
      idx.resize(per_entity);
    }
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  std::vector<ContextExample> out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(examples[i]);
  return out;
}

// Context datasets on disk: one JSON object per line,
// {"entity": id, "left": [...], "right": [...]}.
inline std::string format_context_dataset(std::span<const ContextExample> examples,
                                          const KnowledgeBase& kb) {
  std::string out;
  for (const auto& ex : examples) {
    nlohmann::json j;
    j["entity"] = kb.entity(ex.entity).id;
    j["left"] = ex.context.left;
    j["right"] = ex.context.right;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<ContextExample> load_context_dataset(const std::filesystem::path& path,
                                                        const KnowledgeBase& kb) {
  std::vector<ContextExample> out;
  const auto lines = detail::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = path.string() + ":" + std::to_string(i + 1) + ": ";
    try {
      const auto j = nlohmann::json::parse(lines[i]);
      ContextExample ex;
      ex.context.entity = j.at("entity").get<std::string>();
      const auto e = kb.find(ex.context.entity);
      if (!e) throw ValidationError(where + "entity missing from kb: " + ex.context.entity);
      ex.entity = *e;
      ex.context.left = j.at("left").get<std::vector<std::string>>();
      ex.context.right = j.at("right").get<std::vector<std::string>>();
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& err) {
      throw ValidationError(where + err.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Score matrices

enum class Provenance { kGM, kCM, kJM, kMFT };

inline std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kGM:
      return "gm";
    case Provenance::kCM:
      return "cm";
    case Provenance::kJM:
      return "jm";
    default:
      return "mft";
  }
}

inline Provenance parse_provenance(std::string_view s) {
  if (s == "gm") return Provenance::kGM;
  if (s == "cm") return Provenance::kCM;
  if (s == "jm") return Provenance::kJM;
  if (s == "mft") return Provenance::kMFT;
  throw ValidationError("unknown model name: " + std::string(s));
}

// Dense entity x type scores. Rows for entities a model could not score
// (no embedding, no contexts) are flagged absent instead of zero-filled.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  ScoreMatrix(Provenance provenance, std::vector<std::string> types, std::vector<std::string> entities)
      : provenance_(provenance),
        types_(std::move(types)),
        entities_(std::move(entities)),
        values_(types_.size() * entities_.size(), 0.0),
        present_(entities_.size(), 0) {
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      if (!index_.emplace(entities_[i], i).second) {
        throw ValidationError("duplicate entity in score matrix: " + entities_[i]);
      }
    }
  }

  Provenance provenance() const { return provenance_; }
  const std::vector<std::string>& types() const { return types_; }
  const std::vector<std::string>& entities() const { return entities_; }
  std::size_t num_types() const { return types_.size(); }
  std::size_t num_entities() const { return entities_.size(); }

  std::optional<std::size_t> find(std::string_view entity) const {
    auto it = index_.find(std::string(entity));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool has_row(std::size_t i) const { return present_.at(i) != 0; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * types_.size(), types_.size()}; }
  double at(std::size_t i, TypeId t) const { return values_[i * types_.size() + t]; }

  template <typename Range>
  void set_row(std::size_t i, const Range& values) {
    if (static_cast<std::size_t>(std::size(values)) != types_.size()) {
      throw ValidationError("score row has wrong length");
    }
    std::size_t t = 0;
    for (double v : values) {
      if (!std::isfinite(v)) throw ValidationError("non-finite score for " + entities_.at(i));
      values_[i * types_.size() + t++] = v;
    }
    present_.at(i) = 1;
  }

  std::size_t rows_present() const {
    return static_cast<std::size_t>(std::count(present_.begin(), present_.end(), 1));
  }

 private:
  Provenance provenance_ = Provenance::kGM;
  std::vector<std::string> types_;
  std::vector<std::string> entities_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> values_;
  std::vector<std::uint8_t> present_;
};

inline std::vector<std::string> entity_ids(const KnowledgeBase& kb, std::span<const EntityIndex> entities) {
  std::vector<std::string> ids;
  ids.reserve(entities.size());
  for (EntityIndex e : entities) ids.push_back(kb.entity(e).id);
  return ids;
}

// Training examples for the global model: one per entity that has an
// embedding, labeled with its kb membership row.
inline std::vector<LabeledExample> global_examples(const EmbeddingTable& entity_vectors,
                                                   const KnowledgeBase& kb,
                                                   std::span<const EntityIndex> entities) {
  std::vector<LabeledExample> out;
  for (EntityIndex e : entities) {
    const auto row = entity_vectors.find(kb.entity(e).id);
    if (!row) continue;
    const auto v = entity_vectors.row(*row);
    LabeledExample ex;
    ex.features.resize(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) ex.features[static_cast<Eigen::Index>(i)] = v[i];
    const auto labels = kb.label_row(e);
    ex.labels = Eigen::Map<const Eigen::VectorXd>(labels.data(), static_cast<Eigen::Index>(labels.size()));
    out.push_back(std::move(ex));
  }
  return out;
}

inline ScoreMatrix score_gm(const EmbeddingTable& entity_vectors, const Mlp& gm,
                            const KnowledgeBase& kb, std::span<const EntityIndex> entities) {
  if (entity_vectors.dim() != gm.shape().inputs) {
    throw ValidationError("entity embedding dimension does not match global model input");
  }
  if (kb.num_types() != gm.shape().types) {
    throw ValidationError("global model output size does not match type inventory");
  }
  ScoreMatrix scores(Provenance::kGM, kb.types().names(), entity_ids(kb, entities));
  Eigen::VectorXd x(static_cast<Eigen::Index>(entity_vectors.dim()));
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const auto row = entity_vectors.find(kb.entity(entities[i]).id);
    if (!row) continue;
    const auto v = entity_vectors.row(*row);
    for (std::size_t j = 0; j < v.size(); ++j) x[static_cast<Eigen::Index>(j)] = v[j];
    const Eigen::VectorXd p = forward(gm, x);
    scores.set_row(i, std::vector<double>(p.data(), p.data() + p.size()));
  }
  return scores;
}

inline Eigen::VectorXd score_context(const Mlp& cm, const Eigen::Ref<const Eigen::VectorXd>& phi) {
  return forward(cm, phi);
}

enum class Summary { kMean, kMedian, kMax };

inline Summary parse_summary(std::string_view s) {
  if (s == "mean") return Summary::kMean;
  if (s == "median") return Summary::kMedian;
  if (s == "max") return Summary::kMax;
  throw ValidationError("unknown summary function: " + std::string(s));
}

// S_CM(e, t) = g({S_c2t(c, t) : c a context of e}). Entities without any
// context keep an absent row.
inline ScoreMatrix aggregate_cm(const std::vector<std::string>& types,
                                const std::vector<std::string>& entities,
                                const std::vector<std::vector<Eigen::VectorXd>>& context_scores,
                                Summary summary = Summary::kMean) {
  if (context_scores.size() != entities.size()) {
    throw ValidationError("context score lists do not match entity list");
  }
  ScoreMatrix out(Provenance::kCM, types, entities);
  const std::size_t num_types = types.size();
  std::vector<double> row(num_types);
  std::vector<double> column;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const auto& scores = context_scores[i];
    if (scores.empty()) continue;
    for (std::size_t t = 0; t < num_types; ++t) {
      column.clear();
      for (const auto& s : scores) {
        if (static_cast<std::size_t>(s.size()) != num_types) {
          throw ValidationError("context score vector has wrong length");
        }
        column.push_back(s[static_cast<Eigen::Index>(t)]);
      }
      switch (summary) {
        case Summary::kMean: {
          double total = 0.0;
          for (double v : column) total += v;
          row[t] = total / static_cast<double>(column.size());
          break;
        }
        case Summary::kMedian: {
          std::sort(column.begin(), column.end());
          const std::size_t m = column.size();
          row[t] = m % 2 ? column[m / 2] : 0.5 * (column[m / 2 - 1] + column[m / 2]);
          break;
        }
        case Summary::kMax:
          row[t] = *std::max_element(column.begin(), column.end());
          break;
      }
    }
    out.set_row(i, row);
  }
  return out;
}

// Scores every context with the context model and summarizes per entity.
inline ScoreMatrix score_cm(const Mlp& cm, const EmbeddingTable& units, const KnowledgeBase& kb,
                            std::span<const ContextExample> contexts,
                            std::span<const EntityIndex> entities, std::size_t k, std::size_t l,
                            Summary summary = Summary::kMean, int workers = 1) {
  if ((2 * k + 1) * units.dim() != cm.shape().inputs) {
    throw ValidationError("context feature size (2k+1)*d does not match context model input");
  }
  if (kb.num_types() != cm.shape().types) {
    throw ValidationError("context model output size does not match type inventory");
  }
  std::vector<Eigen::VectorXd> per_context(contexts.size());
  parallel_for(contexts.size(), workers, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t i = b; i < e; ++i) {
      per_context[i] = score_context(cm, context_features(contexts[i].context, units, k, l));
    }
  });
  std::unordered_map<EntityIndex, std::size_t> slot;
  for (std::size_t i = 0; i < entities.size(); ++i) slot.emplace(entities[i], i);
  std::vector<std::vector<Eigen::VectorXd>> grouped(entities.size());
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    auto it = slot.find(contexts[i].entity);
    if (it != slot.end()) grouped[it->second].push_back(std::move(per_context[i]));
  }
  return aggregate_cm(kb.types().names(), entity_ids(kb, entities), grouped, summary);
}

struct JointScores {
  ScoreMatrix scores;
  std::vector<std::string> gm_only;  // no context-model row; used global score
  std::vector<std::string> cm_only;  // no global-model row; used context score
};

// S_JM = S_GM + S_CM. An entity scored by only one model takes that model's
// row; the fallbacks are listed in the result.
inline JointScores score_jm(const ScoreMatrix& gm, const ScoreMatrix& cm) {
  if (gm.types() != cm.types() || gm.entities() != cm.entities()) {
    throw ValidationError("global and context score matrices cover different entities or types");
  }
  JointScores out{ScoreMatrix(Provenance::kJM, gm.types(), gm.entities()), {}, {}};
  std::vector<double> row(gm.num_types());
  for (std::size_t i = 0; i < gm.num_entities(); ++i) {
    const bool has_gm = gm.has_row(i);
    const bool has_cm = cm.has_row(i);
    if (!has_gm && !has_cm) continue;
    for (std::size_t t = 0; t < row.size(); ++t) {
      row[t] = (has_gm ? gm.at(i, t) : 0.0) + (has_cm ? cm.at(i, t) : 0.0);
    }
    if (!has_cm) out.gm_only.push_back(gm.entities()[i]);
    if (!has_gm) out.cm_only.push_back(gm.entities()[i]);
    out.scores.set_row(i, row);
  }
  return out;
}

// Frequency of each type among train-entity memberships, same row for all.
inline ScoreMatrix score_mft(const KnowledgeBase& kb, std::span<const EntityIndex> entities) {
  const auto counts = kb.train_type_counts();
  if (kb.entities_in(Split::kTrain).empty()) throw ValidationError("train split is empty");
  std::vector<double> row(counts.begin(), counts.end());
  ScoreMatrix out(Provenance::kMFT, kb.types().names(), entity_ids(kb, entities));
  for (std::size_t i = 0; i < entities.size(); ++i) out.set_row(i, row);
  return out;
}

// ---------------------------------------------------------------------------
// Score TSV: entity \t type \t score, entity order then type ordinal. Absent
// rows are not written.

inline std::string format_scores(const ScoreMatrix& scores) {
  std::string out;
  for (std::size_t i = 0; i < scores.num_entities(); ++i) {
    if (!scores.has_row(i)) continue;
    for (std::size_t t = 0; t < scores.num_types(); ++t) {
      out += scores.entities()[i];
      out += '\t';
      out += scores.types()[t];
      out += '\t';
      out += format_real(scores.at(i, t));
      out += '\n';
    }
  }
  return out;
}

inline void save_scores(const ScoreMatrix& scores, const std::filesystem::path& path) {
  write_file_atomic(path, format_scores(scores));
}

// Rows are placed by entity id into the given entity list; entities missing
// from the file stay absent. Every row present must list every type.
inline ScoreMatrix load_scores(const std::filesystem::path& path, Provenance provenance,
                               const TypeInventory& types, const std::vector<std::string>& entities) {
  ScoreMatrix out(provenance, types.names(), entities);
  std::map<std::size_t, std::vector<double>> rows;
  std::map<std::size_t, std::vector<bool>> seen;
  const auto lines = detail::read_lines(path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string where = path.string() + ":" + std::to_string(n + 1) + ": ";
    const auto fields = split(lines[n], '\t');
    if (fields.size() != 3) throw ValidationError(where + "expected 3 tab-separated fields");
    const auto e = out.find(fields[0]);
    if (!e) continue;
    const auto t = types.find(fields[1]);
    if (!t) throw ValidationError(where + "unknown type " + fields[1]);
    double v;
    if (!parse_real(fields[2], v) || !std::isfinite(v)) throw ValidationError(where + "bad score");
    auto& row = rows[*e];
    auto& mark = seen[*e];
    if (row.empty()) {
      row.assign(types.size(), 0.0);
      mark.assign(types.size(), false);
    }
    if (mark[*t]) throw ValidationError(where + "duplicate (entity, type) pair");
    row[*t] = v;
    mark[*t] = true;
  }
  for (auto& [e, row] : rows) {
    const auto& mark = seen[e];
    if (std::find(mark.begin(), mark.end(), false) != mark.end()) {
      throw ValidationError(path.string() + ": incomplete score row for " + entities[e]);
    }
    out.set_row(e, row);
  }
  return out;
}

}  // namespace corptype

#endif  // CORPTYPE_MODELS_HPP
