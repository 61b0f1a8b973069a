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

// Corpus-level evaluation. Ranking: precision at 1 and breakeven point.
// Classification: per-type thresholds chosen on dev, then strict accuracy,
// micro F1, entity-macro F1 and type-macro F1 on test, with head/tail slices.

#ifndef CORPTYPE_EVAL_HPP
#define CORPTYPE_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "corptype/common.hpp"
#include "corptype/kb.hpp"
#include "corptype/models.hpp"

namespace corptype {

// Gold membership aligned with the rows of a score matrix.
struct Gold {
  std::vector<std::vector<std::uint8_t>> member;  // [row][type]

  bool is(std::size_t row, TypeId t) const { return member[row][t] != 0; }
};

inline Gold gold_from_kb(const ScoreMatrix& scores, const KnowledgeBase& kb) {
  if (scores.types() != kb.types().names()) {
    throw ValidationError("score matrix types differ from the knowledge base inventory");
  }
  Gold gold;
  gold.member.reserve(scores.num_entities());
  for (const auto& id : scores.entities()) {
    const auto e = kb.find(id);
    if (!e) throw ValidationError("scored entity missing from kb: " + id);
    std::vector<std::uint8_t> row(kb.num_types(), 0);
    for (TypeId t : kb.entity(*e).types) row[t] = 1;
    gold.member.push_back(std::move(row));
  }
  return gold;
}

// Rows that carry scores, in matrix order.
inline std::vector<std::size_t> scored_rows(const ScoreMatrix& scores) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < scores.num_entities(); ++i) {
    if (scores.has_row(i)) rows.push_back(i);
  }
  return rows;
}

namespace detail {

inline void require_rows(const ScoreMatrix& scores, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ValidationError("empty entity set");
  for (std::size_t r : rows) {
    if (r >= scores.num_entities() || !scores.has_row(r)) {
      throw ValidationError("entity without a score row in evaluation set");
    }
  }
}

inline double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace detail

// Highest-scoring type, ties to the lower ordinal.
inline TypeId top_type(std::span<const double> row) {
  TypeId best = 0;
  for (TypeId t = 1; t < row.size(); ++t) {
    if (row[t] > row[best]) best = t;
  }
  return best;
}

inline double precision_at_1(const ScoreMatrix& scores, const Gold& gold,
                             std::span<const std::size_t> rows) {
  detail::require_rows(scores, rows);
  std::size_t hits = 0;
  for (std::size_t r : rows) hits += gold.is(r, top_type(scores.row(r)));
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

// Ranks every (entity, type) pair by descending score (ties: entity order,
// then type ordinal) and returns F1 at the cutoff where precision equals
// recall. Cutoffs with no true positive are skipped; when no exact crossing
// exists the earliest cutoff minimizing |P - R| is used.
inline double breakeven_point(const ScoreMatrix& scores, const Gold& gold,
                              std::span<const std::size_t> rows) {
  detail::require_rows(scores, rows);
  struct Pair {
    double score;
    std::size_t rank_row;
    TypeId type;
    bool gold;
  };
  std::vector<Pair> pairs;
  std::size_t total_gold = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (TypeId t = 0; t < scores.num_types(); ++t) {
      const bool g = gold.is(rows[i], t);
      total_gold += g;
      pairs.push_back({scores.at(rows[i], t), i, t, g});
    }
  }
  if (pairs.empty()) throw ValidationError("empty score matrix");
  if (total_gold == 0) throw ValidationError("breakeven point needs at least one gold pair");
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.rank_row != b.rank_row) return a.rank_row < b.rank_row;
    return a.type < b.type;
  });

  // |P - R| = tp * |G - i| / (i * G); compare as exact rationals.
  std::size_t tp = 0;
  std::optional<std::size_t> best_cut;
  std::size_t best_tp = 0;
  // Stored as numerator / denominator of |P - R|.
  unsigned long long best_num = 0, best_den = 1;
  for (std::size_t i = 1; i <= pairs.size(); ++i) {
    tp += pairs[i - 1].gold;
    if (tp == 0) continue;
    const unsigned long long gap = i > total_gold ? i - total_gold : total_gold - i;
    const unsigned long long num = static_cast<unsigned long long>(tp) * gap;
    const unsigned long long den = static_cast<unsigned long long>(i) * total_gold;
    if (!best_cut || static_cast<long double>(num) * best_den < static_cast<long double>(best_num) * den) {
      best_cut = i;
      best_tp = tp;
      best_num = num;
      best_den = den;
    }
    if (num == 0) break;
  }
  if (!best_cut) return 0.0;
  const std::size_t fp = *best_cut - best_tp;
  const std::size_t fn = total_gold - best_tp;
  return detail::f1(best_tp, fp, fn);
}

// ---------------------------------------------------------------------------
// Thresholds

struct Thresholds {
  std::vector<double> value;  // +inf: never assign (no dev positives)
  std::vector<double> dev_f1;
  std::vector<TypeId> without_positives;
};

// Exhaustive search per type over midpoints between consecutive distinct dev
// scores plus one sentinel below the minimum and one above the maximum. The
// threshold maximizing F1 of {e : S(e,t) >= threshold} wins; ties go to the
// higher threshold.
inline Thresholds select_thresholds(const ScoreMatrix& scores, const Gold& gold,
                                    std::span<const std::size_t> rows) {
  detail::require_rows(scores, rows);
  Thresholds out;
  const std::size_t num_types = scores.num_types();
  out.value.assign(num_types, std::numeric_limits<double>::infinity());
  out.dev_f1.assign(num_types, 0.0);
  for (TypeId t = 0; t < num_types; ++t) {
    std::vector<std::pair<double, bool>> column;
    std::size_t positives = 0;
    for (std::size_t r : rows) {
      const bool g = gold.is(r, t);
      positives += g;
      column.emplace_back(scores.at(r, t), g);
    }
    if (positives == 0) {
      out.without_positives.push_back(t);
      continue;
    }
    // Descending: sweeping down, each distinct score joins the assigned set.
    std::sort(column.begin(), column.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    const double hi = column.front().first;
    const double lo = column.back().first;
    double best_threshold = hi + std::max(1.0, std::abs(hi));
    double best_f1 = detail::f1(0, 0, positives);
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < column.size();) {
      const double s = column[i].first;
      while (i < column.size() && column[i].first == s) {
        if (column[i].second) {
          ++tp;
        } else {
          ++fp;
        }
        ++i;
      }
      const double threshold =
          i < column.size() ? 0.5 * (s + column[i].first) : lo - std::max(1.0, std::abs(lo));
      const double f = detail::f1(tp, fp, positives - tp);
      if (f > best_f1) {
        best_f1 = f;
        best_threshold = threshold;
      }
    }
    out.value[t] = best_threshold;
    out.dev_f1[t] = best_f1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification

struct ClassificationMetrics {
  double accuracy = 0.0;
  double micro_f1 = 0.0;
  double entity_macro_f1 = 0.0;
  std::optional<double> type_macro_f1;  // absent when every type is excluded
  std::vector<TypeId> excluded_types;   // no gold and no assigned entity
};

// assigned[row][t] = S(row, t) >= threshold_t
inline std::vector<std::vector<std::uint8_t>> assign_types(const ScoreMatrix& scores,
                                                           const std::vector<double>& thresholds,
                                                           std::span<const std::size_t> rows) {
  if (thresholds.size() != scores.num_types()) {
    throw ValidationError("threshold missing for a type");
  }
  std::vector<std::vector<std::uint8_t>> assigned(scores.num_entities());
  for (std::size_t r : rows) {
    assigned[r].assign(scores.num_types(), 0);
    for (TypeId t = 0; t < scores.num_types(); ++t) {
      assigned[r][t] = scores.at(r, t) >= thresholds[t];
    }
  }
  return assigned;
}

// Type-macro F1 restricted to `types` (all types when empty span is passed
// via `all_types`).
inline ClassificationMetrics classification_metrics(const std::vector<std::vector<std::uint8_t>>& assigned,
                                                    const Gold& gold, std::span<const std::size_t> rows,
                                                    std::span<const TypeId> types) {
  ClassificationMetrics m;
  std::size_t exact = 0, tp = 0, fp = 0, fn = 0;
  double entity_f1_sum = 0.0;
  for (std::size_t r : rows) {
    std::size_t etp = 0, efp = 0, efn = 0;
    for (TypeId t = 0; t < assigned[r].size(); ++t) {
      const bool a = assigned[r][t] != 0;
      const bool g = gold.is(r, t);
      etp += a && g;
      efp += a && !g;
      efn += !a && g;
    }
    exact += (efp == 0 && efn == 0);
    tp += etp;
    fp += efp;
    fn += efn;
    entity_f1_sum += detail::f1(etp, efp, efn);
  }
  const double n = static_cast<double>(rows.size());
  m.accuracy = static_cast<double>(exact) / n;
  m.micro_f1 = detail::f1(tp, fp, fn);
  m.entity_macro_f1 = entity_f1_sum / n;

  double type_sum = 0.0;
  std::size_t type_count = 0;
  for (TypeId t : types) {
    std::size_t ttp = 0, tfp = 0, tfn = 0;
    for (std::size_t r : rows) {
      const bool a = assigned[r][t] != 0;
      const bool g = gold.is(r, t);
      ttp += a && g;
      tfp += a && !g;
      tfn += !a && g;
    }
    if (ttp + tfp + tfn == 0) {
      m.excluded_types.push_back(t);
      continue;
    }
    type_sum += detail::f1(ttp, tfp, tfn);
    ++type_count;
  }
  if (type_count > 0) m.type_macro_f1 = type_sum / static_cast<double>(type_count);
  return m;
}

inline std::vector<TypeId> all_types(std::size_t n) {
  std::vector<TypeId> v(n);
  for (TypeId t = 0; t < n; ++t) v[t] = t;
  return v;
}

inline ClassificationMetrics classify_and_score(const ScoreMatrix& scores,
                                                const std::vector<double>& thresholds,
                                                const Gold& gold, std::span<const std::size_t> rows) {
  detail::require_rows(scores, rows);
  const auto assigned = assign_types(scores, thresholds, rows);
  return classification_metrics(assigned, gold, rows, all_types(scores.num_types()));
}

// Refuses to evaluate when threshold selection could have seen test entities.
inline void check_disjoint(const std::vector<std::string>& dev, const std::vector<std::string>& test) {
  std::unordered_set<std::string> seen(dev.begin(), dev.end());
  for (const auto& id : test) {
    if (seen.count(id)) throw ValidationError("dev and test entity sets intersect at " + id);
  }
}

// ---------------------------------------------------------------------------
// Reports

struct SliceConfig {
  std::size_t head_entity_min_frequency = 100;  // head: frequency > this
  std::size_t tail_entity_max_frequency = 5;    // tail: frequency < this
  std::size_t head_type_min_train = 3000;       // head: train entities > this
  std::size_t tail_type_max_train = 200;        // tail: train entities < this
};

struct EntitySlice {
  std::size_t size = 0;
  // All absent when the slice is empty.
  std::optional<double> p_at_1, bep, accuracy, micro_f1, entity_macro_f1, type_macro_f1;
};

struct TypeSlice {
  std::size_t size = 0;
  std::optional<double> type_macro_f1;
};

struct EvalReport {
  static constexpr int kSchemaVersion = 1;

  std::string model;
  std::size_t entities_evaluated = 0;
  std::vector<std::string> unscored_entities;

  double p_at_1 = 0.0;
  double bep = 0.0;
  double accuracy = 0.0;
  double micro_f1 = 0.0;
  double entity_macro_f1 = 0.0;
  std::optional<double> type_macro_f1;
  std::vector<std::string> types_excluded_from_macro;

  std::map<std::string, EntitySlice> entity_slices;  // all / head / tail
  std::map<std::string, TypeSlice> type_slices;      // all / head / tail

  std::vector<std::string> types;
  Thresholds thresholds;
  nlohmann::json config = nlohmann::json::object();
};

struct SliceInputs {
  // Corpus mention count per entity id; missing ids count as zero.
  std::unordered_map<std::string, std::size_t> entity_frequency;
  // Train entities per type ordinal.
  std::vector<std::size_t> type_train_count;
  SliceConfig config;
};

inline EntitySlice entity_slice(const ScoreMatrix& scores, const Gold& gold,
                                const std::vector<double>& thresholds,
                                std::span<const std::size_t> rows) {
  EntitySlice s;
  s.size = rows.size();
  if (rows.empty()) return s;
  s.p_at_1 = precision_at_1(scores, gold, rows);
  s.bep = breakeven_point(scores, gold, rows);
  const auto m = classify_and_score(scores, thresholds, gold, rows);
  s.accuracy = m.accuracy;
  s.micro_f1 = m.micro_f1;
  s.entity_macro_f1 = m.entity_macro_f1;
  s.type_macro_f1 = m.type_macro_f1;
  return s;
}

// Builds the full report for `test_scores` given thresholds selected on dev.
inline EvalReport slice_report(const ScoreMatrix& test_scores, const Gold& gold,
                               const Thresholds& thresholds, const SliceInputs& slices) {
  EvalReport rep;
  rep.model = std::string(provenance_name(test_scores.provenance()));
  rep.types = test_scores.types();
  rep.thresholds = thresholds;
  const auto rows = scored_rows(test_scores);
  for (std::size_t i = 0; i < test_scores.num_entities(); ++i) {
    if (!test_scores.has_row(i)) rep.unscored_entities.push_back(test_scores.entities()[i]);
  }
  rep.entities_evaluated = rows.size();

  rep.p_at_1 = precision_at_1(test_scores, gold, rows);
  rep.bep = breakeven_point(test_scores, gold, rows);
  const auto assigned = assign_types(test_scores, thresholds.value, rows);
  const auto types = all_types(test_scores.num_types());
  const auto m = classification_metrics(assigned, gold, rows, types);
  rep.accuracy = m.accuracy;
  rep.micro_f1 = m.micro_f1;
  rep.entity_macro_f1 = m.entity_macro_f1;
  rep.type_macro_f1 = m.type_macro_f1;
  for (TypeId t : m.excluded_types) rep.types_excluded_from_macro.push_back(rep.types[t]);

  const auto& cfg = slices.config;
  std::vector<std::size_t> head, tail;
  for (std::size_t r : rows) {
    auto it = slices.entity_frequency.find(test_scores.entities()[r]);
    const std::size_t f = it == slices.entity_frequency.end() ? 0 : it->second;
    if (f > cfg.head_entity_min_frequency) head.push_back(r);
    if (f < cfg.tail_entity_max_frequency) tail.push_back(r);
  }
  rep.entity_slices["all"] = entity_slice(test_scores, gold, thresholds.value, rows);
  rep.entity_slices["head"] = entity_slice(test_scores, gold, thresholds.value, head);
  rep.entity_slices["tail"] = entity_slice(test_scores, gold, thresholds.value, tail);

  if (slices.type_train_count.size() != test_scores.num_types()) {
    throw ValidationError("type train counts do not match the type inventory");
  }
  std::vector<TypeId> head_types, tail_types;
  for (TypeId t = 0; t < test_scores.num_types(); ++t) {
    if (slices.type_train_count[t] > cfg.head_type_min_train) head_types.push_back(t);
    if (slices.type_train_count[t] < cfg.tail_type_max_train) tail_types.push_back(t);
  }
  auto type_slice = [&](const std::vector<TypeId>& ts) {
    TypeSlice s;
    s.size = ts.size();
    if (!ts.empty()) s.type_macro_f1 = classification_metrics(assigned, gold, rows, ts).type_macro_f1;
    return s;
  };
  rep.type_slices["all"] = type_slice(types);
  rep.type_slices["head"] = type_slice(head_types);
  rep.type_slices["tail"] = type_slice(tail_types);
  return rep;
}

namespace detail {

inline nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace detail

inline nlohmann::json report_to_json(const EvalReport& rep) {
  nlohmann::json j;
  j["schema_version"] = EvalReport::kSchemaVersion;
  j["model"] = rep.model;
  j["entities_evaluated"] = rep.entities_evaluated;
  j["unscored_entities"] = rep.unscored_entities;
  j["metrics"] = {{"p_at_1", rep.p_at_1},
                  {"bep", rep.bep},
                  {"accuracy", rep.accuracy},
                  {"micro_f1", rep.micro_f1},
                  {"entity_macro_f1", rep.entity_macro_f1},
                  {"type_macro_f1", detail::opt(rep.type_macro_f1)}};
  j["types_excluded_from_macro"] = rep.types_excluded_from_macro;
  for (const auto& [name, s] : rep.entity_slices) {
    j["slices"]["entities"][name] = {{"size", s.size},
                                     {"p_at_1", detail::opt(s.p_at_1)},
                                     {"bep", detail::opt(s.bep)},
                                     {"accuracy", detail::opt(s.accuracy)},
                                     {"micro_f1", detail::opt(s.micro_f1)},
                                     {"entity_macro_f1", detail::opt(s.entity_macro_f1)},
                                     {"type_macro_f1", detail::opt(s.type_macro_f1)}};
  }
  for (const auto& [name, s] : rep.type_slices) {
    j["slices"]["types"][name] = {{"size", s.size}, {"type_macro_f1", detail::opt(s.type_macro_f1)}};
  }
  nlohmann::json th = nlohmann::json::object();
  for (TypeId t = 0; t < rep.types.size(); ++t) {
    const double v = rep.thresholds.value.at(t);
    th[rep.types[t]] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  }
  j["thresholds"] = th;
  std::vector<std::string> never;
  for (TypeId t : rep.thresholds.without_positives) never.push_back(rep.types[t]);
  j["types_without_dev_positives"] = never;
  j["config"] = rep.config;
  return j;
}

}  // namespace corptype

#endif  // CORPTYPE_EVAL_HPP
