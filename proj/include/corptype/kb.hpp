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

// Knowledge base: type inventory, entity/type membership, notable types and
// the train/dev/test entity split.
//
// File formats (UTF-8, no header):
//   type file    one type id per line
//   entity file  entity_id \t notable_type \t type,type,...
//   split file   entity_id \t train|dev|test

#ifndef CORPTYPE_KB_HPP
#define CORPTYPE_KB_HPP

#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "corptype/common.hpp"

namespace corptype {

using TypeId = std::size_t;
using EntityIndex = std::size_t;

class TypeInventory {
 public:
  TypeInventory() = default;

  explicit TypeInventory(std::vector<std::string> types) : types_(std::move(types)) {
    for (std::size_t i = 0; i < types_.size(); ++i) {
      if (types_[i].empty()) throw ValidationError("empty type identifier");
      if (!index_.emplace(types_[i], i).second) {
        throw ValidationError("duplicate type identifier: " + types_[i]);
      }
    }
  }

  std::size_t size() const { return types_.size(); }
  const std::string& name(TypeId id) const { return types_.at(id); }
  const std::vector<std::string>& names() const { return types_; }

  std::optional<TypeId> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const TypeInventory& other) const { return types_ == other.types_; }

 private:
  std::vector<std::string> types_;
  std::unordered_map<std::string, TypeId> index_;
};

enum class Split { kUnassigned, kTrain, kDev, kTest };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kDev:
      return "dev";
    case Split::kTest:
      return "test";
    default:
      return "unassigned";
  }
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw ValidationError("unknown split name: " + std::string(s));
}

struct EntityRecord {
  std::string id;
  TypeId notable = 0;
  // In file order; no duplicates, always contains `notable`.
  std::vector<TypeId> types;
  Split split = Split::kUnassigned;
};

class KnowledgeBase {
 public:
  KnowledgeBase() = default;
  explicit KnowledgeBase(TypeInventory types) : types_(std::move(types)) {}

  // Validates the record against the membership invariants.
  void add_entity(EntityRecord record) {
    if (record.id.empty()) throw ValidationError("empty entity id");
    if (record.types.empty()) throw ValidationError("entity " + record.id + " has no types");
    std::unordered_set<TypeId> seen;
    bool has_notable = false;
    for (TypeId t : record.types) {
      if (t >= types_.size()) throw ValidationError("entity " + record.id + ": type out of range");
      if (!seen.insert(t).second) {
        throw ValidationError("entity " + record.id + " lists type " + types_.name(t) + " twice");
      }
      has_notable |= (t == record.notable);
    }
    if (!has_notable) {
      throw ValidationError("entity " + record.id + ": notable type absent from its type set");
    }
    if (!index_.emplace(record.id, entities_.size()).second) {
      throw ValidationError("duplicate entity id: " + record.id);
    }
    entities_.push_back(std::move(record));
  }

  const TypeInventory& types() const { return types_; }
  std::size_t num_entities() const { return entities_.size(); }
  std::size_t num_types() const { return types_.size(); }
  const EntityRecord& entity(EntityIndex e) const { return entities_.at(e); }
  const std::vector<EntityRecord>& entities() const { return entities_; }

  std::optional<EntityIndex> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // m(e, t)
  bool member(EntityIndex e, TypeId t) const {
    const auto& ts = entities_.at(e).types;
    return std::find(ts.begin(), ts.end(), t) != ts.end();
  }

  // Multi-hot row of length num_types().
  std::vector<double> label_row(EntityIndex e) const {
    std::vector<double> row(num_types(), 0.0);
    for (TypeId t : entities_.at(e).types) row[t] = 1.0;
    return row;
  }

  void set_split(EntityIndex e, Split s) { entities_.at(e).split = s; }

  std::vector<EntityIndex> entities_in(Split s) const {
    std::vector<EntityIndex> out;
    for (EntityIndex e = 0; e < entities_.size(); ++e) {
      if (entities_[e].split == s) out.push_back(e);
    }
    return out;
  }

  bool split_assigned() const {
    return !entities_.empty() &&
           std::all_of(entities_.begin(), entities_.end(),
                       [](const EntityRecord& r) { return r.split != Split::kUnassigned; });
  }

  // Number of train entities carrying each type.
  std::vector<std::size_t> train_type_counts() const {
    std::vector<std::size_t> counts(num_types(), 0);
    for (const auto& r : entities_) {
      if (r.split != Split::kTrain) continue;
      for (TypeId t : r.types) ++counts[t];
    }
    return counts;
  }

 private:
  TypeInventory types_;
  std::vector<EntityRecord> entities_;
  std::unordered_map<std::string, EntityIndex> index_;
};

namespace detail {

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<std::string> lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  return lines;
}

}  // namespace detail

inline TypeInventory load_types(const std::filesystem::path& type_file) {
  std::vector<std::string> names;
  for (auto& line : detail::read_lines(type_file)) {
    if (line.empty()) throw ValidationError(type_file.string() + ": blank line in type file");
    names.push_back(line);
  }
  return TypeInventory(std::move(names));
}

inline KnowledgeBase load_kb(const std::filesystem::path& entity_file,
                             const std::filesystem::path& type_file) {
  KnowledgeBase kb(load_types(type_file));
  const auto lines = detail::read_lines(entity_file);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = entity_file.string() + ":" + std::to_string(i + 1) + ": ";
    const auto fields = split(lines[i], '\t');
    if (fields.size() != 3) throw ValidationError(where + "expected 3 tab-separated fields");
    EntityRecord rec;
    rec.id = fields[0];
    const auto notable = kb.types().find(fields[1]);
    if (!notable) throw ValidationError(where + "unknown notable type " + fields[1]);
    rec.notable = *notable;
    for (const auto& name : split(fields[2], ',')) {
      const auto t = kb.types().find(name);
      if (!t) throw ValidationError(where + "unknown type " + name);
      rec.types.push_back(*t);
    }
    try {
      kb.add_entity(std::move(rec));
    } catch (const ValidationError& err) {
      throw ValidationError(where + err.what());
    }
  }
  return kb;
}

inline std::string format_types(const TypeInventory& types) {
  std::string out;
  for (const auto& name : types.names()) {
    out += name;
    out += '\n';
  }
  return out;
}

inline std::string format_entities(const KnowledgeBase& kb) {
  std::string out;
  for (const auto& r : kb.entities()) {
    out += r.id;
    out += '\t';
    out += kb.types().name(r.notable);
    out += '\t';
    for (std::size_t i = 0; i < r.types.size(); ++i) {
      if (i) out += ',';
      out += kb.types().name(r.types[i]);
    }
    out += '\n';
  }
  return out;
}

inline void save_kb(const KnowledgeBase& kb, const std::filesystem::path& entity_file,
                    const std::filesystem::path& type_file) {
  write_file_atomic(type_file, format_types(kb.types()));
  write_file_atomic(entity_file, format_entities(kb));
}

inline std::string format_split(const KnowledgeBase& kb) {
  std::string out;
  for (const auto& r : kb.entities()) {
    out += r.id;
    out += '\t';
    out += split_name(r.split);
    out += '\n';
  }
  return out;
}

// Every entity must appear exactly once.
inline void load_split(KnowledgeBase& kb, const std::filesystem::path& split_file) {
  std::vector<bool> seen(kb.num_entities(), false);
  const auto lines = detail::read_lines(split_file);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = split_file.string() + ":" + std::to_string(i + 1) + ": ";
    const auto fields = split(lines[i], '\t');
    if (fields.size() != 2) throw ValidationError(where + "expected 2 tab-separated fields");
    const auto e = kb.find(fields[0]);
    if (!e) throw ValidationError(where + "unknown entity " + fields[0]);
    if (seen[*e]) throw ValidationError(where + "entity listed twice");
    seen[*e] = true;
    kb.set_split(*e, parse_split(fields[1]));
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw ValidationError(split_file.string() + ": split does not cover every entity");
  }
}

struct SplitRatios {
  double train = 0.5;
  double dev = 0.2;
  double test = 0.3;
};

// Seeded shuffle, then contiguous train/dev/test blocks. Each block is the
// rounded exact share, so sizes are within one entity of the ratios.
inline KnowledgeBase split_entities(KnowledgeBase kb, const SplitRatios& ratios,
                                    std::uint64_t seed) {
  if (!(ratios.train > 0 && ratios.dev > 0 && ratios.test > 0)) {
    throw ValidationError("split ratios must be positive");
  }
  if (std::abs(ratios.train + ratios.dev + ratios.test - 1.0) > 1e-9) {
    throw ValidationError("split ratios must sum to 1");
  }
  const std::size_t n = kb.num_entities();
  if (n < 3) throw ValidationError("need at least 3 entities to split");

  std::vector<EntityIndex> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const double exact_train = ratios.train * static_cast<double>(n);
  const double exact_dev = ratios.dev * static_cast<double>(n);
  std::size_t n_train = static_cast<std::size_t>(std::llround(exact_train));
  std::size_t n_dev = static_cast<std::size_t>(std::llround(exact_dev));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 2);
  n_dev = std::clamp<std::size_t>(n_dev, 1, n - 1 - n_train);

  for (std::size_t i = 0; i < n; ++i) {
    Split s = i < n_train ? Split::kTrain : (i < n_train + n_dev ? Split::kDev : Split::kTest);
    kb.set_split(order[i], s);
  }
  return kb;
}

struct TypesPerEntityStats {
  double mean = 0.0;
  double median = 0.0;
};

inline TypesPerEntityStats types_per_entity(const KnowledgeBase& kb, Split split) {
  std::vector<std::size_t> counts;
  for (const auto& r : kb.entities()) {
    if (r.split == split) counts.push_back(r.types.size());
  }
  if (counts.empty()) return {};
  std::sort(counts.begin(), counts.end());
  TypesPerEntityStats stats;
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  stats.mean = total / static_cast<double>(counts.size());
  const std::size_t m = counts.size();
  stats.median = m % 2 ? static_cast<double>(counts[m / 2])
                       : 0.5 * static_cast<double>(counts[m / 2 - 1] + counts[m / 2]);
  return stats;
}

}  // namespace corptype

#endif  // CORPTYPE_KB_HPP
