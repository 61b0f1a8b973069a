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


#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "corptype/kb.hpp"
#include "test_util.hpp"

namespace corptype {
namespace {

KnowledgeBase load_from_text(const testutil::TempDir& dir, const std::string& types, const std::string& entities) {
  write_file_atomic(dir / "types.txt", types);
  write_file_atomic(dir / "entities.tsv", entities);
  return load_kb(dir / "entities.tsv", dir / "types.txt");
}

KnowledgeBase numbered_kb(std::size_t n) {
  KnowledgeBase kb{TypeInventory({"a", "b", "c"})};
  for (std::size_t i = 0; i < n; ++i) {
    const TypeId t = static_cast<TypeId>(i % 3);
    std::vector<TypeId> types{t};
    if (i % 2) types.push_back((t + 1) % 3);
    kb.add_entity({"e" + std::to_string(i), t, types, Split::kUnassigned});
  }
  return kb;
}

TEST(LoadKb, RowWithTwoTypes) {
  testutil::TempDir dir("kb");
  const auto kb = load_from_text(dir, "food\ningredient\n", "e1\tfood\tfood,ingredient\n");
  ASSERT_EQ(kb.num_entities(), 1u);
  const auto e = kb.find("e1");
  ASSERT_TRUE(e);
  EXPECT_EQ(kb.types().name(kb.entity(*e).notable), "food");
  EXPECT_TRUE(kb.member(*e, *kb.types().find("food")));
  EXPECT_TRUE(kb.member(*e, *kb.types().find("ingredient")));
  EXPECT_EQ(kb.label_row(*e), (std::vector<double>{1.0, 1.0}));
}

TEST(LoadKb, NotableTypeMissingFromTypeSet) {
  testutil::TempDir dir("kb");
  EXPECT_THROW(load_from_text(dir, "food\ningredient\n", "e1\tfood\tingredient\n"), ValidationError);
}

TEST(LoadKb, Errors) {
  testutil::TempDir dir("kb");
  EXPECT_THROW(load_from_text(dir, "a\nb\n", "e1\ta\ta\ne1\tb\tb\n"), ValidationError);
  EXPECT_THROW(load_from_text(dir, "a\nb\n", "e1\ta\ta,zzz\n"), ValidationError);
  EXPECT_THROW(load_from_text(dir, "a\nb\n", "e1\ta\n"), ValidationError);
  EXPECT_THROW(load_from_text(dir, "a\nb\n", "e1\ta\ta,a\n"), ValidationError);
  EXPECT_THROW(load_from_text(dir, "a\na\n", "e1\ta\ta\n"), ValidationError);
  EXPECT_THROW(load_from_text(dir, "a\n\nb\n", "e1\ta\ta\n"), ValidationError);
  try {
    load_from_text(dir, "a\nb\n", "e1\ta\ta\ne2\tb\tq\n");
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(KnowledgeBase, EveryEntityHasItsNotableType) {
  const auto kb = numbered_kb(30);
  for (EntityIndex e = 0; e < kb.num_entities(); ++e) {
    const auto& r = kb.entity(e);
    EXPECT_GE(r.types.size(), 1u);
    EXPECT_TRUE(kb.member(e, r.notable));
  }
}

TEST(KbFiles, SaveLoadRoundTripIsBitExact) {
  testutil::TempDir dir("kb");
  const auto kb = numbered_kb(25);
  save_kb(kb, dir / "e.tsv", dir / "t.txt");
  const auto back = load_kb(dir / "e.tsv", dir / "t.txt");
  save_kb(back, dir / "e2.tsv", dir / "t2.txt");
  EXPECT_EQ(read_file(dir / "e.tsv"), read_file(dir / "e2.tsv"));
  EXPECT_EQ(read_file(dir / "t.txt"), read_file(dir / "t2.txt"));
  ASSERT_EQ(back.num_entities(), kb.num_entities());
  for (EntityIndex e = 0; e < kb.num_entities(); ++e) {
    EXPECT_EQ(back.entity(e).id, kb.entity(e).id);
    EXPECT_EQ(back.entity(e).notable, kb.entity(e).notable);
    EXPECT_EQ(back.entity(e).types, kb.entity(e).types);
  }
}

TEST(SplitEntities, TenEntitiesFiveTwoThree) {
  const auto kb = split_entities(numbered_kb(10), {0.5, 0.2, 0.3}, 1);
  EXPECT_EQ(kb.entities_in(Split::kTrain).size(), 5u);
  EXPECT_EQ(kb.entities_in(Split::kDev).size(), 2u);
  EXPECT_EQ(kb.entities_in(Split::kTest).size(), 3u);
  EXPECT_TRUE(kb.split_assigned());
}

TEST(SplitEntities, SameSeedSameSplit) {
  const auto a = split_entities(numbered_kb(50), {}, 17);
  const auto b = split_entities(numbered_kb(50), {}, 17);
  const auto c = split_entities(numbered_kb(50), {}, 18);
  EXPECT_EQ(format_split(a), format_split(b));
  EXPECT_NE(format_split(a), format_split(c));
  // Splitting an already split kb with the same seed changes nothing.
  EXPECT_EQ(format_split(split_entities(a, {}, 17)), format_split(a));
}

TEST(SplitEntities, SizesWithinOneOfExact) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng.below(300);
    const double a = 0.05 + rng.uniform();
    const double b = 0.05 + rng.uniform();
    const double c = 0.05 + rng.uniform();
    const double s = a + b + c;
    SplitRatios r{a / s, b / s, 1.0 - a / s - b / s};
    const double nn = static_cast<double>(n);
    // Every block must have room for one entity.
    if (std::min({r.train, r.dev, r.test}) * nn < 1.0) continue;
    const auto kb = split_entities(numbered_kb(n), r, rng.next());
    EXPECT_LE(std::abs(static_cast<double>(kb.entities_in(Split::kTrain).size()) - r.train * nn), 1.0 + 1e-9);
    EXPECT_LE(std::abs(static_cast<double>(kb.entities_in(Split::kDev).size()) - r.dev * nn), 1.0 + 1e-9);
    EXPECT_LE(std::abs(static_cast<double>(kb.entities_in(Split::kTest).size()) - r.test * nn), 1.0 + 1e-9);
    EXPECT_EQ(kb.entities_in(Split::kTrain).size() + kb.entities_in(Split::kDev).size() +
                  kb.entities_in(Split::kTest).size(),
              n);
  }
}

TEST(SplitEntities, Errors) {
  EXPECT_THROW(split_entities(numbered_kb(2), {}, 1), ValidationError);
  EXPECT_THROW(split_entities(numbered_kb(10), {0.5, 0.5, 0.5}, 1), ValidationError);
  EXPECT_THROW(split_entities(numbered_kb(10), {1.0, 0.0, 0.0}, 1), ValidationError);
}

TEST(SplitFile, RoundTripAndCoverage) {
  testutil::TempDir dir("kb");
  const auto kb = split_entities(numbered_kb(12), {}, 3);
  write_file_atomic(dir / "split.tsv", format_split(kb));
  auto fresh = numbered_kb(12);
  load_split(fresh, dir / "split.tsv");
  EXPECT_EQ(format_split(fresh), format_split(kb));

  write_file_atomic(dir / "partial.tsv", "e0\ttrain\n");
  auto other = numbered_kb(12);
  EXPECT_THROW(load_split(other, dir / "partial.tsv"), ValidationError);
  write_file_atomic(dir / "bad.tsv", "e0\tvalidation\n");
  EXPECT_THROW(load_split(other, dir / "bad.tsv"), ValidationError);
}

TEST(TypesPerEntity, MeanAndMedian) {
  KnowledgeBase kb{TypeInventory({"a", "b", "c"})};
  kb.add_entity({"x", 0, {0}, Split::kTrain});
  kb.add_entity({"y", 0, {0, 1}, Split::kTrain});
  kb.add_entity({"z", 0, {0, 1, 2}, Split::kTrain});
  kb.add_entity({"w", 0, {0, 1}, Split::kTrain});
  kb.add_entity({"v", 0, {0, 1, 2}, Split::kDev});
  const auto s = types_per_entity(kb, Split::kTrain);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.median, 2.0);
  EXPECT_EQ(kb.train_type_counts(), (std::vector<std::size_t>{4, 3, 1}));
}

}  // namespace
}  // namespace corptype
