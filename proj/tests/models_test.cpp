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
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "corptype/models.hpp"
#include "corptype/syngen.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

namespace corptype {
namespace {

using Tokens = std::vector<std::string>;

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

// Units a=(1,0) b=(0,1) c=(2,2).
EmbeddingTable abc_units() { return EmbeddingTable(2, {"a", "b", "c"}, {1, 0, 0, 1, 2, 2}, {}); }

TEST(ContextFeatures, LayoutAndAverage) {
  const auto units = abc_units();
  const MentionContext ctx{"e", {"a", "b", "c"}, {"c", std::string(kPad), "zzz"}};
  const auto phi = context_features(ctx, units, 2, 2);
  ASSERT_EQ(phi.size(), 10);
  // Slots: x_-2 = b, x_-1 = a, x_+1 = c, x_+2 = PAD, then the mean of
  // {a, b, c} (PAD excluded from the divisor).
  const std::vector<double> expected{0, 1, 1, 0, 2, 2, 0, 0, 1, 1};
  EXPECT_EQ(std::vector<double>(phi.data(), phi.data() + phi.size()), expected);

  const auto wide = context_features(ctx, units, 0, 3);
  ASSERT_EQ(wide.size(), 2);
  // a, b, c, c count; PAD and the unknown token do not.
  EXPECT_DOUBLE_EQ(wide[0], 5.0 / 4.0);
  EXPECT_DOUBLE_EQ(wide[1], 5.0 / 4.0);

  const MentionContext empty{"e", {std::string(kPad)}, {std::string(kPad)}};
  EXPECT_EQ(context_features(empty, units, 1, 1), Eigen::VectorXd::Zero(6));
  EXPECT_THROW(context_features(ctx, units, 4, 1), ValidationError);
  EXPECT_THROW(context_features(ctx, units, 1, 4), ValidationError);
}

KnowledgeBase obama_kb() {
  KnowledgeBase kb{TypeInventory({"politician", "author", "city"})};
  kb.add_entity({"e_obama", 0, {0, 1}, Split::kTrain});
  kb.add_entity({"e_paris", 2, {2}, Split::kTrain});
  kb.add_entity({"e_other", 0, {0}, Split::kDev});
  return kb;
}

TEST(DistantDataset, LabelsEveryContextWithAllTypes) {
  const auto kb = obama_kb();
  const AnnotatedCorpus corpus{{{"Obama", "wrote", "books"}, {{0, 1, "e_obama"}}},
                               {{"Obama", "visited", "Paris"}, {{0, 1, "e_obama"}, {2, 3, "e_paris"}}},
                               {{"someone", "else"}, {{0, 1, "e_other"}}}};
  const auto ds = build_distant_dataset(corpus, kb, Split::kTrain, 2, 2);
  ASSERT_EQ(ds.size(), 3u);
  const auto feats = featurize(ds, kb, abc_units(), 1, 1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& id = kb.entity(ds[i].entity).id;
    if (id == "e_obama") {
      EXPECT_EQ(feats[i].labels, (Eigen::VectorXd(3) << 1, 1, 0).finished());
    } else {
      EXPECT_EQ(id, "e_paris");
      EXPECT_EQ(feats[i].labels, (Eigen::VectorXd(3) << 0, 0, 1).finished());
    }
  }
  EXPECT_EQ(build_distant_dataset(corpus, kb, Split::kDev, 1, 1).size(), 1u);
  const std::vector<EntityIndex> bad{7};
  EXPECT_THROW(build_distant_dataset(corpus, kb, bad, 1, 1), ValidationError);
}

TEST(DistantDataset, ExamplesPerEntityEqualMentionCount) {
  SynSpec spec;
  spec.num_types = 4;
  spec.entities_per_type = 15;
  spec.mentions_per_entity = 6;
  spec.seed = 3;
  auto data = generate(spec);
  // Add sentences with several mentions so co-mentions are exercised.
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    Sentence s;
    for (int j = 0; j < 6; ++j) s.tokens.push_back("w");
    const auto a = data.kb.entity(rng.below(data.kb.num_entities())).id;
    const auto b = data.kb.entity(rng.below(data.kb.num_entities())).id;
    s.mentions = {{1, 2, a}, {4, 5, b}};
    data.corpus.push_back(s);
  }
  for (Split split : {Split::kTrain, Split::kDev, Split::kTest}) {
    std::map<std::string, std::size_t> brute;
    for (const auto& s : data.corpus) {
      for (const auto& m : s.mentions) {
        const auto e = data.kb.find(m.entity);
        if (e && data.kb.entity(*e).split == split) ++brute[m.entity];
      }
    }
    std::map<std::string, std::size_t> got;
    for (const auto& ex : build_distant_dataset(data.corpus, data.kb, split, 3, 3)) ++got[data.kb.entity(ex.entity).id];
    EXPECT_EQ(got, brute);
  }
}

// Train kb with `per_type` entities per type; entity i of type t has
// 1 + (i % 3) types. Every entity has `contexts` contexts.
struct SamplingFixture {
  KnowledgeBase kb;
  std::vector<ContextExample> examples;
};

SamplingFixture sampling_fixture(const std::vector<std::size_t>& per_type, std::size_t contexts, Rng& rng) {
  const std::size_t nt = per_type.size();
  std::vector<std::string> names;
  for (std::size_t t = 0; t < nt; ++t) names.push_back("t" + std::to_string(t));
  SamplingFixture f{KnowledgeBase{TypeInventory(names)}, {}};
  for (TypeId t = 0; t < nt; ++t) {
    for (std::size_t i = 0; i < per_type[t]; ++i) {
      EntityRecord r{"e" + std::to_string(t) + "_" + std::to_string(i), t, {t}, Split::kTrain};
      for (std::size_t extra = 1; extra <= i % 3 && extra < nt; ++extra) r.types.push_back((t + extra) % nt);
      f.kb.add_entity(r);
    }
  }
  for (EntityIndex e = 0; e < f.kb.num_entities(); ++e) {
    const std::size_t n = contexts ? contexts : 1 + rng.below(12);
    for (std::size_t c = 0; c < n; ++c) {
      f.examples.push_back({e, {f.kb.entity(e).id, {"w" + std::to_string(c)}, {"x"}}});
    }
  }
  return f;
}

TEST(SampleTrain, PoolBelowMinimumKeptWhole) {
  Rng rng(1);
  const auto f = sampling_fixture({10, 10}, 5, rng);  // pools of 50
  const auto s = sample_train_contexts(f.examples, f.kb, {100, 200}, 1);
  EXPECT_EQ(s.examples.size(), f.examples.size());
  for (const auto& rep : s.per_type) {
    EXPECT_EQ(rep.pool, 50u);
    EXPECT_EQ(rep.kept, 50u);
  }
}

TEST(SampleTrain, LargePoolBetweenMinAndMax) {
  Rng rng(2);
  const auto f = sampling_fixture({100, 100, 400}, 10, rng);  // pools of 1000 and 4000
  const auto s = sample_train_contexts(f.examples, f.kb, {100, 200}, 3);
  // Median train-entity count is 100: quotas are 100, 100 and min(400, 200).
  EXPECT_EQ(s.per_type[0].kept, 100u);
  EXPECT_EQ(s.per_type[1].kept, 100u);
  EXPECT_EQ(s.per_type[2].kept, 200u);
  EXPECT_EQ(s.examples.size(), 400u);
}

TEST(SampleTrain, PrefersEntitiesWithFewerTypes) {
  KnowledgeBase kb{TypeInventory({"a", "b", "c"})};
  kb.add_entity({"many", 0, {0, 1, 2}, Split::kTrain});
  kb.add_entity({"one", 0, {0}, Split::kTrain});
  std::vector<ContextExample> ex;
  for (EntityIndex e : {0u, 1u}) {
    for (int i = 0; i < 4; ++i) ex.push_back({e, {kb.entity(e).id, {"w"}, {"w"}}});
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = sample_train_contexts(ex, kb, {3, 4}, seed);
    // Pool of 8 exceeds min 3; quota is round(3 * 2 / 2) = 3, all from "one".
    ASSERT_EQ(s.examples.size(), 3u);
    for (const auto& c : s.examples) EXPECT_EQ(kb.entity(c.entity).id, "one");
  }
}

TEST(SampleTrain, BoundsOverRandomInputs) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> per_type;
    const std::size_t nt = 2 + rng.below(5);
    for (std::size_t t = 0; t < nt; ++t) per_type.push_back(rng.below(60));
    const auto f = sampling_fixture(per_type, 0, rng);
    const TrainSampling cfg{100, 200};
    const auto s = sample_train_contexts(f.examples, f.kb, cfg, rng.next());
    std::vector<std::size_t> kept(nt, 0);
    for (const auto& c : s.examples) ++kept[f.kb.entity(c.entity).notable];
    for (std::size_t t = 0; t < nt; ++t) {
      const auto& rep = s.per_type[t];
      EXPECT_EQ(kept[t], rep.kept);
      EXPECT_LE(kept[t], cfg.max_per_type);
      EXPECT_GE(kept[t], std::min(rep.pool, cfg.min_per_type));
      if (rep.pool <= cfg.min_per_type) {
        EXPECT_EQ(kept[t], rep.pool);
      }
    }
  }
}

TEST(SampleTrain, Deterministic) {
  Rng rng(9);
  const auto f = sampling_fixture({30, 50, 80}, 0, rng);
  const auto a = sample_train_contexts(f.examples, f.kb, {50, 100}, 4);
  const auto b = sample_train_contexts(f.examples, f.kb, {50, 100}, 4);
  ASSERT_EQ(a.examples.size(), b.examples.size());
  for (std::size_t i = 0; i < a.examples.size(); ++i) EXPECT_EQ(a.examples[i].context, b.examples[i].context);
  EXPECT_THROW(sample_train_contexts(f.examples, f.kb, {10, 5}, 1), ValidationError);
}

TEST(SampleEval, QuotasPerEntity) {
  std::vector<ContextExample> ex;
  for (int i = 0; i < 50; ++i) ex.push_back({0, {"small", {"s" + std::to_string(i)}, {}}});
  for (int i = 0; i < 1000; ++i) ex.push_back({1, {"big", {"b" + std::to_string(i)}, {}}});
  const auto s = sample_eval_contexts(ex, 300, 11);
  std::map<EntityIndex, std::size_t> counts;
  for (const auto& c : s) ++counts[c.entity];
  EXPECT_EQ(counts[0], 50u);
  EXPECT_EQ(counts[1], 300u);
  const auto again = sample_eval_contexts(ex, 300, 11);
  ASSERT_EQ(again.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(again[i].context, s[i].context);
  // Input order is preserved.
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i].entity == s[i - 1].entity && s[i].entity == 1) {
      EXPECT_LT(std::stoi(s[i - 1].context.left[0].substr(1)), std::stoi(s[i].context.left[0].substr(1)));
    }
  }
}

TEST(ContextDataset, RoundTrip) {
  testutil::TempDir dir("models");
  const auto kb = obama_kb();
  const std::vector<ContextExample> ex{{0, {"e_obama", {"a", std::string(kPad)}, {"b", "c"}}},
                                       {1, {"e_paris", {"x", "y"}, {"z", "w"}}}};
  write_file_atomic(dir / "d.jsonl", format_context_dataset(ex, kb));
  const auto back = load_context_dataset(dir / "d.jsonl", kb);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].entity, 0u);
  EXPECT_EQ(back[1].context, ex[1].context);
  write_file_atomic(dir / "bad.jsonl", "{\"entity\":\"nobody\",\"left\":[],\"right\":[]}\n");
  EXPECT_THROW(load_context_dataset(dir / "bad.jsonl", kb), ValidationError);
}

TEST(ScoreGm, ZeroModelScoresOneHalfAndFlagsMissingEmbeddings) {
  const auto kb = obama_kb();
  const EmbeddingTable table(2, {"e_obama", "e_other"}, {1, 2, 3, 4}, {});
  const Mlp gm(MlpShape{2, 3, 3});
  const std::vector<EntityIndex> entities{0, 1, 2};
  const auto s = score_gm(table, gm, kb, entities);
  EXPECT_TRUE(s.has_row(0));
  EXPECT_FALSE(s.has_row(1));
  EXPECT_TRUE(s.has_row(2));
  EXPECT_EQ(to_vec(s.row(0)), (std::vector<double>{0.5, 0.5, 0.5}));
  EXPECT_EQ(s.rows_present(), 2u);
  EXPECT_THROW(score_gm(table, Mlp(MlpShape{3, 3, 3}), kb, entities), ValidationError);
  EXPECT_THROW(score_gm(table, Mlp(MlpShape{2, 3, 2}), kb, entities), ValidationError);
  EXPECT_EQ(global_examples(table, kb, entities).size(), 2u);
}

TEST(ScoreContext, AllPadZeroNetIsOneHalfAndPure) {
  const auto units = abc_units();
  const MentionContext pad{"e", {std::string(kPad), std::string(kPad)}, {std::string(kPad), std::string(kPad)}};
  const auto p = score_context(Mlp(MlpShape{10, 4, 3}), context_features(pad, units, 2, 2));
  for (Eigen::Index t = 0; t < p.size(); ++t) EXPECT_EQ(p[t], 0.5);
  Rng rng(1);
  const auto m = fixtures::random_mlp({10, 4, 3}, rng);
  const MentionContext ctx{"e", {"a", "b"}, {"c", "a"}};
  EXPECT_EQ(score_context(m, context_features(ctx, units, 2, 2)), score_context(m, context_features(ctx, units, 2, 2)));
}

TEST(ScoreContext, FoodContextScoresFood) {
  // Food contexts draw from cooking words, person contexts from others.
  const Tokens food{"served", "cooked", "wine", "ate", "dish", "oven"};
  const Tokens person{"he", "she", "said", "elected", "wrote", "born"};
  Tokens vocab = food;
  vocab.insert(vocab.end(), person.begin(), person.end());
  vocab.insert(vocab.end(), {"in", "the"});
  Rng rng(4);
  std::vector<float> vectors;
  for (std::size_t i = 0; i < vocab.size() * 8; ++i) vectors.push_back(static_cast<float>(rng.uniform() - 0.5));
  const EmbeddingTable units(8, vocab, vectors, {});

  const Tokens function_words{"in", "the"};
  auto make = [&](bool is_food) {
    MentionContext c{"e", {}, {}};
    for (int i = 0; i < 3; ++i) {
      // Mostly the context's own words, with some of the other kind and some function words.
      const std::size_t r = rng.below(6);
      const Tokens& own = is_food ? food : person;
      const Tokens& other = is_food ? person : food;
      const Tokens& src = r < 4 ? own : (r == 4 ? other : function_words);
      c.left.push_back(src[rng.below(src.size())]);
      c.right.push_back(src[rng.below(src.size())]);
    }
    LabeledExample ex{context_features(c, units, 2, 1), Eigen::VectorXd(2)};
    ex.labels << (is_food ? 1.0 : 0.0), (is_food ? 0.0 : 1.0);
    return ex;
  };
  std::vector<LabeledExample> train_set, dev_set;
  for (int i = 0; i < 2000; ++i) train_set.push_back(make(i % 2 == 0));
  for (int i = 0; i < 400; ++i) dev_set.push_back(make(i % 2 == 0));
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_epochs = 20;
  const auto cm = train(train_set, dev_set, 8, cfg).model;

  const MentionContext beef{"e_beef", {"served", "he", std::string(kPad)}, {"cooked", "in", "wine"}};
  const auto p = score_context(cm, context_features(beef, units, 2, 1));
  EXPECT_GT(p[0], p[1]);
}

TEST(AggregateCm, MeanMedianMax) {
  auto v = [](double x) { return (Eigen::VectorXd(1) << x).finished(); };
  const std::vector<std::vector<Eigen::VectorXd>> scores{{v(0.2), v(0.4), v(0.6)}, {v(0.7)}, {}, {v(0.1), v(0.9), v(0.2), v(0.3)}};
  const std::vector<std::string> ids{"a", "b", "c", "d"};
  const auto mean = aggregate_cm({"t"}, ids, scores);
  EXPECT_NEAR(mean.at(0, 0), 0.4, 1e-15);
  EXPECT_EQ(mean.at(1, 0), 0.7);
  EXPECT_FALSE(mean.has_row(2));
  const auto median = aggregate_cm({"t"}, ids, scores, Summary::kMedian);
  EXPECT_EQ(median.at(0, 0), 0.4);
  EXPECT_DOUBLE_EQ(median.at(3, 0), 0.25);
  const auto mx = aggregate_cm({"t"}, ids, scores, Summary::kMax);
  EXPECT_EQ(mx.at(3, 0), 0.9);
  EXPECT_EQ(parse_summary("median"), Summary::kMedian);
  EXPECT_THROW(parse_summary("mode"), ValidationError);
  EXPECT_THROW(aggregate_cm({"t"}, {"a"}, scores), ValidationError);
}

TEST(ScoreCm, MatchesBruteForceAndIsPermutationInvariant) {
  const auto kb = obama_kb();
  const auto units = abc_units();
  Rng rng(3);
  const auto cm = fixtures::random_mlp({6, 4, 3}, rng);
  std::vector<ContextExample> ctx;
  const Tokens words{"a", "b", "c", std::string(kPad), "unk"};
  for (int i = 0; i < 30; ++i) {
    const EntityIndex e = rng.below(2);
    MentionContext c{kb.entity(e).id, {}, {}};
    for (int j = 0; j < 2; ++j) {
      c.left.push_back(words[rng.below(words.size())]);
      c.right.push_back(words[rng.below(words.size())]);
    }
    ctx.push_back({e, c});
  }
  const std::vector<EntityIndex> entities{0, 1, 2};
  const auto s = score_cm(cm, units, kb, ctx, entities, 1, 2);
  for (EntityIndex e : {0u, 1u}) {
    std::vector<double> sum(3, 0.0);
    std::size_t n = 0;
    for (const auto& c : ctx) {
      if (c.entity != e) continue;
      const auto p = forward(cm, context_features(c.context, units, 1, 2));
      for (int t = 0; t < 3; ++t) sum[t] += p[t];
      ++n;
    }
    for (int t = 0; t < 3; ++t) EXPECT_NEAR(s.at(e, t), sum[t] / static_cast<double>(n), 1e-12);
    for (int t = 0; t < 3; ++t) {
      EXPECT_GT(s.at(e, t), 0.0);
      EXPECT_LT(s.at(e, t), 1.0);
    }
  }
  EXPECT_FALSE(s.has_row(2));

  auto shuffled = ctx;
  rng.shuffle(shuffled);
  const auto s2 = score_cm(cm, units, kb, shuffled, entities, 1, 2, Summary::kMean, 3);
  for (EntityIndex e : {0u, 1u}) {
    for (int t = 0; t < 3; ++t) EXPECT_NEAR(s2.at(e, t), s.at(e, t), 1e-12);
  }
  EXPECT_THROW(score_cm(cm, units, kb, ctx, entities, 2, 2), ValidationError);
}

ScoreMatrix matrix(Provenance p, const std::vector<std::vector<double>>& rows) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) ids.push_back("e" + std::to_string(i));
  std::vector<std::string> types;
  for (std::size_t t = 0; t < rows[0].size(); ++t) types.push_back("t" + std::to_string(t));
  ScoreMatrix m(p, types, ids);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].empty()) m.set_row(i, rows[i]);
  }
  return m;
}

TEST(ScoreJm, SumAndFallback) {
  auto gm = matrix(Provenance::kGM, {{0.3, 0.1}, {0.2, 0.4}, {0.9, 0.8}});
  const auto cm = matrix(Provenance::kCM, {{0.5, 0.2}, {0.1, 0.3}, {0.1, 0.1}});
  const auto jm = score_jm(gm, cm);
  EXPECT_DOUBLE_EQ(jm.scores.at(0, 0), 0.8);
  EXPECT_TRUE(jm.gm_only.empty());

  ScoreMatrix partial_cm(Provenance::kCM, cm.types(), cm.entities());
  partial_cm.set_row(0, std::vector<double>{0.5, 0.2});
  ScoreMatrix partial_gm(Provenance::kGM, gm.types(), gm.entities());
  partial_gm.set_row(0, std::vector<double>{0.3, 0.1});
  partial_gm.set_row(1, std::vector<double>{0.2, 0.4});
  const auto fb = score_jm(partial_gm, partial_cm);
  EXPECT_EQ(to_vec(fb.scores.row(1)), (std::vector<double>{0.2, 0.4}));
  EXPECT_EQ(fb.gm_only, (std::vector<std::string>{"e1"}));
  EXPECT_FALSE(fb.scores.has_row(2));
  const auto fb2 = score_jm(partial_cm, partial_gm);
  EXPECT_EQ(fb2.cm_only, (std::vector<std::string>{"e1"}));

  const auto other = matrix(Provenance::kCM, {{0.1, 0.2}});
  EXPECT_THROW(score_jm(gm, other), ValidationError);
}

TEST(ScoreJm, ArgmaxCanDifferFromBoth) {
  // GM favors type 0, CM type 1; both give type 2 solid support.
  const auto gm = matrix(Provenance::kGM, {{0.6, 0.1, 0.55}});
  const auto cm = matrix(Provenance::kCM, {{0.1, 0.6, 0.55}});
  const auto jm = score_jm(gm, cm);
  auto top = [](std::span<const double> r) { return std::max_element(r.begin(), r.end()) - r.begin(); };
  EXPECT_EQ(top(gm.row(0)), 0);
  EXPECT_EQ(top(cm.row(0)), 1);
  EXPECT_EQ(top(jm.scores.row(0)), 2);
}

TEST(ScoreJm, ConstantShiftOfCmRowShiftsJm) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> g(3, std::vector<double>(4)), c = g, shifted = g;
    std::vector<double> shift(3);
    for (std::size_t e = 0; e < 3; ++e) {
      // Dyadic values keep the sums exact.
      shift[e] = static_cast<double>(rng.below(64)) / 64.0;
      for (std::size_t t = 0; t < 4; ++t) {
        g[e][t] = static_cast<double>(rng.below(256)) / 256.0;
        c[e][t] = static_cast<double>(rng.below(256)) / 256.0;
        shifted[e][t] = c[e][t] + shift[e];
      }
    }
    const auto gm = matrix(Provenance::kGM, g);
    const auto a = score_jm(gm, matrix(Provenance::kCM, c)).scores;
    const auto b = score_jm(gm, matrix(Provenance::kCM, shifted)).scores;
    for (std::size_t e = 0; e < 3; ++e) {
      for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(b.at(e, t), a.at(e, t) + shift[e]);
      const auto ra = a.row(e), rb = b.row(e);
      EXPECT_EQ(std::max_element(ra.begin(), ra.end()) - ra.begin(), std::max_element(rb.begin(), rb.end()) - rb.begin());
    }
  }
}

TEST(ScoreMft, CountsTrainMemberships) {
  KnowledgeBase kb{TypeInventory({"a", "b"})};
  kb.add_entity({"e1", 0, {0}, Split::kTrain});
  kb.add_entity({"e2", 0, {0, 1}, Split::kTrain});
  kb.add_entity({"e3", 1, {1}, Split::kTest});
  kb.add_entity({"e4", 0, {0}, Split::kTest});
  const std::vector<EntityIndex> test{2, 3};
  const auto s = score_mft(kb, test);
  EXPECT_EQ(to_vec(s.row(0)), (std::vector<double>{2, 1}));
  EXPECT_EQ(to_vec(s.row(1)), (std::vector<double>{2, 1}));
  KnowledgeBase no_train{TypeInventory({"a"})};
  no_train.add_entity({"x", 0, {0}, Split::kTest});
  EXPECT_THROW(score_mft(no_train, test), ValidationError);
}

TEST(ScoreTsv, RoundTripSkipsAbsentRows) {
  testutil::TempDir dir("models");
  ScoreMatrix m(Provenance::kCM, {"a", "b"}, {"x", "y", "z"});
  m.set_row(0, std::vector<double>{0.1, 0.123456789012345});
  m.set_row(2, std::vector<double>{1e-300, 0.5});
  save_scores(m, dir / "s.tsv");
  EXPECT_EQ(read_file(dir / "s.tsv"), "x\ta\t0.1\nx\tb\t0.123456789012345\nz\ta\t1e-300\nz\tb\t0.5\n");
  const auto back = load_scores(dir / "s.tsv", Provenance::kCM, TypeInventory({"a", "b"}), {"x", "y", "z"});
  EXPECT_FALSE(back.has_row(1));
  EXPECT_EQ(to_vec(back.row(0)), to_vec(m.row(0)));
  EXPECT_EQ(to_vec(back.row(2)), to_vec(m.row(2)));

  write_file_atomic(dir / "partial.tsv", "x\ta\t0.1\n");
  EXPECT_THROW(load_scores(dir / "partial.tsv", Provenance::kCM, TypeInventory({"a", "b"}), {"x"}), ValidationError);
  write_file_atomic(dir / "dup.tsv", "x\ta\t0.1\nx\ta\t0.2\nx\tb\t0.1\n");
  EXPECT_THROW(load_scores(dir / "dup.tsv", Provenance::kCM, TypeInventory({"a", "b"}), {"x"}), ValidationError);
  write_file_atomic(dir / "nan.tsv", "x\ta\tnan\nx\tb\t0.1\n");
  EXPECT_THROW(load_scores(dir / "nan.tsv", Provenance::kCM, TypeInventory({"a", "b"}), {"x"}), ValidationError);
}

TEST(ScoreMatrix, RejectsInvalidRows) {
  ScoreMatrix m(Provenance::kGM, {"a", "b"}, {"x"});
  EXPECT_THROW(m.set_row(0, std::vector<double>{0.1}), ValidationError);
  EXPECT_THROW(m.set_row(0, std::vector<double>{0.1, std::numeric_limits<double>::infinity()}), ValidationError);
  EXPECT_THROW(ScoreMatrix(Provenance::kGM, {"a"}, {"x", "x"}), ValidationError);
  EXPECT_EQ(parse_provenance("jm"), Provenance::kJM);
  EXPECT_THROW(parse_provenance("xx"), ValidationError);
}

}  // namespace
}  // namespace corptype
