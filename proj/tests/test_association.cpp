#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "owl3d/association.hpp"
#include "owl3d/geometry.hpp"
#include "owl3d/synth.hpp"

using namespace owl3d;

namespace {

IndexSet range(Index lo, Index hi) {
  IndexSet out;
  for (Index i = lo; i <= hi; ++i) out.push_back(i);
  return out;
}

CaptionRecord view(IndexSet idx, std::string text, std::uint32_t frame = 0, std::string scene = "s") {
  CaptionRecord r;
  r.level = CaptionLevel::kView;
  r.point_indices = std::move(idx);
  r.text = std::move(text);
  r.source_frames = {frame};
  r.scene = std::move(scene);
  return r;
}

EntityCandidate candidate(std::size_t size, std::size_t pi, std::size_t pj, std::string text = "chair") {
  EntityCandidate c;
  c.record.level = CaptionLevel::kEntity;
  c.record.text = std::move(text);
  c.record.point_indices = range(0, static_cast<Index>(size) - 1);
  c.parent_size_i = pi;
  c.parent_size_j = pj;
  return c;
}

}  // namespace

TEST(ExtractEntities, DropsShippedStopwords) {
  EXPECT_EQ(extract_entities("A wooden chair next to a table").words,
            (std::set<std::string>{"wooden", "chair", "next", "table"}));
  EXPECT_TRUE(extract_entities("").words.empty());
  EXPECT_EQ(extract_entities("There is an empty room.").words, std::set<std::string>{});
}

TEST(ExtractEntities, LexiconPhrasesMergeLongestFirst) {
  Lexicon lex;
  lex.phrases = {"shower curtain", "shower curtain rod"};
  EXPECT_EQ(extract_entities("a shower curtain", lex).words, std::set<std::string>{"shower_curtain"});
  EXPECT_EQ(extract_entities("the Shower Curtain Rod and a shower", lex).words,
            (std::set<std::string>{"shower", "shower_curtain_rod"}));
}

TEST(AssociateScene, SurrogateIsSortedEntityUnion) {
  std::vector<CameraFrame> frames(2);
  frames[0].caption = "a chair";
  frames[1].caption = "a chair and a table";
  frames[1].id = 1;
  const auto rec = associate_scene(10, frames, std::nullopt);
  EXPECT_EQ(rec.text, "chair table");
  EXPECT_EQ(rec.point_indices, range(0, 9));
  EXPECT_EQ(rec.level, CaptionLevel::kScene);
}

TEST(AssociateScene, PrecomputedCaptionPassesThrough) {
  const auto rec = associate_scene(3, {}, std::string("a living room with a sofa"));
  EXPECT_EQ(rec.text, "a living room with a sofa");
  EXPECT_THROW(associate_scene(3, {}, std::nullopt), ValidationError);
}

TEST(AssociateScene, SyntheticSceneCoversEveryPoint) {
  SynthSpec spec;
  spec.seed = 21;
  spec.frames = 10;
  const SceneBundle b = make_bundle(spec, "s");
  const auto result = associate_bundle(b, PipelineConfig{}, LevelSelection{true, false, false});
  ASSERT_EQ(result.records.size(), 1u);
  const auto stats = association_stats(result.records);
  EXPECT_DOUBLE_EQ(stats.at(CaptionLevel::kScene).mean_points, static_cast<double>(b.cloud.size()));
}

TEST(AssociateView, DroppedWhenDepthIsEmpty) {
  SynthSpec spec;
  spec.seed = 1;
  const SceneBundle b = make_bundle(spec, "s");
  CameraFrame f = b.frames[0];
  std::fill(f.depth.begin(), f.depth.end(), 0.0f);
  EXPECT_FALSE(associate_view(b.cloud, f, PipelineConfig{}));
}

TEST(AssociateView, VisiblePointsAreInsideTheViewSet) {
  SynthSpec spec;
  spec.seed = 5;
  const SceneBundle b = make_bundle(spec, "s");
  const PipelineConfig cfg;
  for (const auto& f : b.frames) {
    const auto rec = associate_view(b.cloud, f, cfg);
    if (!rec) continue;
    std::set<Index> in_view(rec->point_indices.begin(), rec->point_indices.end());
    for (std::size_t i = 0; i < b.cloud.size(); ++i) {
      const auto p = project(f, b.cloud.points[i].cast<double>());
      if (!p) continue;
      const int u = static_cast<int>(std::lround(p->u));
      const int v = static_cast<int>(std::lround(p->v));
      if (u < 0 || v < 0 || u >= f.width || v >= f.height) continue;
      const float d = f.depth_at(u, v);
      if (d > 0.0f && std::abs(p->depth - d) <= 1e-5) {
        EXPECT_TRUE(in_view.count(static_cast<Index>(i))) << i;
      }
    }
  }
}

TEST(AssociateView, CameraSeeingAPlaneCoversAllOfIt) {
  ScenePointCloud scene;
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) scene.points.emplace_back(0.02f * x - 0.19f, 0.02f * y - 0.19f, 1.0f);
  }
  CameraFrame f;
  f.width = 64;
  f.height = 64;
  f.fx = f.fy = 64.0;
  f.cx = f.cy = 32.0;
  f.caption = "a wall";
  f.depth = render_depth(scene.points, f);
  const auto rec = associate_view(scene, f, PipelineConfig{});
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->point_indices.size(), scene.size());
}

TEST(EntityPairs, SetSemanticsExample) {
  const auto out = entity_pairs(view(range(1, 100), "a chair and a table"),
                                view(range(51, 150), "a table and a sofa", 1));
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].record.point_indices, range(1, 50));
  EXPECT_EQ(out[0].record.text, "chair");
  EXPECT_EQ(out[1].record.point_indices, range(101, 150));
  EXPECT_EQ(out[1].record.text, "sofa");
  EXPECT_EQ(out[2].record.point_indices, range(51, 100));
  EXPECT_EQ(out[2].record.text, "table");
  for (const auto& c : out) {
    EXPECT_EQ(c.parent_size_i, 100u);
    EXPECT_EQ(c.parent_size_j, 100u);
    EXPECT_EQ(c.record.source_frames, (std::vector<std::uint32_t>{0, 1}));
  }
}

TEST(EntityPairs, IdenticalRecordsKeepOnlyTheIntersection) {
  const auto r = view(range(0, 9), "a lamp");
  const auto out = entity_pairs(r, r);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].record.point_indices, r.point_indices);
  EXPECT_EQ(out[0].record.text, "lamp");
}

TEST(EntityPairs, DifferentScenesAreRejected) {
  EXPECT_THROW(entity_pairs(view({1}, "a chair", 0, "a"), view({1}, "a chair", 1, "b")), ValidationError);
}

TEST(EntityPairs, SwappingInputsSwapsTheDifferences) {
  std::mt19937_64 rng(9);
  std::bernoulli_distribution coin(0.5);
  const char* words[] = {"chair", "table", "sofa", "bed", "lamp"};
  for (int trial = 0; trial < 50; ++trial) {
    IndexSet a, b;
    std::string ta, tb;
    for (Index i = 0; i < 300; ++i) {
      if (coin(rng)) a.push_back(i);
      if (coin(rng)) b.push_back(i);
    }
    for (const char* w : words) {
      if (coin(rng)) ta += std::string(" ") + w;
      if (coin(rng)) tb += std::string(" ") + w;
    }
    const auto ab = entity_pairs(view(a, ta), view(b, tb));
    const auto ba = entity_pairs(view(b, tb), view(a, ta));
    auto key = [](const std::vector<EntityCandidate>& v) {
      std::set<std::pair<IndexSet, std::string>> s;
      for (const auto& c : v) s.emplace(c.record.point_indices, c.record.text);
      return s;
    };
    EXPECT_EQ(key(ab), key(ba));
    std::set<Index> seen;
    for (const auto& c : ab) {
      for (Index i : c.record.point_indices) EXPECT_TRUE(seen.insert(i).second);
    }
  }
}

TEST(FilterEntityPairs, BoundaryArithmetic) {
  const PipelineConfig cfg;
  EXPECT_FALSE(entity_passes_filter(candidate(50, 1000, 2000), cfg));
  EXPECT_FALSE(entity_passes_filter(candidate(100, 1000, 2000), cfg));
  EXPECT_TRUE(entity_passes_filter(candidate(101, 1000, 2000), cfg));
  EXPECT_FALSE(entity_passes_filter(candidate(301, 1000, 2000), cfg));
  EXPECT_FALSE(entity_passes_filter(candidate(300, 1000, 2000), cfg));
  EXPECT_TRUE(entity_passes_filter(candidate(299, 1000, 2000), cfg));
  EXPECT_FALSE(entity_passes_filter(candidate(299, 1000, 2000, ""), cfg));
}

TEST(FilterEntityPairs, IsIdempotentAndAPredicateSubset) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> size(1, 600);
  std::uniform_int_distribution<std::size_t> parent(200, 2000);
  std::vector<EntityCandidate> all;
  for (int i = 0; i < 200; ++i) all.push_back(candidate(size(rng), parent(rng), parent(rng)));
  const PipelineConfig cfg;
  const auto once = filter_entity_pairs(all, cfg);
  EXPECT_EQ(filter_entity_pairs(once, cfg), once);
  std::size_t expected = 0;
  for (const auto& c : all) {
    const auto n = c.record.point_indices.size();
    const auto m = std::min(c.parent_size_i, c.parent_size_j);
    if (n > 100 && 10 * n < 3 * m) ++expected;
  }
  EXPECT_EQ(once.size(), expected);
}

TEST(AssociationStats, Examples) {
  std::vector<CaptionRecord> recs(2);
  for (auto& r : recs) {
    r.level = CaptionLevel::kScene;
    r.text = "x";
    r.point_indices = range(0, 99);
  }
  const auto s = association_stats(recs);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.at(CaptionLevel::kScene), (LevelStats{2, 100.0}));
  EXPECT_TRUE(association_stats({}).empty());
}

TEST(AdjacentViewPairs, ConsecutiveOrAllAboveJaccard) {
  const std::vector<CaptionRecord> views = {view(range(0, 9), "a"), view(range(5, 14), "b"),
                                            view(range(8, 17), "c"), view(range(100, 110), "d")};
  PipelineConfig cfg;
  EXPECT_DOUBLE_EQ(jaccard(views[0].point_indices, views[1].point_indices), 5.0 / 15.0);
  using P = std::vector<std::pair<std::size_t, std::size_t>>;
  EXPECT_EQ(adjacent_view_pairs(views, cfg), (P{{0, 1}, {1, 2}}));
  cfg.all_view_pairs = true;
  EXPECT_EQ(adjacent_view_pairs(views, cfg), (P{{0, 1}, {0, 2}, {1, 2}}));
}

TEST(ParseLevels, SelectsListedLevels) {
  const auto sel = parse_levels("scene,entity");
  EXPECT_TRUE(sel.scene);
  EXPECT_FALSE(sel.view);
  EXPECT_TRUE(sel.entity);
  EXPECT_THROW(parse_levels("scene,room"), ValidationError);
}

TEST(AssociateBundle, EntityRecordsAreConsistentWithTheirParents) {
  SynthSpec spec;
  spec.seed = 12;
  const SceneBundle b = make_bundle(spec, "room12");
  PipelineConfig cfg;
  cfg.gamma = 10;
  cfg.delta = 0.6;
  const auto result = associate_bundle(b, cfg, LevelSelection{});
  std::size_t entities = 0;
  for (const auto& r : result.records) {
    EXPECT_NO_THROW(r.validate(b.cloud.size()));
    EXPECT_EQ(r.scene, "room12");
    if (r.level == CaptionLevel::kEntity) {
      ++entities;
      EXPECT_GT(r.point_indices.size(), cfg.gamma);
    }
  }
  EXPECT_GT(entities, 0u);
  EXPECT_GE(result.entity_candidates, entities);
}
