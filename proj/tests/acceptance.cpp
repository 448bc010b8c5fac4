// Acceptance gate. Each criterion prints one PASS/FAIL line with its measured values; the
// process exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "owl3d/association.hpp"
#include "owl3d/calibration.hpp"
#include "owl3d/geometry.hpp"
#include "owl3d/instance.hpp"
#include "owl3d/metrics.hpp"
#include "owl3d/objective.hpp"
#include "owl3d/synth.hpp"

namespace fs = std::filesystem;
using namespace owl3d;

namespace {

// Pinned tolerances and budgets.
constexpr double kHarmonicTol = 0.15;
constexpr int kHarmonicMinRows = 5;
constexpr double kAc1Seconds = 1.0;
constexpr double kGradTol = 1e-4;
constexpr int kGradTrials = 100;
constexpr double kAc2Seconds = 5.0;
constexpr int kAc3Scenes = 50;
constexpr double kAc3Seconds = 60.0;
constexpr int kAc4Pairs = 1000;
constexpr int kAc5Instances = 200;
constexpr double kCentroidTol = 1e-12;
constexpr double kAc6MinFraction = 0.95;
constexpr double kPqIdentityTol = 1e-9;
constexpr int kAc7PanopticInstances = 100;
constexpr int kAc8Rows = 10000;
constexpr double kRowSumTol = 1e-9;
constexpr int kAc9Scenes = 50;
constexpr int kAc10Scenes = 20;
constexpr int kAc10PointsPerScene = 100000;
constexpr double kAc10Seconds = 120.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ------------------------------------------------------------------ AC1

Outcome ac1_harmonic() {
  struct Row {
    const char* table;
    double base, novel, reported;
  };
  // Reported base mean, novel mean and harmonic mean. The first three rows are required.
  const Row rows[] = {
      {"semantic ScanNet B15/N4", 68.3, 62.4, 65.3},
      {"instance ScanNet B13/N4", 58.6, 59.6, 59.1},
      {"panoptic nuScenes B12/N3", 49.6, 38.6, 43.4},
      {"semantic", 69.5, 45.9, 55.3},
      {"semantic", 76.2, 40.8, 53.1},
      {"instance", 55.5, 31.2, 40.0},
      {"instance", 63.5, 38.1, 47.6},
      {"instance", 58.1, 42.9, 49.4},
      {"panoptic", 77.3, 83.1, 80.1},
  };
  const auto t0 = std::chrono::steady_clock::now();
  int ok = 0;
  double worst = 0.0;
  bool required = true;
  for (std::size_t k = 0; k < std::size(rows); ++k) {
    const double err = std::abs(harmonic(rows[k].base, rows[k].novel) - rows[k].reported);
    worst = std::max(worst, err);
    if (err <= kHarmonicTol) ++ok;
    else if (k < 3) required = false;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = ok >= kHarmonicMinRows && required && secs < kAc1Seconds;
  o.detail = std::to_string(ok) + "/" + std::to_string(std::size(rows)) + " rows within 0.15, worst " +
             fmt("%.3f", worst) + ", " + fmt("%.4f", secs) + " s";
  return o;
}

// ------------------------------------------------------------------ AC2

Outcome ac2_gradcheck() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_gradcheck(kGradTrials, 2024, 1e-5, kGradTol);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = r.passed && r.max_rel_error < kGradTol && r.trials == kGradTrials && secs < kAc2Seconds;
  o.detail = std::to_string(r.trials) + " trials, max rel error " + fmt("%.3e", r.max_rel_error) + ", " +
             fmt("%.3f", secs) + " s";
  return o;
}

// ------------------------------------------------------------------ AC3

// Scene k of n gets a total point count swept linearly over [1000, 50000].
SynthSpec association_spec(std::mt19937_64& rng, int k, int n) {
  SynthSpec s;
  s.seed = 1000 + static_cast<std::uint64_t>(k);
  std::uniform_int_distribution<int> frames(4, 10);
  std::uniform_int_distribution<int> per_class(1, 2);
  s.frames = frames(rng);
  s.instances_per_class = {per_class(rng)};
  const int instances = s.instances_per_class[0] * static_cast<int>(s.classes.size());
  s.points_per_instance = std::max(1, (1000 + 49000 * k / (n - 1)) / instances);
  s.image_width = 64;
  s.image_height = 48;
  return s;
}

Outcome ac3_association() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(303);
  std::size_t views = 0, mismatches = 0, min_pts = SIZE_MAX, max_pts = 0;
  for (int k = 0; k < kAc3Scenes; ++k) {
    const SynthSpec spec = association_spec(rng, k, kAc3Scenes);
    const SceneBundle b = make_bundle(spec, "ac3");
    min_pts = std::min(min_pts, b.cloud.size());
    max_pts = std::max(max_pts, b.cloud.size());
    PipelineConfig cfg;
    cfg.voxel_size = k % 2 ? 0.05 : 0.04;
    cfg.nn_radius = 2.0 * cfg.voxel_size;
    for (const auto& f : b.frames) {
      const auto rec = associate_view(b.cloud, f, cfg);
      const IndexSet expect =
          oracle::frustum_overlap(b.cloud.points, oracle::backproject(f, 1), cfg.voxel_size, cfg.nn_radius);
      const IndexSet got = rec ? rec->point_indices : IndexSet{};
      ++views;
      if (got != expect) ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = mismatches == 0 && secs < kAc3Seconds;
  o.detail = std::to_string(kAc3Scenes) + " scenes (" + std::to_string(min_pts) + "-" + std::to_string(max_pts) +
             " points), " + std::to_string(views) + " views, " + std::to_string(mismatches) + " mismatches, " +
             fmt("%.1f", secs) + " s";
  return o;
}

// ------------------------------------------------------------------ AC4

bool direct_eq14(const EntityCandidate& c, const PipelineConfig& cfg) {
  const double n = static_cast<double>(c.record.point_indices.size());
  const double parent = static_cast<double>(std::min(c.parent_size_i, c.parent_size_j));
  return static_cast<double>(cfg.gamma) < n && n < cfg.delta * parent && !c.record.text.empty();
}

Outcome ac4_entity_partition() {
  std::mt19937_64 rng(404);
  int pairs = 0, partition_failures = 0, filter_failures = 0;
  std::size_t records = 0, kept = 0;
  PipelineConfig strict;
  PipelineConfig loose;
  loose.gamma = 10;
  loose.delta = 0.6;
  loose.all_view_pairs = true;
  loose.min_view_jaccard = 0.0;

  auto check_pair = [&](const CaptionRecord& a, const CaptionRecord& b) {
    ++pairs;
    const auto cands = entity_pairs(a, b);
    // Classify every point of the union by membership in a and b.
    const std::set<Index> in_a(a.point_indices.begin(), a.point_indices.end());
    const std::set<Index> in_b(b.point_indices.begin(), b.point_indices.end());
    std::set<Index> uni(in_a);
    uni.insert(in_b.begin(), in_b.end());
    IndexSet expect[3];
    for (Index i : uni) expect[in_a.count(i) && in_b.count(i) ? 2 : in_a.count(i) ? 0 : 1].push_back(i);
    bool ok = true;
    std::set<Index> emitted;
    for (const auto& c : cands) {
      ok = ok && (c.record.point_indices == expect[0] || c.record.point_indices == expect[1] ||
                  c.record.point_indices == expect[2]);
      for (Index i : c.record.point_indices) ok = ok && emitted.insert(i).second;
    }
    // Records are omitted only when their points or their text are empty.
    const auto wa = extract_entities(a.text).words;
    const auto wb = extract_entities(b.text).words;
    std::size_t expected_records = 0;
    for (int part = 0; part < 3; ++part) {
      std::size_t words = 0;
      for (const auto& w : part == 1 ? wb : wa) {
        const bool other = (part == 1 ? wa : wb).count(w) > 0;
        words += part == 2 ? other : !other;
      }
      expected_records += !expect[part].empty() && words > 0;
    }
    ok = ok && cands.size() == expected_records;
    std::size_t covered = 0;
    for (const auto& e : expect) covered += e.size();
    ok = ok && covered == uni.size();
    if (!ok) ++partition_failures;
    for (const PipelineConfig* cfg : {&strict, &loose}) {
      const auto filtered = filter_entity_pairs(cands, *cfg);
      std::vector<EntityCandidate> expect_kept;
      for (const auto& c : cands) {
        if (direct_eq14(c, *cfg)) expect_kept.push_back(c);
      }
      if (filtered != expect_kept) ++filter_failures;
      records += cands.size();
      kept += filtered.size();
    }
  };

  // Adjacent views from rendered synthetic scenes.
  for (std::uint64_t seed = 0; pairs < kAc4Pairs / 2; ++seed) {
    SynthSpec spec;
    spec.seed = 4000 + seed;
    spec.points_per_instance = 150;
    spec.image_width = 64;
    spec.image_height = 48;
    const SceneBundle b = make_bundle(spec, "ac4");
    std::vector<CaptionRecord> views;
    for (const auto& f : b.frames) {
      if (auto v = associate_view(b.cloud, f, strict)) views.push_back(*v);
    }
    for (const auto& [i, j] : adjacent_view_pairs(views, loose)) {
      if (pairs >= kAc4Pairs / 2) break;
      check_pair(views[i], views[j]);
    }
  }
  // Random overlapping index sets with random captions.
  const std::vector<std::string> vocab{"chair", "table", "sofa", "lamp", "bed", "desk", "shelf"};
  while (pairs < kAc4Pairs) {
    std::uniform_int_distribution<int> n(200, 3000);
    const int universe = n(rng);
    std::uniform_int_distribution<int> lo(0, universe / 2);
    const int a0 = lo(rng), a1 = a0 + lo(rng) + 1, b0 = lo(rng), b1 = b0 + lo(rng) + 1;
    auto rec = [&](int s, int e) {
      CaptionRecord r;
      r.scene = "random";
      for (int i = s; i < e; ++i) {
        if (rng() % 7) r.point_indices.push_back(static_cast<Index>(i));
      }
      if (r.point_indices.empty()) r.point_indices.push_back(static_cast<Index>(s));
      std::string text = "a room with";
      for (const auto& w : vocab) {
        if (rng() % 2) text += " a " + w + " and";
      }
      r.text = text + " a " + vocab[rng() % vocab.size()];
      return r;
    };
    check_pair(rec(a0, a1), rec(b0, b1));
  }
  Outcome o;
  o.pass = partition_failures == 0 && filter_failures == 0 && pairs == kAc4Pairs;
  o.detail = std::to_string(pairs) + " pairs, " + std::to_string(partition_failures) + " partition failures, " +
             std::to_string(filter_failures) + " filter mismatches (" + std::to_string(kept) + "/" +
             std::to_string(records) + " records kept over two configs)";
  return o;
}

// ------------------------------------------------------------------ AC5

std::vector<Vec3d> random_blobs(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nblobs(1, 8);
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  std::uniform_real_distribution<double> spread(0.005, 0.05);
  const int k = nblobs(rng);
  std::vector<Vec3d> centers;
  std::vector<double> sigmas;
  for (int b = 0; b < k; ++b) {
    centers.emplace_back(pos(rng), pos(rng), pos(rng));
    sigmas.push_back(spread(rng));
  }
  std::normal_distribution<double> normal;
  std::vector<Vec3d> pts(n);
  for (auto& p : pts) {
    if (rng() % 10 == 0) {
      p = Vec3d(pos(rng), pos(rng), pos(rng));
    } else {
      const std::size_t b = rng() % static_cast<std::size_t>(k);
      p = centers[b] + sigmas[b] * Vec3d(normal(rng), normal(rng), normal(rng));
    }
  }
  return pts;
}

Outcome ac5_grouping() {
  std::mt19937_64 rng(505);
  int base_fail = 0, novel_fail = 0, centroid_fail = 0;
  std::size_t proposals = 0;
  double worst = 0.0;
  for (int t = 0; t < kAc5Instances; ++t) {
    std::uniform_int_distribution<std::size_t> npts(50, 2000);
    const std::size_t n = npts(rng);
    const auto pts = random_blobs(n, rng);
    PipelineConfig cfg;
    cfg.grouping_radius = std::uniform_real_distribution<double>(0.01, 0.06)(rng);
    cfg.min_proposal_points = std::uniform_int_distribution<std::size_t>(1, 30)(rng);
    cfg.tau_soft = std::uniform_real_distribution<double>(0.05, 0.5)(rng);

    const std::size_t k = 1 + rng() % 5;
    ScoreMatrix scores(n, k, k);
    scores.distribution = true;
    std::exponential_distribution<double> ex(1.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) s += scores(i, c) = ex(rng);
      for (std::size_t c = 0; c < k; ++c) scores(i, c) /= s;
    }
    const auto base = group_base(pts, scores, cfg);
    std::vector<Proposal> expect_base;
    for (std::size_t c = 0; c < k; ++c) {
      IndexSet cand;
      for (std::size_t i = 0; i < n; ++i) {
        if (scores(i, c) >= cfg.tau_soft) cand.push_back(static_cast<Index>(i));
      }
      for (auto& comp : oracle::components(pts, cand, cfg.grouping_radius, cfg.min_proposal_points)) {
        Proposal p;
        p.point_indices = comp;
        p.class_hint = static_cast<std::uint32_t>(c);
        expect_base.push_back(p);
      }
    }
    bool ok = base.size() == expect_base.size();
    for (std::size_t q = 0; ok && q < base.size(); ++q) {
      ok = base[q].point_indices == expect_base[q].point_indices && base[q].class_hint == expect_base[q].class_hint;
    }
    if (!ok) ++base_fail;

    std::vector<std::uint8_t> mask(n);
    const unsigned keep = 1 + static_cast<unsigned>(rng() % 4);
    for (auto& m : mask) m = rng() % 4 < keep;
    const auto novel = group_novel(pts, mask, cfg);
    IndexSet cand;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i]) cand.push_back(static_cast<Index>(i));
    }
    const auto expect_novel = oracle::components(pts, cand, cfg.grouping_radius, cfg.min_proposal_points);
    ok = novel.size() == expect_novel.size();
    for (std::size_t q = 0; ok && q < novel.size(); ++q) ok = novel[q].point_indices == expect_novel[q];
    if (!ok) ++novel_fail;

    std::vector<Vec3f> ptsf(n);
    for (std::size_t i = 0; i < n; ++i) ptsf[i] = pts[i].cast<float>();
    std::vector<float> z(n);
    for (auto& v : z) v = static_cast<float>(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    ProposalSet scored = novel;
    attach_confidences(scored, z);
    PipelineConfig fcfg = cfg;
    fcfg.min_proposal_points = 1;
    const auto pseudo = pseudo_offsets(score_filter(scored, fcfg), ptsf);
    for (const auto& p : pseudo.proposals) {
      ++proposals;
      const Vec3d c = oracle::centroid(ptsf, p.point_indices);
      for (Index i : p.point_indices) {
        const double err = (ptsf[i].cast<double>() + pseudo.labels.offsets[i] - c).cwiseAbs().maxCoeff();
        worst = std::max(worst, err);
        if (err > kCentroidTol) ++centroid_fail;
      }
    }
  }
  Outcome o;
  o.pass = base_fail == 0 && novel_fail == 0 && centroid_fail == 0;
  o.detail = std::to_string(kAc5Instances) + " instances, base mismatches " + std::to_string(base_fail) +
             ", novel mismatches " + std::to_string(novel_fail) + ", " + std::to_string(proposals) +
             " pseudo proposals, worst |p+label-centroid| " + fmt("%.2e", worst);
  return o;
}

// ------------------------------------------------------------------ AC6

Outcome ac6_dil_recovery() {
  std::size_t recovered = 0, close = 0, scenes = 0;
  PipelineConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthSpec spec;
    spec.seed = 6000 + seed;
    spec.offset_noise_sigma = cfg.grouping_radius / 4.0;
    spec.confidence_radius = cfg.grouping_radius;
    spec.min_center_separation = 4.0 * cfg.grouping_radius;
    spec.frames = 1;
    const GeneratedScene g = gen_scene(spec);
    const SceneBundle b = make_bundle(spec, "ac6");
    ++scenes;
    std::vector<Vec3d> off(b.cloud.size());
    for (std::size_t i = 0; i < off.size(); ++i) off[i] = b.pred_offsets[i].cast<double>();
    const auto shifted = shift_points(b.cloud.points, OffsetField::dense(off));
    ProposalSet props = group_novel(shifted, novel_mask(b.cloud, cfg), cfg);
    attach_confidences(props, b.confidences);
    const auto pseudo = pseudo_offsets(score_filter(props, cfg), b.cloud.points);
    for (const auto& p : pseudo.proposals) {
      ++recovered;
      double best = 1e300;
      for (std::size_t inst = 0; inst < g.centroids.size(); ++inst) {
        if (!std::count(g.novel_classes.begin(), g.novel_classes.end(), g.instance_class[inst])) continue;
        best = std::min(best, (*p.center - g.centroids[inst]).norm());
      }
      if (best <= cfg.grouping_radius / 2.0) ++close;
    }
  }
  const double frac = recovered ? static_cast<double>(close) / static_cast<double>(recovered) : 0.0;
  Outcome o;
  o.pass = recovered > 0 && frac >= kAc6MinFraction;
  o.detail = std::to_string(scenes) + " scenes, " + std::to_string(close) + "/" + std::to_string(recovered) +
             " proposals within r/2 (" + fmt("%.3f", frac) + ")";
  return o;
}

// ------------------------------------------------------------------ AC7

std::vector<Segment> random_partition(std::size_t n, std::uint32_t classes, std::mt19937_64& rng) {
  std::vector<Segment> segs;
  std::vector<std::uint32_t> owner(n);
  const std::size_t k = 1 + rng() % 6;
  for (auto& o : owner) o = static_cast<std::uint32_t>(rng() % (k + 1));
  for (std::size_t s = 0; s < k; ++s) {
    Segment seg;
    seg.class_id = static_cast<std::uint32_t>(rng() % classes);
    for (std::size_t i = 0; i < n; ++i) {
      if (owner[i] == s) seg.point_indices.push_back(static_cast<Index>(i));
    }
    if (!seg.point_indices.empty()) segs.push_back(seg);
  }
  return segs;
}

Outcome ac7_metrics() {
  std::mt19937_64 rng(707);
  int identity_fail = 0, pano_oracle_fail = 0, perfect_fail = 0, ap_fail = 0;
  double worst = 0.0;
  const ClassSets sets{{0, 1}, {2}};
  for (int t = 0; t < kAc7PanopticInstances; ++t) {
    const std::size_t n = 20 + rng() % 200;
    const auto gt = random_partition(n, 3, rng);
    // Predictions: perturbed copies of gt plus random extra segments.
    std::vector<Segment> pred = random_partition(n, 3, rng);
    if (t % 2) {
      pred = gt;
      for (auto& s : pred) {
        s.point_indices.resize(s.point_indices.size() - (rng() % (s.point_indices.size() / 2 + 1)));
        if (rng() % 4 == 0) s.class_id = static_cast<std::uint32_t>(rng() % 3);
      }
      pred.erase(std::remove_if(pred.begin(), pred.end(), [](const Segment& s) { return s.point_indices.empty(); }),
                 pred.end());
    }
    const auto r = panoptic_quality(pred, gt, sets);
    for (const auto& [c, pc] : r.per_class) {
      const double e = std::abs(pc.pq - pc.sq * pc.rq);
      worst = std::max(worst, e);
      if (e > kPqIdentityTol) ++identity_fail;
      const auto b = oracle::brute_panoptic(pred, gt, c);
      const double denom = b.tp + 0.5 * b.fp + 0.5 * b.fn;
      if (b.tp != pc.tp || b.fp != pc.fp || b.fn != pc.fn || std::abs(b.iou_sum / denom - pc.pq) > 1e-12) {
        ++pano_oracle_fail;
      }
    }
    const auto perfect = panoptic_quality(gt, gt, sets);
    for (const auto& [c, pc] : perfect.per_class) {
      if (pc.pq != 1.0 || pc.sq != 1.0 || pc.rq != 1.0) ++perfect_fail;
    }
    const auto ip = instance_ap(gt, gt, sets);
    for (const auto& [c, v] : ip.ap50) {
      if (v != 1.0 || ip.ar50.at(c) != 1.0) ++perfect_fail;
    }
    const auto sem_labels = [&] {
      std::vector<std::uint32_t> l(n, kIgnoreClass);
      for (const auto& s : gt) {
        for (Index i : s.point_indices) l[i] = s.class_id;
      }
      return l;
    }();
    const auto sr = semantic_miou(sem_labels, sem_labels, sets);
    for (const auto& [c, v] : sr.iou) {
      if (v != 1.0) ++perfect_fail;
    }
  }

  // Exhaustive small AP instances over a fixed pool of masks on six points.
  const std::vector<IndexSet> pool{{0, 1, 2, 3}, {0, 1, 2}, {2, 3, 4, 5}, {3, 4, 5}, {0, 1}, {4, 5}};
  const ClassSets one{{0}, {}};
  std::size_t enumerated = 0;
  std::vector<std::size_t> gi, pi;
  std::function<void()> eval = [&] {
    std::vector<Segment> gts, preds;
    for (std::size_t g : gi) gts.push_back({0, pool[g], 1.0});
    for (std::size_t k = 0; k < pi.size(); ++k) {
      // Distinct confidences with a rank order that differs from input order.
      preds.push_back({0, pool[pi[k]], 1.0 - 0.1 * static_cast<double>((k * 3) % 5)});
    }
    ++enumerated;
    const auto brute = oracle::brute_instance_ap(preds, gts);
    const auto r = instance_ap(preds, gts, one);
    const double ap = r.ap50.at(0);
    const bool in_set = std::any_of(brute.consistent_aps.begin(), brute.consistent_aps.end(),
                                    [&](double v) { return std::abs(v - ap) < 1e-12; });
    if (!in_set || std::abs(brute.first - ap) > 1e-12 || std::abs(brute.recall_first - r.ar50.at(0)) > 1e-12) {
      ++ap_fail;
    }
  };
  std::function<void(std::size_t)> rec_pred = [&](std::size_t left) {
    eval();
    if (left == 0) return;
    for (std::size_t m = 0; m < pool.size(); ++m) {
      pi.push_back(m);
      rec_pred(left - 1);
      pi.pop_back();
    }
  };
  std::function<void(std::size_t)> rec_gt = [&](std::size_t left) {
    if (!gi.empty()) rec_pred(4);
    if (left == 0) return;
    for (std::size_t m = 0; m < pool.size(); ++m) {
      gi.push_back(m);
      rec_gt(left - 1);
      gi.pop_back();
    }
  };
  rec_gt(3);

  Outcome o;
  o.pass = identity_fail == 0 && pano_oracle_fail == 0 && perfect_fail == 0 && ap_fail == 0;
  o.detail = std::to_string(kAc7PanopticInstances) + " panoptic instances (worst |PQ-SQ*RQ| " + fmt("%.1e", worst) +
             ", oracle mismatches " + std::to_string(pano_oracle_fail) + "), perfect-case failures " +
             std::to_string(perfect_fail) + ", AP " + std::to_string(enumerated - static_cast<std::size_t>(ap_fail)) +
             "/" + std::to_string(enumerated) + " enumerated instances match";
  return o;
}

// ------------------------------------------------------------------ AC8

Outcome ac8_calibration() {
  std::mt19937_64 rng(808);
  const std::size_t nb = 7, nn = 5, k = nb + nn;
  ScoreMatrix sb(kAc8Rows, k, nb), sn(kAc8Rows, k, nb);
  sb.distribution = sn.distribution = true;
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> binary(kAc8Rows);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < static_cast<std::size_t>(kAc8Rows); ++i) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t c = 0; c < nb; ++c) s1 += sb(i, c) = ex(rng);
    for (std::size_t c = nb; c < k; ++c) s2 += sn(i, c) = ex(rng);
    for (std::size_t c = 0; c < nb; ++c) sb(i, c) /= s1;
    for (std::size_t c = nb; c < k; ++c) sn(i, c) /= s2;
    binary[i] = unit(rng);
  }
  const auto s = calibrate(sb, sn, binary);
  std::size_t sum_fail = 0, endpoint_fail = 0, mono_fail = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < s.rows; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += s(i, c);
    worst = std::max(worst, std::abs(sum - 1.0));
    if (std::abs(sum - 1.0) > kRowSumTol) ++sum_fail;
  }
  const std::vector<double> zeros(kAc8Rows, 0.0), ones(kAc8Rows, 1.0);
  if (calibrate(sb, sn, zeros).values != sb.values) ++endpoint_fail;
  if (calibrate(sb, sn, ones).values != sn.values) ++endpoint_fail;
  std::vector<double> higher(binary);
  for (auto& v : higher) v = std::min(1.0, v + unit(rng) * (1.0 - v));
  const auto s2 = calibrate(sb, sn, higher);
  for (std::size_t i = 0; i < s.rows; ++i) {
    bool ok = true;
    for (std::size_t c = 0; c < nb; ++c) ok = ok && s2(i, c) <= s(i, c);
    for (std::size_t c = nb; c < k; ++c) ok = ok && s2(i, c) >= s(i, c);
    if (!ok) ++mono_fail;
  }
  Outcome o;
  o.pass = sum_fail == 0 && endpoint_fail == 0 && mono_fail == 0;
  o.detail = std::to_string(kAc8Rows) + " rows, worst |sum-1| " + fmt("%.1e", worst) + ", endpoint failures " +
             std::to_string(endpoint_fail) + ", monotonicity failures " + std::to_string(mono_fail);
  return o;
}

// ------------------------------------------------------------------ AC9

Outcome ac9_corpus_ordering() {
  std::vector<CaptionRecord> corpus;
  PipelineConfig cfg;
  for (int k = 0; k < kAc9Scenes; ++k) {
    SynthSpec spec;
    spec.seed = 9000 + static_cast<std::uint64_t>(k);
    const SceneBundle b = make_bundle(spec, "corpus_" + std::to_string(k));
    auto r = associate_bundle(b, cfg, LevelSelection{});
    for (auto& rec : r.records) corpus.push_back(std::move(rec));
  }
  const auto stats = association_stats(corpus);
  auto mean = [&](CaptionLevel l) {
    auto it = stats.find(l);
    return it == stats.end() ? -1.0 : it->second.mean_points;
  };
  auto count = [&](CaptionLevel l) {
    auto it = stats.find(l);
    return it == stats.end() ? std::size_t{0} : it->second.captions;
  };
  const double e = mean(CaptionLevel::kEntity), v = mean(CaptionLevel::kView), s = mean(CaptionLevel::kScene);
  Outcome o;
  o.pass = count(CaptionLevel::kEntity) > 0 && e < v && v < s;
  o.detail = "mean points per caption entity " + fmt("%.1f", e) + " (" + std::to_string(count(CaptionLevel::kEntity)) +
             ") < view " + fmt("%.1f", v) + " (" + std::to_string(count(CaptionLevel::kView)) + ") < scene " +
             fmt("%.1f", s) + " (" + std::to_string(count(CaptionLevel::kScene)) + ")";
  return o;
}

// ------------------------------------------------------------------ AC10

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return files;
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::cerr << "  cli failed (" << code << "): " << err.str();
  return code;
}

double run_pipeline(const fs::path& dir, int jobs, bool& ok) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  // Relative paths only, so the echoed run configs of both runs are comparable.
  const fs::path previous = fs::current_path();
  fs::current_path(dir);
  const std::string j = std::to_string(jobs);
  const auto t0 = std::chrono::steady_clock::now();
  ok = cli({"--jobs", j, "synth", "--spec", "../spec.json", "--out", "scenes", "--scenes",
            std::to_string(kAc10Scenes)}) == 0 &&
       cli({"--jobs", j, "associate", "--bundle", "scenes", "--out", "out/pairs.jsonl"}) == 0 &&
       cli({"--jobs", j, "pseudo-label", "--bundle", "scenes", "--out", "out/pseudo.jsonl"}) == 0 &&
       cli({"--jobs", j, "--out-dir", "out", "metrics", "--task", "inst", "--agnostic", "--gt-novel-only", "--pred",
            "out/pseudo.jsonl", "--gt", "scenes", "--out", "metrics.json"}) == 0;
  const double secs = seconds_since(t0);
  fs::current_path(previous);
  return secs;
}

Outcome ac10_scale_determinism() {
  const fs::path root = fs::temp_directory_path() / "owl3d_acceptance_ac10";
  fs::remove_all(root);
  fs::create_directories(root);
  SynthSpec spec;
  spec.seed = 10000;
  spec.points_per_instance = kAc10PointsPerScene / (2 * static_cast<int>(spec.classes.size()));
  nlohmann::json j;
  to_json(j, spec);
  std::ofstream(root / "spec.json") << j.dump(2);

  bool ok1 = false, ok8 = false;
  const double t1 = run_pipeline(root / "jobs1", 1, ok1);
  const double t8 = run_pipeline(root / "jobs8", 8, ok8);
  auto a = read_tree(root / "jobs1");
  auto b = read_tree(root / "jobs8");
  // run_config.json records the job count itself; compare it with that field removed.
  std::size_t configs = 0;
  bool config_same = true;
  for (auto* tree : {&a, &b}) {
    for (auto& [name, text] : *tree) {
      if (fs::path(name).filename() != "run_config.json") continue;
      auto cfg = nlohmann::json::parse(text);
      cfg.erase("jobs");
      text = cfg.dump();
      ++configs;
    }
  }
  config_same = configs > 0;
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second != bytes) ++differing;
  }
  differing += b.size() > a.size() ? b.size() - a.size() : 0;
  std::size_t bytes = 0;
  for (const auto& [name, data] : a) bytes += data.size();
  fs::remove_all(root);
  Outcome o;
  o.pass = ok1 && ok8 && config_same && differing == 0 && a.size() > 0 && t1 < kAc10Seconds && t8 < kAc10Seconds;
  o.detail = std::to_string(kAc10Scenes) + " scenes x " + std::to_string(kAc10PointsPerScene) + " points: jobs=1 " +
             fmt("%.1f", t1) + " s, jobs=8 " + fmt("%.1f", t8) + " s, " + std::to_string(a.size()) + " files (" +
             fmt("%.1f", static_cast<double>(bytes) / 1e6) + " MB), " + std::to_string(differing) + " differ";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    const char* id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"AC1", "harmonic fixtures", ac1_harmonic},
      {"AC2", "gradient check", ac2_gradcheck},
      {"AC3", "association oracle", ac3_association},
      {"AC4", "entity partition and filtering", ac4_entity_partition},
      {"AC5", "grouping oracle", ac5_grouping},
      {"AC6", "DIL recovery", ac6_dil_recovery},
      {"AC7", "metric identities", ac7_metrics},
      {"AC8", "calibration", ac8_calibration},
      {"AC9", "corpus statistics ordering", ac9_corpus_ordering},
      {"AC10", "scale and determinism", ac10_scale_determinism},
  };
  const std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.id << " " << c.name << ": " << o.detail << std::endl;
  }
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criteria failed" : "acceptance: all criteria passed")
            << std::endl;
  return failed ? 1 : 0;
}
