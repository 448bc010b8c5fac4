#include "owl3d/association.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "owl3d/geometry.hpp"

namespace owl3d {
namespace {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalpha(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

}  // namespace

const std::vector<std::string>& default_stopwords() {
  static const std::vector<std::string> words = {"a",  "an", "the", "to", "of",    "and",  "with",
                                                 "in", "on", "is",  "are", "there", "room", "empty"};
  return words;
}

EntityWordSet extract_entities(std::string_view text, const Lexicon& lexicon) {
  const auto tokens = tokenize(text);
  std::vector<std::vector<std::string>> phrases;
  for (const auto& p : lexicon.phrases) {
    auto t = tokenize(p);
    if (t.size() >= 2) phrases.push_back(std::move(t));
  }
  std::stable_sort(phrases.begin(), phrases.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  const std::unordered_set<std::string> stop(lexicon.stopwords.begin(), lexicon.stopwords.end());

  EntityWordSet out;
  for (std::size_t i = 0; i < tokens.size();) {
    bool matched = false;
    for (const auto& phrase : phrases) {
      if (i + phrase.size() <= tokens.size() &&
          std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
        out.words.insert(join(phrase, '_'));
        i += phrase.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (!stop.count(tokens[i])) out.words.insert(tokens[i]);
    ++i;
  }
  return out;
}

std::string join_words(const std::set<std::string>& words) {
  return join(std::vector<std::string>(words.begin(), words.end()), ' ');
}

CaptionRecord associate_scene(std::size_t num_points, std::span<const CameraFrame> frames,
                              const std::optional<std::string>& precomputed_caption,
                              const Lexicon& lexicon) {
  CaptionRecord rec;
  rec.level = CaptionLevel::kScene;
  if (precomputed_caption) {
    rec.text = *precomputed_caption;
  } else {
    require(!frames.empty(), "scene caption needs at least one frame or a precomputed caption");
    std::set<std::string> words;
    for (const auto& f : frames) {
      auto w = extract_entities(f.caption, lexicon).words;
      words.insert(w.begin(), w.end());
    }
    rec.text = join_words(words);
  }
  rec.point_indices.resize(num_points);
  for (std::size_t i = 0; i < num_points; ++i) rec.point_indices[i] = static_cast<Index>(i);
  for (const auto& f : frames) rec.source_frames.push_back(f.id);
  std::sort(rec.source_frames.begin(), rec.source_frames.end());
  return rec;
}

std::optional<CaptionRecord> associate_view(const ScenePointCloud& scene, const CameraFrame& frame,
                                            const PipelineConfig& cfg) {
  if (frame.caption.empty()) return std::nullopt;
  const auto lifted = backproject(frame, cfg.stride);
  auto indices = frustum_overlap(scene, lifted, cfg);
  if (indices.empty()) return std::nullopt;
  CaptionRecord rec;
  rec.level = CaptionLevel::kView;
  rec.text = frame.caption;
  rec.point_indices = std::move(indices);
  rec.source_frames = {frame.id};
  return rec;
}

std::vector<EntityCandidate> entity_pairs(const CaptionRecord& rec_i, const CaptionRecord& rec_j,
                                          const Lexicon& lexicon) {
  require(rec_i.scene == rec_j.scene, "entity pairs need records from the same scene, got `" +
                                          rec_i.scene + "` and `" + rec_j.scene + "`");
  const auto wi = extract_entities(rec_i.text, lexicon).words;
  const auto wj = extract_entities(rec_j.text, lexicon).words;

  auto word_diff = [](const std::set<std::string>& a, const std::set<std::string>& b) {
    std::set<std::string> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
    return out;
  };
  std::set<std::string> w_common;
  std::set_intersection(wi.begin(), wi.end(), wj.begin(), wj.end(),
                        std::inserter(w_common, w_common.end()));

  std::vector<std::uint32_t> frames;
  std::set_union(rec_i.source_frames.begin(), rec_i.source_frames.end(),
                 rec_j.source_frames.begin(), rec_j.source_frames.end(), std::back_inserter(frames));

  const std::pair<IndexSet, std::set<std::string>> parts[] = {
      {set_difference(rec_i.point_indices, rec_j.point_indices), word_diff(wi, wj)},
      {set_difference(rec_j.point_indices, rec_i.point_indices), word_diff(wj, wi)},
      {set_intersection(rec_i.point_indices, rec_j.point_indices), w_common}};

  std::vector<EntityCandidate> out;
  for (const auto& [indices, words] : parts) {
    if (indices.empty() || words.empty()) continue;
    EntityCandidate c;
    c.record.level = CaptionLevel::kEntity;
    c.record.text = join_words(words);
    c.record.point_indices = indices;
    c.record.source_frames = frames;
    c.record.scene = rec_i.scene;
    c.parent_size_i = rec_i.point_indices.size();
    c.parent_size_j = rec_j.point_indices.size();
    out.push_back(std::move(c));
  }
  return out;
}

bool entity_passes_filter(const EntityCandidate& c, const PipelineConfig& cfg) {
  const auto size = c.record.point_indices.size();
  const double cap = cfg.delta * static_cast<double>(std::min(c.parent_size_i, c.parent_size_j));
  return size > cfg.gamma && static_cast<double>(size) < cap && !c.record.text.empty();
}

std::vector<EntityCandidate> filter_entity_pairs(std::span<const EntityCandidate> candidates,
                                                 const PipelineConfig& cfg) {
  std::vector<EntityCandidate> out;
  for (const auto& c : candidates) {
    if (entity_passes_filter(c, cfg)) out.push_back(c);
  }
  return out;
}

double jaccard(std::span<const Index> a, std::span<const Index> b) {
  const std::size_t inter = intersection_size(a, b);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::pair<std::size_t, std::size_t>> adjacent_view_pairs(
    std::span<const CaptionRecord> views, const PipelineConfig& cfg) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const std::size_t last = cfg.all_view_pairs ? views.size() : std::min(views.size(), i + 2);
    for (std::size_t j = i + 1; j < last; ++j) {
      if (jaccard(views[i].point_indices, views[j].point_indices) >= cfg.min_view_jaccard) {
        pairs.emplace_back(i, j);
      }
    }
  }
  return pairs;
}

std::map<CaptionLevel, LevelStats> association_stats(std::span<const CaptionRecord> records) {
  std::map<CaptionLevel, std::pair<std::size_t, double>> acc;
  for (const auto& r : records) {
    auto& [count, points] = acc[r.level];
    ++count;
    points += static_cast<double>(r.point_indices.size());
  }
  std::map<CaptionLevel, LevelStats> out;
  for (const auto& [level, a] : acc) {
    out[level] = LevelStats{a.first, a.second / static_cast<double>(a.first)};
  }
  return out;
}

LevelSelection parse_levels(std::string_view csv) {
  LevelSelection sel{false, false, false};
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto end = std::min(csv.find(',', start), csv.size());
    const auto token = csv.substr(start, end - start);
    if (!token.empty()) {
      switch (parse_caption_level(token)) {
        case CaptionLevel::kScene:
          sel.scene = true;
          break;
        case CaptionLevel::kView:
          sel.view = true;
          break;
        case CaptionLevel::kEntity:
          sel.entity = true;
          break;
      }
    }
    start = end + 1;
  }
  return sel;
}

AssociationResult associate_bundle(const SceneBundle& bundle, const PipelineConfig& cfg,
                                   const LevelSelection& levels, const Lexicon& lexicon) {
  AssociationResult result;
  const auto& cloud = bundle.cloud;

  if (levels.scene && (!bundle.frames.empty() || bundle.scene_caption)) {
    auto rec = associate_scene(cloud.size(), bundle.frames, bundle.scene_caption, lexicon);
    rec.scene = bundle.name;
    if (!rec.text.empty() && !rec.point_indices.empty()) result.records.push_back(std::move(rec));
  }
  if (!levels.view && !levels.entity) return result;

  const auto& frames = bundle.frames;
  std::vector<std::optional<CaptionRecord>> maybe(frames.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t k = 0; k < frames.size(); ++k) {
    maybe[k] = associate_view(cloud, frames[k], cfg);
  }

  std::vector<CaptionRecord> views;
  for (auto& m : maybe) {
    if (!m) {
      ++result.dropped_views;
      continue;
    }
    m->scene = bundle.name;
    views.push_back(std::move(*m));
  }

  std::vector<CaptionRecord> entities;
  if (levels.entity) {
    const auto pairs = adjacent_view_pairs(views, cfg);
    std::vector<std::vector<EntityCandidate>> per_pair(pairs.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      per_pair[p] = entity_pairs(views[pairs[p].first], views[pairs[p].second], lexicon);
    }
    for (const auto& candidates : per_pair) {
      result.entity_candidates += candidates.size();
      for (auto& c : filter_entity_pairs(candidates, cfg)) entities.push_back(std::move(c.record));
    }
  }

  if (levels.view) {
    for (auto& v : views) result.records.push_back(std::move(v));
  }
  for (auto& e : entities) result.records.push_back(std::move(e));
  return result;
}

}  // namespace owl3d
