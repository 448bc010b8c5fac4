#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "owl3d/scene.hpp"

namespace owl3d {

/// Entity words of one caption. Ordered set, so iteration is alphabetical.
struct EntityWordSet {
  std::set<std::string> words;
  std::uint32_t origin_frame = 0;
};

/// {a, an, the, to, of, and, with, in, on, is, are, there, room, empty}
const std::vector<std::string>& default_stopwords();

/// Tokenization settings for entity extraction.
struct Lexicon {
  /// Multi-word entities ("shower curtain"), matched longest-first and emitted joined by '_'.
  std::vector<std::string> phrases;
  std::vector<std::string> stopwords = default_stopwords();
};

/// Lowercases, splits on non-alphabetic characters, merges lexicon phrases, drops stopwords.
EntityWordSet extract_entities(std::string_view text, const Lexicon& lexicon = {});

/// Space-joined words in alphabetical order.
std::string join_words(const std::set<std::string>& words);

/// Scene-level record covering every point. Without a precomputed caption the text is the
/// sorted union of entity words over all frame captions.
CaptionRecord associate_scene(std::size_t num_points, std::span<const CameraFrame> frames,
                              const std::optional<std::string>& precomputed_caption,
                              const Lexicon& lexicon = {});

/// View-level record for one frame; nullopt when the frustum overlaps no scene point
/// (or the caption is empty).
std::optional<CaptionRecord> associate_view(const ScenePointCloud& scene, const CameraFrame& frame,
                                            const PipelineConfig& cfg);

/// An entity-level record plus the sizes of its two parent view sets.
struct EntityCandidate {
  CaptionRecord record;
  std::size_t parent_size_i = 0;
  std::size_t parent_size_j = 0;

  bool operator==(const EntityCandidate&) const = default;
};

/// Records for (i \ j), (j \ i), (i n j) in that order; ones with empty text or points omitted.
std::vector<EntityCandidate> entity_pairs(const CaptionRecord& rec_i, const CaptionRecord& rec_j,
                                          const Lexicon& lexicon = {});

/// gamma < |p| < delta * min(|p_i|, |p_j|) and non-empty text.
bool entity_passes_filter(const EntityCandidate& candidate, const PipelineConfig& cfg);
std::vector<EntityCandidate> filter_entity_pairs(std::span<const EntityCandidate> candidates,
                                                 const PipelineConfig& cfg);

double jaccard(std::span<const Index> a, std::span<const Index> b);

/// View pairs (positions into `views`) with Jaccard >= cfg.min_view_jaccard: consecutive
/// pairs, or every pair when cfg.all_view_pairs is set. Lexicographic order.
std::vector<std::pair<std::size_t, std::size_t>> adjacent_view_pairs(
    std::span<const CaptionRecord> views, const PipelineConfig& cfg);

struct LevelStats {
  std::size_t captions = 0;
  double mean_points = 0.0;

  bool operator==(const LevelStats&) const = default;
};

std::map<CaptionLevel, LevelStats> association_stats(std::span<const CaptionRecord> records);

struct LevelSelection {
  bool scene = true;
  bool view = true;
  bool entity = true;
};

LevelSelection parse_levels(std::string_view csv);

struct AssociationResult {
  std::vector<CaptionRecord> records;
  std::size_t dropped_views = 0;
  std::size_t entity_candidates = 0;
};

/// Scene, view and filtered entity records for one bundle, in that order.
AssociationResult associate_bundle(const SceneBundle& bundle, const PipelineConfig& cfg,
                                   const LevelSelection& levels, const Lexicon& lexicon = {});

}  // namespace owl3d
