#pragma once

// On-disk formats.
//
// A scene bundle is a directory holding `manifest.json` plus raw little-endian arrays:
// `points.f32` (N x 3), optional `colors.f32`, `sem_labels.u32`, `inst_labels.u32`,
// `unlabeled_mask.u32`, ground-truth / prediction channels, and one `depth_<id>.f32`
// (H x W) per frame. Caption records are line-delimited JSON objects with the fields
// `level`, `text`, `point_indices`, `source_frames` (and `scene` when named).

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "owl3d/scene.hpp"

namespace owl3d {

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kBundleFormat = "owl3d-scene-bundle";
inline constexpr int kBundleVersion = 1;

std::vector<float> read_f32(const std::filesystem::path& path, std::size_t expected_count,
                            const std::string& field);
std::vector<std::uint32_t> read_u32(const std::filesystem::path& path, std::size_t expected_count,
                                    const std::string& field);
/// Reads an f32 file whose element count is not known beforehand.
std::vector<float> read_f32_any(const std::filesystem::path& path, const std::string& field);
std::vector<std::uint32_t> read_u32_any(const std::filesystem::path& path, const std::string& field);

void write_f32(const std::filesystem::path& path, std::span<const float> values);
void write_u32(const std::filesystem::path& path, std::span<const std::uint32_t> values);

std::vector<Vec3f> unpack_vec3(std::span<const float> flat);
std::vector<float> pack_vec3(std::span<const Vec3f> points);

/// Writes the bundle (validated first) into `dir`, creating it if needed.
void save_scene(const SceneBundle& bundle, const std::filesystem::path& dir);

/// Loads and validates a bundle. Frames come back sorted by id.
SceneBundle load_scene(const std::filesystem::path& dir);

/// True when `dir` contains a manifest.
bool is_scene_bundle(const std::filesystem::path& dir);

/// `dir` itself when it is a bundle, otherwise its bundle subdirectories in name order.
std::vector<std::filesystem::path> expand_bundles(const std::filesystem::path& dir);

nlohmann::json caption_record_to_json(const CaptionRecord& record);
CaptionRecord caption_record_from_json(const nlohmann::json& j);

/// Validates every record, then writes one JSON object per line.
void save_caption_records(std::span<const CaptionRecord> records,
                          const std::filesystem::path& path);
std::vector<CaptionRecord> load_caption_records(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const PipelineConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, PipelineConfig& cfg);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace owl3d
