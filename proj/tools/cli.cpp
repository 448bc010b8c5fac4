#include "cli.hpp"

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "owl3d/association.hpp"
#include "owl3d/calibration.hpp"
#include "owl3d/instance.hpp"
#include "owl3d/metrics.hpp"
#include "owl3d/objective.hpp"
#include "owl3d/parallel.hpp"
#include "owl3d/scene_io.hpp"
#include "owl3d/synth.hpp"

namespace owl3d::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

// Runs fn(0..n-1) across the worker pool. Per-item work runs single-threaded inside; the
// first failure in index order is rethrown after the loop.
template <typename Fn>
void parallel_map(std::size_t n, Fn&& fn) {
  if (n == 1) {
    fn(0);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t k = 0; k < n; ++k) {
    try {
      fn(k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void require_file(const std::string& path, const std::string& flag) {
  require(fs::exists(path), flag + ": input `" + path + "` does not exist");
}

struct Globals {
  std::string config_path;
  int jobs = 0;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::string> overrides;

  // Effective values after merging the config file with flags.
  PipelineConfig pipeline;
  bool seed_given = false;

  fs::path output(const std::string& path) const {
    if (out_dir.empty() || fs::path(path).is_absolute()) return path;
    return fs::path(out_dir) / path;
  }
};

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

void resolve_globals(Globals& g, const CLI::App& app) {
  json pipeline = json::object();
  if (!g.config_path.empty()) {
    require_file(g.config_path, "--config");
    const json cfg = read_json_file(g.config_path);
    require(cfg.is_object(), "--config: `" + g.config_path + "` must hold a JSON object");
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
      const std::string& k = it.key();
      try {
        if (k == "pipeline") {
          pipeline = it.value();
        } else if (k == "jobs") {
          if (!app.count("--jobs")) g.jobs = it.value().get<int>();
        } else if (k == "seed") {
          if (!app.count("--seed")) g.seed = it.value().get<std::uint64_t>();
          g.seed_given = true;
        } else if (k == "out_dir") {
          if (!app.count("--out-dir")) g.out_dir = it.value().get<std::string>();
        } else {
          throw ValidationError("--config: unknown key `" + k + "` in " + g.config_path);
        }
      } catch (const json::exception& e) {
        throw ValidationError("--config: bad value for `" + k + "` in " + g.config_path + ": " + e.what());
      }
    }
    require(pipeline.is_object(), "--config: `pipeline` must be an object");
  }
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos && eq > 0, "--set expects key=value, got `" + kv + "`");
    pipeline[kv.substr(0, eq)] = parse_override_value(kv.substr(eq + 1));
  }
  from_json(pipeline, g.pipeline);
  g.pipeline.validate();
  if (app.count("--seed")) g.seed_given = true;
  if (g.jobs == 0) g.jobs = num_threads();
  require(g.jobs >= 1, "--jobs must be >= 1");
  set_num_threads(g.jobs);
}

json option_values(const CLI::App& sub) {
  json j = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_name();
    if (name == "--help" || name.empty()) continue;
    if (opt->count()) {
      const auto& r = opt->results();
      j[name] = r.size() == 1 ? json(r[0]) : json(r);
    } else if (!opt->get_default_str().empty()) {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

void echo_run_config(const Globals& g, const CLI::App& sub, const fs::path& dir) {
  json pipeline;
  to_json(pipeline, g.pipeline);
  json j{{"command", sub.get_name()},
         {"version", OWL3D_VERSION},
         {"jobs", g.jobs},
         {"seed", g.seed},
         {"pipeline", pipeline},
         {"flags", option_values(sub)}};
  if (!g.config_path.empty()) j["config"] = g.config_path;
  if (!dir.empty()) fs::create_directories(dir);
  write_text_file(dir / "run_config.json", j.dump(2) + "\n");
}

fs::path parent_or_cwd(const fs::path& p) {
  return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::vector<SceneBundle> load_bundles(const std::string& path, const std::string& flag) {
  require_file(path, flag);
  const auto dirs = expand_bundles(path);
  require(!dirs.empty(), flag + ": no scene bundles under `" + path + "`");
  std::vector<SceneBundle> bundles(dirs.size());
  parallel_map(dirs.size(), [&](std::size_t k) { bundles[k] = load_scene(dirs[k]); });
  return bundles;
}

std::vector<float> read_f32_checked(const std::string& path, const std::string& flag) {
  require_file(path, flag);
  return read_f32_any(path, flag);
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string spec;
  std::string out;
  int scenes = 1;
};

int cmd_synth(const SynthArgs& a, const Globals& g, const CLI::App& sub, std::ostream& out) {
  SynthSpec spec;
  if (!a.spec.empty()) {
    require_file(a.spec, "--spec");
    from_json(read_json_file(a.spec), spec);
  }
  if (g.seed_given) spec.seed = g.seed;
  require(a.scenes >= 1, "--scenes must be >= 1");
  const fs::path root = g.output(a.out);

  std::vector<std::string> names(static_cast<std::size_t>(a.scenes));
  std::vector<fs::path> dirs(names.size());
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (a.scenes == 1) {
      dirs[k] = root;
      names[k] = fs::absolute(root).lexically_normal().filename().string();
      if (names[k].empty()) names[k] = "scene";
    } else {
      std::ostringstream os;
      os << "scene_" << std::setw(4) << std::setfill('0') << k;
      names[k] = os.str();
      dirs[k] = root / names[k];
    }
  }
  std::vector<std::size_t> sizes(names.size());
  parallel_map(names.size(), [&](std::size_t k) {
    SynthSpec s = spec;
    s.seed = spec.seed + k;
    const SceneBundle b = make_bundle(s, names[k]);
    save_scene(b, dirs[k]);
    sizes[k] = b.cloud.size();
  });
  for (std::size_t k = 0; k < names.size(); ++k) {
    out << "wrote " << dirs[k].string() << " (" << sizes[k] << " points)\n";
  }
  echo_run_config(g, sub, root);
  return kExitOk;
}

// ---------------------------------------------------------------- associate

struct AssociateArgs {
  std::string bundle;
  std::string out;
  std::string levels = "scene,view,entity";
  std::string lexicon;
};

Lexicon load_lexicon(const std::string& path) {
  Lexicon lex;
  if (path.empty()) return lex;
  require_file(path, "--lexicon");
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    lex.phrases.push_back(line.substr(b, e - b + 1));
  }
  return lex;
}

int cmd_associate(const AssociateArgs& a, const Globals& g, const CLI::App& sub, std::ostream& out) {
  const LevelSelection levels = parse_levels(a.levels);
  const Lexicon lexicon = load_lexicon(a.lexicon);
  const auto bundles = load_bundles(a.bundle, "--bundle");
  std::vector<AssociationResult> results(bundles.size());
  parallel_map(bundles.size(), [&](std::size_t k) {
    results[k] = associate_bundle(bundles[k], g.pipeline, levels, lexicon);
  });

  std::vector<CaptionRecord> records;
  std::size_t dropped = 0;
  for (auto& r : results) {
    dropped += r.dropped_views;
    for (auto& rec : r.records) records.push_back(std::move(rec));
  }
  const fs::path path = g.output(a.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_caption_records(records, path);
  out << "scenes " << bundles.size() << ", records " << records.size() << ", dropped views "
      << dropped << "\n";
  echo_run_config(g, sub, g.out_dir.empty() ? parent_or_cwd(path) : fs::path(g.out_dir));
  return kExitOk;
}

// ---------------------------------------------------------------- stats

struct StatsArgs {
  std::string pairs;
  std::string out;
};

int cmd_stats(const StatsArgs& a, const Globals& g, const CLI::App& sub, std::ostream& out) {
  require_file(a.pairs, "--pairs");
  const auto records = load_caption_records(a.pairs);
  const auto stats = association_stats(records);

  out << std::left << std::setw(8) << "level" << std::right << std::setw(10) << "captions"
      << std::setw(16) << "mean_points" << "\n";
  json j = json::object();
  for (const auto& [level, s] : stats) {
    out << std::left << std::setw(8) << to_string(level) << std::right << std::setw(10)
        << s.captions << std::setw(16) << fixed(s.mean_points, 2) << "\n";
    j[std::string(to_string(level))] = {{"captions", s.captions}, {"mean_points", s.mean_points}};
  }
  out << j.dump() << "\n";
  if (!a.out.empty()) {
    const fs::path path = g.output(a.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text_file(path, j.dump(2) + "\n");
    echo_run_config(g, sub, g.out_dir.empty() ? parent_or_cwd(path) : fs::path(g.out_dir));
  } else if (!g.out_dir.empty()) {
    echo_run_config(g, sub, g.out_dir);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- pseudo-label

struct PseudoArgs {
  std::string bundle;
  std::string offsets;
  std::string confidences;
  std::string out;
};

std::vector<std::string> pseudo_label_lines(const SceneBundle& b, std::vector<Vec3f> offsets,
                                            std::vector<float> confidences,
                                            const PipelineConfig& cfg) {
  const std::size_t n = b.cloud.size();
  require(offsets.size() == n, "scene " + b.name + ": " + std::to_string(offsets.size()) +
                                   " offsets for " + std::to_string(n) + " points");
  require(confidences.size() == n, "scene " + b.name + ": " + std::to_string(confidences.size()) +
                                       " confidences for " + std::to_string(n) + " points");
  std::vector<Vec3d> o(n);
  for (std::size_t i = 0; i < n; ++i) o[i] = offsets[i].cast<double>();
  const auto shifted = shift_points(b.cloud.points, OffsetField::dense(std::move(o)));
  const auto mask = novel_mask(b.cloud, cfg, b.binary_scores);
  ProposalSet proposals = group_novel(shifted, mask, cfg);
  attach_confidences(proposals, confidences);
  const PseudoLabels pseudo = pseudo_offsets(score_filter(proposals, cfg), b.cloud.points);

  std::vector<std::string> lines;
  for (std::size_t k = 0; k < pseudo.proposals.size(); ++k) {
    const Proposal& p = pseudo.proposals[k];
    json labels = json::array();
    for (Index i : p.point_indices) {
      const Vec3d& l = pseudo.labels.offsets[i];
      labels.push_back({l.x(), l.y(), l.z()});
    }
    double zsum = 0.0;
    for (double z : p.point_confidences) zsum += z;
    json line{{"scene", b.name},
              {"proposal", k},
              {"center", {p.center->x(), p.center->y(), p.center->z()}},
              {"confidence", zsum / static_cast<double>(p.point_confidences.size())},
              {"point_indices", p.point_indices},
              {"labels", std::move(labels)}};
    lines.push_back(line.dump());
  }
  return lines;
}

int cmd_pseudo(const PseudoArgs& a, const Globals& g, const CLI::App& sub, std::ostream& out) {
  const auto bundles = load_bundles(a.bundle, "--bundle");
  require(bundles.size() == 1 || (a.offsets.empty() && a.confidences.empty()),
          "--offsets/--confidences need a single bundle; a directory of bundles uses each "
          "bundle's own prediction channels");
  std::vector<Vec3f> offsets;
  std::vector<float> confidences;
  if (!a.offsets.empty()) offsets = unpack_vec3(read_f32_checked(a.offsets, "--offsets"));
  if (!a.confidences.empty()) confidences = read_f32_checked(a.confidences, "--confidences");

  std::vector<std::vector<std::string>> lines(bundles.size());
  parallel_map(bundles.size(), [&](std::size_t k) {
    const SceneBundle& b = bundles[k];
    auto o = a.offsets.empty() ? b.pred_offsets : offsets;
    auto z = a.confidences.empty() ? b.confidences : confidences;
    require(!o.empty(), "scene " + b.name + ": no predicted offsets (pass --offsets)");
    require(!z.empty(), "scene " + b.name + ": no confidences (pass --confidences)");
    lines[k] = pseudo_label_lines(b, std::move(o), std::move(z), g.pipeline);
  });

  std::string text;
  std::size_t count = 0;
  for (const auto& scene_lines : lines) {
    for (const auto& l : scene_lines) {
      text += l;
      text += '\n';
      ++count;
    }
  }
  const fs::path path = g.output(a.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text_file(path, text);
  out << "scenes " << bundles.size() << ", proposals " << count << "\n";
  echo_run_config(g, sub, g.out_dir.empty() ? parent_or_cwd(path) : fs::path(g.out_dir));
  return kExitOk;
}

// ---------------------------------------------------------------- calibrate

struct CalibrateArgs {
  std::string scores;
  std::string out;
  std::size_t num_base = 0;
  double tolerance = 1e-5;
};

ScoreMatrix score_matrix(const std::vector<float>& flat, std::size_t n, std::size_t num_base,
                         const std::string& field) {
  require(n > 0 && flat.size() % n == 0 && flat.size() / n > num_base,
          field + ": " + std::to_string(flat.size()) + " values do not form " + std::to_string(n) +
              " rows with more than --num-base columns");
  ScoreMatrix s(n, flat.size() / n, num_base);
  std::copy(flat.begin(), flat.end(), s.values.begin());
  s.distribution = true;
  return s;
}

int cmd_calibrate(const CalibrateArgs& a, const Globals& g, const CLI::App& sub, std::ostream& out) {
  const auto files = split_csv(a.scores);
  require(files.size() == 3, "--scores expects base,novel,binary files");
  const auto base = read_f32_checked(files[0], "--scores[base]");
  const auto novel = read_f32_checked(files[1], "--scores[novel]");
  const auto binary_f = read_f32_checked(files[2], "--scores[binary]");
  const std::size_t n = binary_f.size();
  require(base.size() == novel.size(), "--scores: base has " + std::to_string(base.size()) +
                                           " values, novel has " + std::to_string(novel.size()));
  const ScoreMatrix sb = score_matrix(base, n, a.num_base, "--scores[base]");
  const ScoreMatrix sn = score_matrix(novel, n, a.num_base, "--scores[novel]");
  const std::vector<double> binary(binary_f.begin(), binary_f.end());
  const ScoreMatrix s = calibrate(sb, sn, binary, a.tolerance);

  std::vector<float> flat(s.values.begin(), s.values.end());
  const fs::path path = g.output(a.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_f32(path, flat);
  out << "calibrated " << s.rows << " x " << s.cols << " scores\n";
  echo_run_config(g, sub, g.out_dir.empty() ? parent_or_cwd(path) : fs::path(g.out_dir));
  return kExitOk;
}

// ---------------------------------------------------------------- metrics

struct MetricsArgs {
  std::string task;
  std::string pred;
  std::string gt;
  std::string base_classes;
  std::string novel_classes;
  std::string out;
  bool agnostic = false;
  bool gt_novel_only = false;
};

std::vector<std::uint32_t> parse_classes(const std::string& csv, const std::vector<std::string>& names,
                                         const std::string& flag) {
  std::vector<std::uint32_t> ids;
  for (const auto& item : split_csv(csv)) {
    const bool numeric = std::all_of(item.begin(), item.end(), [](char c) { return c >= '0' && c <= '9'; });
    if (numeric) {
      ids.push_back(static_cast<std::uint32_t>(std::stoul(item)));
      continue;
    }
    auto it = std::find(names.begin(), names.end(), item);
    require(it != names.end(), flag + ": unknown class `" + item + "`");
    ids.push_back(static_cast<std::uint32_t>(it - names.begin()));
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

Segment segment_from_json(const json& j, bool agnostic, const std::string& where) {
  try {
    Segment s;
    if (j.contains("class_id")) s.class_id = j.at("class_id").get<std::uint32_t>();
    else require(agnostic, where + ": segment has no class_id (use --agnostic)");
    if (agnostic) s.class_id = 0;
    s.point_indices = j.at("point_indices").get<IndexSet>();
    require(is_sorted_unique(s.point_indices), where + ": point_indices must be sorted and unique");
    if (j.contains("confidence")) s.confidence = j.at("confidence").get<double>();
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(where + ": malformed segment: " + e.what());
  }
}

// Segments of every scene in one index space: scene k's indices are shifted by the total
// point count of scenes before it.
struct PooledSegments {
  std::vector<Segment> pred;
  std::vector<Segment> gt;
};

std::map<std::string, std::vector<json>> read_jsonl_by_scene(const std::string& path,
                                                             const std::string& flag) {
  require_file(path, flag);
  std::ifstream in(path);
  std::map<std::string, std::vector<json>> by_scene;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(flag + ": " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    require(j.is_object(), flag + ": " + path + " line " + std::to_string(line_no) + " is not an object");
    const std::string scene = j.contains("scene") ? j.at("scene").get<std::string>() : "";
    by_scene[scene].push_back(std::move(j));
  }
  return by_scene;
}

int cmd_metrics(const MetricsArgs& a, const Globals& g, const CLI::App& sub, std::ostream& out) {
  require(a.task == "sem" || a.task == "inst" || a.task == "pano" || a.task == "offset",
          "--task must be one of sem, inst, pano, offset");
  require_file(a.gt, "--gt");
  std::vector<SceneBundle> bundles;
  const bool gt_is_bundle = fs::is_directory(a.gt);
  if (gt_is_bundle) bundles = load_bundles(a.gt, "--gt");

  std::vector<std::string> names;
  ClassSets sets;
  if (!bundles.empty()) {
    names = bundles[0].class_names;
    sets.base = bundles[0].base_classes;
    sets.novel = bundles[0].novel_classes;
  }
  if (!a.base_classes.empty()) sets.base = parse_classes(a.base_classes, names, "--base-classes");
  if (!a.novel_classes.empty()) sets.novel = parse_classes(a.novel_classes, names, "--novel-classes");
  const ClassSets original = sets;
  if (a.agnostic) sets = ClassSets{{}, {0}};

  json report{{"task", a.task}};
  if (a.task == "sem") {
    require_file(a.pred, "--pred");
    const auto pred = read_u32_any(a.pred, "--pred");
    std::vector<std::uint32_t> gt;
    if (gt_is_bundle) {
      require(bundles.size() == 1, "--gt: sem needs a single bundle");
      gt = bundles[0].gt_sem_labels.empty() ? bundles[0].cloud.sem_labels : bundles[0].gt_sem_labels;
    } else {
      gt = read_u32_any(a.gt, "--gt");
    }
    require(pred.size() == gt.size(), "length mismatch: --pred has " + std::to_string(pred.size()) +
                                          " labels, --gt has " + std::to_string(gt.size()));
    report["report"] = to_json(semantic_miou(pred, gt, sets));
  } else if (a.task == "offset") {
    require(gt_is_bundle && bundles.size() == 1, "--gt: offset task needs a single bundle");
    const SceneBundle& b = bundles[0];
    require(!b.gt_offsets.empty(), "--gt: bundle has no ground-truth offsets");
    const auto pred = unpack_vec3(read_f32_checked(a.pred, "--pred"));
    require(pred.size() == b.gt_offsets.size(),
            "length mismatch: --pred has " + std::to_string(pred.size()) + " offsets, --gt has " +
                std::to_string(b.gt_offsets.size()));
    OffsetField p = OffsetField::zeros(pred.size());
    OffsetField t = OffsetField::zeros(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      p.offsets[i] = pred[i].cast<double>();
      p.valid[i] = 1;
      t.offsets[i] = b.gt_offsets[i].cast<double>();
      t.valid[i] = b.gt_sem_labels[i] != kIgnoreClass;
    }
    report["mae_convention"] = "mean over points of |dx| + |dy| + |dz|, meters";
    report["report"] = to_json(offset_mae(p, t, b.gt_sem_labels, original));
  } else {
    const auto pred_by_scene = read_jsonl_by_scene(a.pred, "--pred");
    PooledSegments pooled;
    auto keep_gt = [&](const Segment& s) { return !a.gt_novel_only || original.is_novel(s.class_id); };
    if (gt_is_bundle) {
      std::size_t offset = 0;
      std::size_t matched_scenes = 0;
      for (const auto& b : bundles) {
        const auto& sem = b.gt_sem_labels.empty() ? b.cloud.sem_labels : b.gt_sem_labels;
        for (auto s : segments_from_labels(sem, b.cloud.inst_labels)) {
          if (!keep_gt(s)) continue;
          if (a.agnostic) s.class_id = 0;
          for (auto& i : s.point_indices) i += static_cast<Index>(offset);
          pooled.gt.push_back(std::move(s));
        }
        auto it = pred_by_scene.find(bundles.size() == 1 && !pred_by_scene.count(b.name) ? "" : b.name);
        if (it != pred_by_scene.end()) {
          ++matched_scenes;
          for (const auto& j : it->second) {
            Segment s = segment_from_json(j, a.agnostic, "--pred scene " + b.name);
            require(s.point_indices.empty() || s.point_indices.back() < b.cloud.size(),
                    "--pred scene " + b.name + ": point index out of bounds");
            for (auto& i : s.point_indices) i += static_cast<Index>(offset);
            pooled.pred.push_back(std::move(s));
          }
        }
        offset += b.cloud.size();
      }
      require(matched_scenes == pred_by_scene.size(), "--pred names scenes that are not in --gt");
    } else {
      const auto gt_by_scene = read_jsonl_by_scene(a.gt, "--gt");
      require(gt_by_scene.size() <= 1 && pred_by_scene.size() <= 1,
              "segment files with several scenes need --gt to be a bundle directory");
      for (const auto& [scene, lines] : pred_by_scene) {
        for (const auto& j : lines) pooled.pred.push_back(segment_from_json(j, a.agnostic, "--pred"));
      }
      for (const auto& [scene, lines] : gt_by_scene) {
        for (const auto& j : lines) {
          Segment s = segment_from_json(j, false, "--gt");
          if (!keep_gt(s)) continue;
          if (a.agnostic) s.class_id = 0;
          pooled.gt.push_back(std::move(s));
        }
      }
    }
    if (a.task == "inst") report["report"] = to_json(instance_ap(pooled.pred, pooled.gt, sets));
    else report["report"] = to_json(panoptic_quality(pooled.pred, pooled.gt, sets));
  }
  report["base_classes"] = sets.base;
  report["novel_classes"] = sets.novel;

  const std::string text = report.dump(2) + "\n";
  if (a.out.empty()) {
    out << text;
    if (!g.out_dir.empty()) echo_run_config(g, sub, g.out_dir);
  } else {
    const fs::path path = g.output(a.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text_file(path, text);
    out << "wrote " << path.string() << "\n";
    echo_run_config(g, sub, g.out_dir.empty() ? parent_or_cwd(path) : fs::path(g.out_dir));
  }
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  int trials = 100;
  double step = 1e-5;
  double tolerance = 1e-4;
};

int cmd_gradcheck(const GradcheckArgs& a, const Globals& g, const CLI::App& sub, std::ostream& out) {
  require(a.trials >= 1, "--trials must be >= 1");
  const GradcheckReport r = run_gradcheck(a.trials, g.seed, a.step, a.tolerance);
  std::ostringstream err;
  err << std::scientific << std::setprecision(3) << r.max_rel_error;
  out << "trials " << r.trials << "  max_rel_error " << err.str() << "  tolerance " << a.tolerance
      << "  " << (r.passed ? "PASS" : "FAIL") << "\n";
  if (!g.out_dir.empty()) echo_run_config(g, sub, g.out_dir);
  return r.passed ? kExitOk : kExitInternal;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"owl3d: point-caption association, calibration, pseudo-labels and open-world metrics"};
  app.name("owl3d");
  app.set_version_flag("--version", std::string(OWL3D_VERSION));
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();

  Globals g;
  app.add_option("--config", g.config_path, "JSON file with `pipeline`, `jobs`, `seed`, `out_dir`");
  app.add_option("--jobs", g.jobs, "Worker threads (default: OpenMP maximum)");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out-dir", g.out_dir, "Directory for relative output paths and run_config.json");
  app.add_option("--set", g.overrides, "Pipeline override key=value (repeatable)");

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "Generate synthetic scene bundles");
  s_synth->add_option("--spec", synth.spec, "Synth spec JSON (defaults built in)");
  s_synth->add_option("--out", synth.out, "Output bundle directory")->required();
  s_synth->add_option("--scenes", synth.scenes, "Number of scenes; >1 writes scene_NNNN subdirectories");

  AssociateArgs assoc;
  auto* s_assoc = app.add_subcommand("associate", "Build point-caption pairs");
  s_assoc->add_option("--bundle", assoc.bundle, "Scene bundle or directory of bundles")->required();
  s_assoc->add_option("--out", assoc.out, "Output JSONL")->required();
  s_assoc->add_option("--levels", assoc.levels, "Comma list of scene, view, entity");
  s_assoc->add_option("--lexicon", assoc.lexicon, "Multi-word entity phrases, one per line");

  StatsArgs stats;
  auto* s_stats = app.add_subcommand("stats", "Caption statistics per level");
  s_stats->add_option("--pairs", stats.pairs, "Caption records JSONL")->required();
  s_stats->add_option("--out", stats.out, "Also write the JSON table here");

  PseudoArgs pseudo;
  auto* s_pseudo = app.add_subcommand("pseudo-label", "Debiased pseudo offset labels for novel points");
  s_pseudo->add_option("--bundle", pseudo.bundle, "Scene bundle or directory of bundles")->required();
  s_pseudo->add_option("--offsets", pseudo.offsets, "Predicted offsets f32 (N x 3); default: bundle channel");
  s_pseudo->add_option("--confidences", pseudo.confidences, "Per-point confidences f32; default: bundle channel");
  s_pseudo->add_option("--out", pseudo.out, "Output JSONL, one proposal per line")->required();

  CalibrateArgs calib;
  auto* s_calib = app.add_subcommand("calibrate", "Blend base and novel scores with s_b");
  s_calib->add_option("--scores", calib.scores, "base.f32,novel.f32,binary.f32")->required();
  s_calib->add_option("--num-base", calib.num_base, "Number of base classes (leading columns)")->required();
  s_calib->add_option("--out", calib.out, "Output f32 (N x K)")->required();
  s_calib->add_option("--tolerance", calib.tolerance, "Row-sum tolerance for f32 inputs");

  MetricsArgs metrics;
  auto* s_metrics = app.add_subcommand("metrics", "Open-world segmentation metrics");
  s_metrics->add_option("--task", metrics.task, "sem, inst, pano or offset")->required();
  s_metrics->add_option("--pred", metrics.pred, "Predictions (u32 labels, JSONL segments or f32 offsets)")->required();
  s_metrics->add_option("--gt", metrics.gt, "Ground truth (bundle, directory of bundles, u32 labels or JSONL)")->required();
  s_metrics->add_option("--base-classes", metrics.base_classes, "Comma list of ids or names");
  s_metrics->add_option("--novel-classes", metrics.novel_classes, "Comma list of ids or names");
  s_metrics->add_option("--out", metrics.out, "Report JSON (stdout when absent)");
  s_metrics->add_flag("--agnostic", metrics.agnostic, "Treat every segment as one class");
  s_metrics->add_flag("--gt-novel-only", metrics.gt_novel_only, "Keep only ground-truth segments of novel classes");

  GradcheckArgs grad;
  auto* s_grad = app.add_subcommand("gradcheck", "Finite-difference check of the contrastive gradients");
  s_grad->add_option("--trials", grad.trials, "Random instances");
  s_grad->add_option("--step", grad.step, "Central difference step");
  s_grad->add_option("--tolerance", grad.tolerance, "Maximum relative error");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  const ScopedThreads restore(num_threads());
  try {
    resolve_globals(g, app);
    if (*s_synth) return cmd_synth(synth, g, *s_synth, out);
    if (*s_assoc) return cmd_associate(assoc, g, *s_assoc, out);
    if (*s_stats) return cmd_stats(stats, g, *s_stats, out);
    if (*s_pseudo) return cmd_pseudo(pseudo, g, *s_pseudo, out);
    if (*s_calib) return cmd_calibrate(calib, g, *s_calib, out);
    if (*s_metrics) return cmd_metrics(metrics, g, *s_metrics, out);
    if (*s_grad) return cmd_gradcheck(grad, g, *s_grad, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace owl3d::cli
