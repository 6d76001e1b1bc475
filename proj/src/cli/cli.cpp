#include "lidar_forge/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>

#include "lidar_forge/augment.hpp"
#include "lidar_forge/classes.hpp"
#include "lidar_forge/error.hpp"
#include "lidar_forge/instance_db.hpp"
#include "lidar_forge/kitti_io.hpp"
#include "lidar_forge/parallel.hpp"
#include "lidar_forge/render.hpp"

namespace lidar_forge::cli {

namespace {

/// Bad flags, missing directories: exit code 2.
class InvalidInvocation : public Error {
 public:
  using Error::Error;
};

void check_roots(const JobSpec& job, bool needs_out) {
  if (job.data_root.empty()) throw InvalidInvocation("--data is required");
  if (!fs::is_directory(job.data_root)) {
    throw InvalidInvocation("data root " + job.data_root.string() + " does not exist");
  }
  if (needs_out && job.out_root.empty()) throw InvalidInvocation("--out is required");
  if (!job.out_root.empty() &&
      fs::weakly_canonical(job.out_root) == fs::weakly_canonical(job.data_root)) {
    throw InvalidInvocation("output root must differ from the input root");
  }
  if (job.stride < 1) throw InvalidInvocation("--stride must be >= 1");
  if (job.workers < 1) throw InvalidInvocation("--workers must be >= 1");
}

std::vector<FrameRef> select_frames(const JobSpec& job, bool need_labels) {
  auto sequences = job.sequences.empty() ? list_sequences(job.data_root) : job.sequences;
  std::vector<FrameRef> selected;
  for (const auto& seq : sequences) {
    const fs::path seq_dir = job.data_root / "sequences" / seq;
    if (!fs::is_directory(seq_dir / "velodyne")) {
      throw InvalidInvocation("missing directory " + (seq_dir / "velodyne").string());
    }
    if (need_labels && !fs::is_directory(seq_dir / "labels")) {
      throw InvalidInvocation("missing directory " + (seq_dir / "labels").string());
    }
    std::size_t index = 0;
    for (auto& ref : list_frames(job.data_root, seq)) {
      if (job.first_frame && ref.frame < *job.first_frame) continue;
      if (job.last_frame && ref.frame > *job.last_frame) continue;
      if (index++ % job.stride == 0) selected.push_back(std::move(ref));
    }
  }
  return selected;
}

AugmentConfig job_config(const JobSpec& job) {
  AugmentConfig config = job.config_path ? load_config(*job.config_path) : AugmentConfig{};
  if (job.seed) config.seed = *job.seed;
  return config;
}

std::string frame_name(const FrameRef& ref) { return ref.sequence + "/" + ref.stem(); }

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot create " + tmp.string());
    out << text;
    if (!out) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// Poses per sequence for ego-motion reversal.
class EgoMotion {
 public:
  EgoMotion(const fs::path& root, const std::vector<FrameRef>& frames) {
    for (const auto& ref : frames) {
      if (poses_.contains(ref.sequence) || errors_.contains(ref.sequence)) continue;
      const fs::path dir = root / "sequences" / ref.sequence;
      try {
        if (!fs::exists(dir / "poses.txt")) throw Error("no poses.txt");
        auto poses = read_poses(dir / "poses.txt");
        if (auto tr = read_calibration(dir / "calib.txt")) {
          poses = poses_in_velodyne_frame(poses, *tr);
        }
        poses_[ref.sequence] = std::move(poses);
      } catch (const std::exception& e) {
        errors_[ref.sequence] = e.what();
      }
    }
  }

  /// Applies the reversal in place; returns a note for the report.
  std::string apply(const FrameRef& ref, PointCloud& cloud,
                    const SensorModel& sensor) const {
    if (auto it = errors_.find(ref.sequence); it != errors_.end()) {
      return "skipped: " + it->second;
    }
    auto it = poses_.find(ref.sequence);
    if (it == poses_.end()) return "skipped: no poses";
    const auto& poses = it->second;
    if (ref.frame == 0) return "skipped: first frame";
    if (ref.frame >= poses.size()) return "skipped: missing pose";
    cloud = undo_ego_motion(cloud, poses[ref.frame - 1], poses[ref.frame], sensor);
    return "applied";
  }

 private:
  std::map<std::string, std::vector<Pose>> poses_;
  std::map<std::string, std::string> errors_;
};

PointCloud load_frame(const FrameRef& ref) {
  std::optional<fs::path> label;
  if (fs::exists(ref.label)) label = ref.label;
  return read_scan(ref.scan, label);
}

class FileScenePool final : public ScenePool {
 public:
  FileScenePool(const std::vector<FrameRef>& frames, const EgoMotion* ego,
                SensorModel sensor)
      : frames_(frames), ego_(ego), sensor_(sensor) {}
  std::size_t size() const override { return frames_.size(); }
  PointCloud load(std::size_t index) const override {
    PointCloud cloud = load_frame(frames_.at(index));
    if (ego_) ego_->apply(frames_[index], cloud, sensor_);
    return cloud;
  }
  std::string name(std::size_t index) const override {
    return frame_name(frames_.at(index));
  }

 private:
  const std::vector<FrameRef>& frames_;
  const EgoMotion* ego_;
  SensorModel sensor_;
};

nlohmann::json manifest_json(const DatabaseManifest& m) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [c, n] : m.counts) counts[std::to_string(c)] = n;
  nlohmann::json errors = nlohmann::json::array();
  for (const auto& e : m.errors) {
    errors.push_back({{"sequence", e.sequence}, {"frame", e.frame}, {"error", e.message}});
  }
  std::ostringstream fp;
  fp << std::hex << std::setw(16) << std::setfill('0') << m.fingerprint;
  return {{"version", m.version},     {"fingerprint", fp.str()},
          {"min_points", m.min_points}, {"frames_scanned", m.frames_scanned},
          {"total", m.total()},       {"counts", counts},
          {"errors", errors}};
}

std::pair<std::string, std::uint32_t> parse_frame_spec(const std::string& spec) {
  const auto slash = spec.find('/');
  if (slash == std::string::npos) {
    throw InvalidInvocation("frame must look like <sequence>/<frame>, got '" + spec + "'");
  }
  try {
    return {spec.substr(0, slash),
            static_cast<std::uint32_t>(std::stoul(spec.substr(slash + 1)))};
  } catch (const std::exception&) {
    throw InvalidInvocation("bad frame number in '" + spec + "'");
  }
}

FrameRef find_frame(const fs::path& root, const std::string& spec) {
  const auto [seq, number] = parse_frame_spec(spec);
  for (auto& ref : list_frames(root, seq)) {
    if (ref.frame == number) return ref;
  }
  throw InvalidInvocation("frame " + spec + " not found");
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const InvalidInvocation& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInvocation;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInvocation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kPartialFailure;
  }
}

}  // namespace

int cmd_build_db(const JobSpec& job, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_roots(job, !job.db_path.has_value());
    const auto config = job_config(job);
    const auto frames = select_frames(job, /*need_labels=*/true);
    ExtractionOptions options;
    options.classes = config.injection_classes;
    options.min_points = job.min_points;
    const auto db = build_database(frames, SensorModel{}, options, job.workers);

    const fs::path db_path = job.db_path.value_or(job.out_root / "instances.db");
    if (db_path.has_parent_path()) fs::create_directories(db_path.parent_path());
    save_database(db, db_path);
    const auto manifest = db.manifest();
    fs::path manifest_path = db_path;
    manifest_path.replace_extension(".manifest.json");
    write_text_atomic(manifest_path, manifest_json(manifest).dump(2) + "\n");

    out << "database " << db_path.string() << "\n";
    out << "frames " << manifest.frames_scanned << "\n";
    for (const auto& [c, n] : manifest.counts) {
      out << "class " << c << " " << classes::name(c) << " " << n << "\n";
    }
    out << "total " << manifest.total() << "\n";
    out << "errors " << manifest.errors.size() << "\n";
    for (const auto& e : manifest.errors) {
      err << "frame " << e.sequence << "/" << e.frame << ": " << e.message << "\n";
    }
    return manifest.errors.empty() ? kSuccess : kPartialFailure;
  });
}

int cmd_augment(const JobSpec& job, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_roots(job, true);
    const auto config = job_config(job);
    std::optional<InstanceDatabase> db;
    if (config.p_inject > 0.0) {
      if (!job.db_path) throw InvalidInvocation("--db is required when p_inject > 0");
      try {
        db = load_database(*job.db_path);
      } catch (const std::exception& e) {
        throw InvalidInvocation(e.what());
      }
    }
    const SensorModel sensor = db ? db->sensor() : SensorModel{};
    const auto frames = select_frames(job, /*need_labels=*/false);
    std::optional<EgoMotion> ego;
    if (job.undo_ego_motion) ego.emplace(job.data_root, frames);
    FileScenePool pool(frames, ego ? &*ego : nullptr, sensor);

    std::vector<std::string> lines(frames.size());
    std::vector<char> failed(frames.size(), 0);
    std::vector<AugmentReport> reports(frames.size());
    std::mutex err_mutex;
    parallel_for(frames.size(), job.workers, [&](std::size_t i) {
      const auto& ref = frames[i];
      const auto seed = frame_seed(config.seed, ref.sequence_number(), ref.frame);
      nlohmann::json line;
      try {
        PointCloud cloud = load_frame(ref);
        std::string ego_note;
        if (ego) ego_note = ego->apply(ref, cloud, sensor);
        Rng rng(seed);
        auto result = augment_frame(cloud, db ? &*db : nullptr, &pool, config, sensor,
                                    rng, FrameKey{ref.sequence_number(), ref.frame});
        result.report.frame = frame_name(ref);
        result.report.seed = seed;
        const fs::path seq_out = job.out_root / "sequences" / ref.sequence;
        fs::create_directories(seq_out / "velodyne");
        if (result.cloud.labels) fs::create_directories(seq_out / "labels");
        write_scan_atomic(result.cloud, seq_out / "velodyne" / (ref.stem() + ".bin"),
                          seq_out / "labels" / (ref.stem() + ".label"));
        line = result.report.to_json();
        if (ego) line["ego_motion"] = ego_note;
        reports[i] = std::move(result.report);
      } catch (const std::exception& e) {
        failed[i] = 1;
        line = {{"frame", frame_name(ref)}, {"seed", seed}, {"error", e.what()}};
        std::lock_guard lock(err_mutex);
        err << "frame " << frame_name(ref) << ": " << e.what() << "\n";
      }
      lines[i] = line.dump();
    });

    fs::create_directories(job.out_root);
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    write_text_atomic(job.out_root / "report.jsonl", text);

    std::size_t failures = 0, global = 0, fusion = 0, injection = 0, instances = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (failed[i]) {
        ++failures;
        continue;
      }
      global += reports[i].global.applied;
      fusion += reports[i].fusion_applied;
      injection += reports[i].injection_applied;
      instances += reports[i].injections.size();
    }
    out << "frames " << frames.size() << "\n"
        << "failures " << failures << "\n"
        << "global " << global << "\n"
        << "fusion " << fusion << "\n"
        << "injection " << injection << "\n"
        << "instances " << instances << "\n";
    return failures == 0 ? kSuccess : kPartialFailure;
  });
}

int cmd_stats(const JobSpec& job, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_roots(job, false);
    const auto frames = select_frames(job, /*need_labels=*/true);
    std::map<std::uint16_t, std::size_t> points;
    std::map<std::uint16_t, std::size_t> coverage;
    std::size_t total = 0;
    std::size_t failures = 0;
    for (const auto& ref : frames) {
      try {
        const auto labels = read_labels(ref.label);
        std::map<std::uint16_t, std::size_t> local;
        for (auto l : labels) ++local[l.semantic];
        for (const auto& [c, n] : local) {
          points[c] += n;
          ++coverage[c];
        }
        total += labels.size();
      } catch (const std::exception& e) {
        ++failures;
        err << "frame " << frame_name(ref) << ": " << e.what() << "\n";
      }
    }
    std::ostringstream csv;
    csv << "class_id,name,points,share,frames\n";
    out << std::left << std::setw(8) << "id" << std::setw(22) << "class" << std::right
        << std::setw(14) << "points" << std::setw(12) << "share" << std::setw(9)
        << "frames" << "\n";
    for (const auto& [c, n] : points) {
      const double share = total == 0 ? 0.0 : static_cast<double>(n) / total;
      out << std::left << std::setw(8) << c << std::setw(22) << classes::name(c)
          << std::right << std::setw(14) << n << std::setw(12) << std::fixed
          << std::setprecision(6) << share << std::setw(9) << coverage[c] << "\n";
      csv << c << "," << classes::name(c) << "," << n << "," << std::setprecision(9)
          << share << "," << coverage[c] << "\n";
    }
    out << "total " << total << " points in " << frames.size() - failures << " frames\n";
    if (!job.out_root.empty()) {
      fs::create_directories(job.out_root);
      write_text_atomic(job.out_root / "stats.csv", csv.str());
    }
    return failures == 0 ? kSuccess : kPartialFailure;
  });
}

int cmd_render(const JobSpec& job, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_roots(job, true);
    if (job.frame.empty()) throw InvalidInvocation("--frame is required");
    const SensorModel sensor;
    const auto ref = find_frame(job.data_root, job.frame);
    const PointCloud cloud = load_frame(ref);
    fs::create_directories(job.out_root);
    const std::string base = ref.sequence + "_" + ref.stem();
    auto emit = [&](const Image& image, const std::string& suffix) {
      const fs::path path = job.out_root / (base + suffix);
      write_png(image, path);
      out << path.string() << "\n";
    };
    emit(render_range(cloud, sensor), "_range.png");
    emit(render_classes(cloud, sensor), "_classes.png");

    if (!job.fuse_with.empty()) {
      const auto partner_ref = find_frame(job.data_root, job.fuse_with);
      const PointCloud partner = load_frame(partner_ref);
      const auto config = job_config(job);
      Rng rng(frame_seed(config.seed, ref.sequence_number(), ref.frame));
      const auto fused = fuse_scenes(cloud, partner, sensor, config, rng);
      std::vector<std::uint16_t> parents(fused.kept_first.size(), 0);
      parents.resize(fused.cloud.size(), 1);
      emit(render_range(fused.cloud, sensor), "_fused_range.png");
      emit(render_classes(fused.cloud, sensor), "_fused_classes.png");
      emit(render_provenance(fused.cloud, parents, sensor), "_provenance.png");
    }
    return kSuccess;
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structure-preserving lidar scan augmentation", "lidar-forge"};
  app.require_subcommand(1);
  JobSpec job;
  std::string data, outdir, config, db;
  auto common = [&](CLI::App* sub, bool seeded) {
    sub->add_option("--data", data, "Dataset root holding sequences/")->required();
    sub->add_option("--out", outdir, "Output root");
    sub->add_option("--config", config, "JSON augmentation config");
    if (seeded) sub->add_option("--seed", job.seed, "Base seed for all randomness");
    sub->add_option("--sequences", job.sequences, "Sequence ids, comma separated")
        ->delimiter(',');
    sub->add_option("--first", job.first_frame, "First frame number to include");
    sub->add_option("--last", job.last_frame, "Last frame number to include");
    sub->add_option("--stride", job.stride, "Keep every n-th frame");
    sub->add_option("--workers", job.workers, "Frame-parallel worker threads");
  };

  auto* build = app.add_subcommand("build-db", "Extract object instances into a database");
  common(build, false);
  build->add_option("--db", db, "Database file (default <out>/instances.db)");
  build->add_option("--min-points", job.min_points, "Smallest instance kept");

  auto* augment = app.add_subcommand("augment", "Augment frames into --out");
  common(augment, true);
  augment->add_option("--db", db, "Instance database");
  augment->add_flag("--undo-ego-motion", job.undo_ego_motion,
                    "Reverse ego-motion compensation using poses.txt");

  auto* stats = app.add_subcommand("stats", "Per-class point distribution");
  common(stats, false);

  auto* render = app.add_subcommand("render", "Range-image debug renders");
  common(render, true);
  render->add_option("--frame", job.frame, "<sequence>/<frame>")->required();
  render->add_option("--fuse-with", job.fuse_with, "<sequence>/<frame> to fuse in");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kInvalidInvocation;
  }
  job.data_root = data;
  job.out_root = outdir;
  if (!config.empty()) job.config_path = config;
  if (!db.empty()) job.db_path = db;

  if (build->parsed()) return job.subcommand = "build-db", cmd_build_db(job, out, err);
  if (augment->parsed()) return job.subcommand = "augment", cmd_augment(job, out, err);
  if (stats->parsed()) return job.subcommand = "stats", cmd_stats(job, out, err);
  job.subcommand = "render";
  return cmd_render(job, out, err);
}

}  // namespace lidar_forge::cli
