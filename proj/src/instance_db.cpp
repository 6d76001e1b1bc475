#include "lidar_forge/instance_db.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "lidar_forge/classes.hpp"
#include "lidar_forge/error.hpp"
#include "lidar_forge/parallel.hpp"

namespace lidar_forge {

namespace {

struct DisjointSet {
  std::vector<std::uint32_t> parent;

  explicit DisjointSet(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0u);
  }
  std::uint32_t find(std::uint32_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller root wins so component ids do not depend on visit order.
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
};

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    return static_cast<std::size_t>(mix64(static_cast<std::uint64_t>(k.x) ^
                                          mix64(static_cast<std::uint64_t>(k.y) ^
                                                mix64(static_cast<std::uint64_t>(k.z)))));
  }
};

// Splits `members` into single-linkage clusters at distance `linkage`.
std::vector<std::vector<std::uint32_t>> link_components(
    const std::vector<Point>& points, const std::vector<std::uint32_t>& members,
    double linkage) {
  const double l2 = linkage * linkage;
  auto key_of = [&](const Point& p) {
    return VoxelKey{static_cast<std::int64_t>(std::floor(p.x / linkage)),
                    static_cast<std::int64_t>(std::floor(p.y / linkage)),
                    static_cast<std::int64_t>(std::floor(p.z / linkage))};
  };
  std::unordered_map<VoxelKey, std::vector<std::uint32_t>, VoxelHash> grid;
  for (std::uint32_t m = 0; m < members.size(); ++m) {
    grid[key_of(points[members[m]])].push_back(m);
  }
  DisjointSet sets(members.size());
  for (std::uint32_t m = 0; m < members.size(); ++m) {
    const Point& p = points[members[m]];
    const VoxelKey k = key_of(p);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = grid.find({k.x + dx, k.y + dy, k.z + dz});
          if (it == grid.end()) continue;
          for (std::uint32_t other : it->second) {
            if (other <= m) continue;
            const Point& q = points[members[other]];
            const double ddx = static_cast<double>(p.x) - q.x;
            const double ddy = static_cast<double>(p.y) - q.y;
            const double ddz = static_cast<double>(p.z) - q.z;
            if (ddx * ddx + ddy * ddy + ddz * ddz <= l2) sets.unite(m, other);
          }
        }
      }
    }
  }
  std::map<std::uint32_t, std::vector<std::uint32_t>> groups;
  for (std::uint32_t m = 0; m < members.size(); ++m) {
    groups[sets.find(m)].push_back(members[m]);
  }
  std::vector<std::vector<std::uint32_t>> out;
  out.reserve(groups.size());
  for (auto& [root, g] : groups) out.push_back(std::move(g));
  return out;
}

}  // namespace

std::vector<ObjectInstance> extract_instances(const PointCloud& cloud,
                                              const SensorModel& sensor,
                                              const ExtractionOptions& options,
                                              std::uint32_t sequence,
                                              std::uint32_t frame) {
  if (!cloud.labels) throw Error("instance extraction needs point labels");
  cloud.validate();
  if (options.classes.empty()) throw ConfigError("no extraction classes given");
  for (auto c : options.classes) {
    if (!classes::is_thing(c)) {
      throw ConfigError("class " + std::to_string(c) +
                        " is not a countable object class");
    }
  }
  const auto projection = project_points(cloud.points, sensor);
  const auto& labels = *cloud.labels;

  std::map<std::pair<std::uint16_t, std::uint16_t>, std::vector<std::uint32_t>>
      groups;
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    const auto l = labels[i];
    if (projection.cells[i] == kNoCell) continue;
    if (std::find(options.classes.begin(), options.classes.end(), l.semantic) ==
        options.classes.end()) {
      continue;
    }
    groups[{l.semantic, l.instance}].push_back(i);
  }

  struct Pending {
    std::uint16_t semantic;
    std::uint16_t instance;
    std::vector<std::uint32_t> members;
  };
  std::vector<Pending> pending;
  for (auto& [key, members] : groups) {
    if (key.second == 0) {
      for (auto& component : link_components(cloud.points, members, options.linkage)) {
        pending.push_back({key.first, 0, std::move(component)});
      }
    } else {
      pending.push_back({key.first, key.second, std::move(members)});
    }
  }
  std::erase_if(pending, [&](const Pending& p) {
    return p.members.size() < options.min_points;
  });
  std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    return std::tie(a.instance, a.semantic, a.members.front()) <
           std::tie(b.instance, b.semantic, b.members.front());
  });

  std::vector<ObjectInstance> out;
  out.reserve(pending.size());
  const auto width = static_cast<std::uint32_t>(sensor.num_columns);
  for (const auto& p : pending) {
    ObjectInstance inst;
    inst.semantic_class = p.semantic;
    inst.source = {sequence, frame, p.instance};
    inst.points.reserve(p.members.size());
    for (auto i : p.members) {
      const auto cell = static_cast<std::uint32_t>(projection.cells[i]);
      inst.points.push_back({cloud.points[i],
                             static_cast<std::uint16_t>(cell / width),
                             static_cast<std::uint16_t>(cell % width)});
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::size_t DatabaseManifest::total() const {
  std::size_t n = 0;
  for (const auto& [c, count] : counts) n += count;
  return n;
}

InstanceDatabase::InstanceDatabase(SensorModel sensor,
                                   std::vector<std::uint16_t> classes,
                                   std::uint32_t min_points)
    : sensor_(sensor), min_points_(min_points) {
  sensor_.validate();
  for (auto c : classes) by_class_[c];
}

std::vector<std::uint16_t> InstanceDatabase::classes() const {
  std::vector<std::uint16_t> out;
  for (const auto& [c, list] : by_class_) out.push_back(c);
  return out;
}

bool InstanceDatabase::has_class(std::uint16_t semantic) const noexcept {
  return by_class_.contains(semantic);
}

std::span<const ObjectInstance> InstanceDatabase::instances(
    std::uint16_t semantic) const {
  auto it = by_class_.find(semantic);
  if (it == by_class_.end()) {
    throw Error("class id " + std::to_string(semantic) +
                " is not in the instance database");
  }
  return it->second;
}

const ObjectInstance& InstanceDatabase::at(std::uint16_t semantic,
                                           std::size_t ordinal) const {
  auto list = instances(semantic);
  if (ordinal >= list.size()) {
    throw Error("instance " + std::to_string(ordinal) + " of class " +
                std::to_string(semantic) + " out of range");
  }
  return list[ordinal];
}

std::size_t InstanceDatabase::size() const noexcept {
  std::size_t n = 0;
  for (const auto& [c, list] : by_class_) n += list.size();
  return n;
}

DatabaseManifest InstanceDatabase::manifest() const {
  DatabaseManifest m;
  m.version = kFormatVersion;
  m.fingerprint = fingerprint_;
  m.min_points = min_points_;
  m.frames_scanned = frames_scanned_;
  m.errors = errors_;
  for (const auto& [c, list] : by_class_) m.counts[c] = list.size();
  return m;
}

void InstanceDatabase::add(ObjectInstance instance) {
  auto it = by_class_.find(instance.semantic_class);
  if (it == by_class_.end()) {
    throw Error("class id " + std::to_string(instance.semantic_class) +
                " is not in the instance database");
  }
  it->second.push_back(std::move(instance));
}

InstanceDatabase build_database(std::span<const FrameRef> frames,
                                const SensorModel& sensor,
                                const ExtractionOptions& options, unsigned workers) {
  InstanceDatabase db(sensor, options.classes,
                      static_cast<std::uint32_t>(options.min_points));
  for (auto c : options.classes) {
    if (!classes::is_thing(c)) {
      throw ConfigError("class " + std::to_string(c) +
                        " is not a countable object class");
    }
  }

  struct FrameResult {
    std::vector<ObjectInstance> instances;
    std::size_t point_count = 0;
    std::string error;
  };
  std::vector<FrameResult> results(frames.size());
  parallel_for(frames.size(), workers, [&](std::size_t i) {
    const auto& ref = frames[i];
    try {
      const PointCloud cloud = read_scan(ref.scan, ref.label);
      results[i].point_count = cloud.size();
      results[i].instances = extract_instances(cloud, sensor, options,
                                               ref.sequence_number(), ref.frame);
    } catch (const std::exception& e) {
      results[i].error = e.what();
    }
  });

  // FNV-1a over the frame identities and their point counts.
  std::uint64_t fingerprint = 0xcbf29ce484222325ull;
  auto feed = [&fingerprint](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      fingerprint ^= (v >> (8 * b)) & 0xFF;
      fingerprint *= 0x100000001b3ull;
    }
  };
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!results[i].error.empty()) {
      db.add_error({frames[i].sequence, frames[i].frame, results[i].error});
      continue;
    }
    feed(frames[i].sequence_number());
    feed(frames[i].frame);
    feed(results[i].point_count);
    for (auto& inst : results[i].instances) db.add(std::move(inst));
  }
  db.set_fingerprint(fingerprint);
  db.set_frames_scanned(frames.size());
  return db;
}

const ObjectInstance* sample_instance(const InstanceDatabase& db,
                                      std::uint16_t semantic, Rng& rng) {
  const auto list = db.instances(semantic);
  if (list.empty()) return nullptr;
  const auto pick = rng.uniform_int(0, static_cast<std::int64_t>(list.size()) - 1);
  return &list[static_cast<std::size_t>(pick)];
}

// --- persistence -----------------------------------------------------------

namespace {

constexpr std::array<char, 4> kMagic = {'L', 'F', 'D', 'B'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool has(std::size_t n) const { return bytes_.size() - pos_ >= n; }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_database(const InstanceDatabase& db) {
  const auto manifest = db.manifest();
  const auto& sensor = db.sensor();
  Writer w;
  for (char c : kMagic) w.put(c);
  w.put<std::uint32_t>(InstanceDatabase::kFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sensor.num_beams));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sensor.num_columns));
  w.put<double>(sensor.fov_up);
  w.put<double>(sensor.fov_down);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(manifest.counts.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(manifest.total()));
  w.put<std::uint64_t>(manifest.fingerprint);
  w.put<std::uint32_t>(manifest.min_points);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(manifest.frames_scanned));
  for (const auto& [c, count] : manifest.counts) {
    w.put<std::uint16_t>(c);
    w.put<std::uint16_t>(0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(count));
  }
  for (const auto& [c, count] : manifest.counts) {
    for (const auto& inst : db.instances(c)) {
      w.put<std::uint16_t>(inst.semantic_class);
      w.put<std::uint16_t>(inst.source.instance_id);
      w.put<std::uint32_t>(inst.source.sequence);
      w.put<std::uint32_t>(inst.source.frame);
      w.put<std::uint32_t>(static_cast<std::uint32_t>(inst.points.size()));
      for (const auto& p : inst.points) {
        w.put(p.point.x);
        w.put(p.point.y);
        w.put(p.point.z);
        w.put(p.point.intensity);
        w.put(p.row);
        w.put(p.col);
      }
    }
  }
  return w.take();
}

InstanceDatabase deserialize_database(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (!r.has(kDatabaseHeaderBytes)) {
    throw FormatError("database header truncated", r.remaining());
  }
  for (char c : kMagic) {
    if (r.get<char>() != c) throw FormatError("not an instance database", 0);
  }
  const auto version = r.get<std::uint32_t>();
  if (version != InstanceDatabase::kFormatVersion) {
    throw FormatError("database format version " + std::to_string(version) +
                          " is not supported (expected version " +
                          std::to_string(InstanceDatabase::kFormatVersion) + ")",
                      4);
  }
  SensorModel sensor;
  sensor.num_beams = static_cast<int>(r.get<std::uint32_t>());
  sensor.num_columns = static_cast<int>(r.get<std::uint32_t>());
  sensor.fov_up = r.get<double>();
  sensor.fov_down = r.get<double>();
  try {
    sensor.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("database sensor model invalid: ") + e.what(), 12);
  }
  const auto class_count = r.get<std::uint32_t>();
  const auto instance_count = r.get<std::uint32_t>();
  const auto fingerprint = r.get<std::uint64_t>();
  const auto min_points = r.get<std::uint32_t>();
  const auto frames_scanned = r.get<std::uint32_t>();

  if (!r.has(static_cast<std::size_t>(class_count) * kDatabaseClassEntryBytes)) {
    throw FormatError("database class table truncated", r.position());
  }
  std::map<std::uint16_t, std::uint32_t> expected;
  for (std::uint32_t i = 0; i < class_count; ++i) {
    const auto c = r.get<std::uint16_t>();
    r.get<std::uint16_t>();
    const auto n = r.get<std::uint32_t>();
    if (!expected.emplace(c, n).second) {
      throw FormatError("duplicate class " + std::to_string(c) + " in class table",
                        r.position());
    }
  }
  std::vector<std::uint16_t> class_ids;
  for (const auto& [c, n] : expected) class_ids.push_back(c);
  InstanceDatabase db(sensor, class_ids, min_points);
  db.set_fingerprint(fingerprint);
  db.set_frames_scanned(frames_scanned);

  for (std::uint32_t ordinal = 0; ordinal < instance_count; ++ordinal) {
    auto fail = [&](const std::string& why) {
      return FormatError("corrupt instance record " + std::to_string(ordinal) +
                             ": " + why,
                         ordinal);
    };
    if (!r.has(kDatabaseInstanceHeaderBytes)) throw fail("header truncated");
    ObjectInstance inst;
    inst.semantic_class = r.get<std::uint16_t>();
    inst.source.instance_id = r.get<std::uint16_t>();
    inst.source.sequence = r.get<std::uint32_t>();
    inst.source.frame = r.get<std::uint32_t>();
    const auto n = r.get<std::uint32_t>();
    if (!db.has_class(inst.semantic_class)) {
      throw fail("class " + std::to_string(inst.semantic_class) +
                 " missing from class table");
    }
    if (!r.has(static_cast<std::size_t>(n) * kDatabasePointBytes)) {
      throw fail("point data truncated");
    }
    inst.points.resize(n);
    for (auto& p : inst.points) {
      p.point.x = r.get<float>();
      p.point.y = r.get<float>();
      p.point.z = r.get<float>();
      p.point.intensity = r.get<float>();
      p.row = r.get<std::uint16_t>();
      p.col = r.get<std::uint16_t>();
      if (p.row >= sensor.num_beams || p.col >= sensor.num_columns) {
        throw fail("cell index outside the sensor grid");
      }
    }
    db.add(std::move(inst));
  }
  if (r.remaining() != 0) {
    throw FormatError("trailing bytes after instance record " +
                          std::to_string(instance_count),
                      r.position());
  }
  for (const auto& [c, n] : expected) {
    if (db.instances(c).size() != n) {
      throw FormatError("class " + std::to_string(c) + " lists " +
                            std::to_string(n) + " instances but holds " +
                            std::to_string(db.instances(c).size()),
                        0);
    }
  }
  return db;
}

void save_database(const InstanceDatabase& db, const fs::path& path) {
  const auto bytes = serialize_database(db);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot create " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

InstanceDatabase load_database(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(in.tellg()));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  return deserialize_database(bytes);
}

}  // namespace lidar_forge
