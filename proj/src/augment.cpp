#include "lidar_forge/augment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "lidar_forge/error.hpp"
#include "lidar_forge/kernels.hpp"

namespace lidar_forge {

double ClassDistribution::share(std::uint16_t semantic) const noexcept {
  if (total == 0) return 0.0;
  auto it = counts.find(semantic);
  return it == counts.end()
             ? 0.0
             : static_cast<double>(it->second) / static_cast<double>(total);
}

ClassDistribution compute_distribution(std::span<const LabelRecord> labels) {
  if (labels.empty()) throw Error("class distribution of an empty label set");
  ClassDistribution d;
  for (auto l : labels) ++d.counts[l.semantic];
  d.total = labels.size();
  return d;
}

int max_rotation_steps(double limit, const SensorModel& sensor) noexcept {
  // The relative slack absorbs round-off when limit is an exact multiple
  // of the step, e.g. limit = pi.
  const double steps = limit / sensor.azimuth_step() * (1.0 + 1e-12);
  return std::min(static_cast<int>(std::floor(steps)), sensor.num_columns / 2);
}

namespace {

constexpr double kPi = std::numbers::pi;

// Uniform over admissible steps. A half-turn is reachable as +W/2 and -W/2,
// so the negative end is trimmed to keep every distinct rotation equally
// likely.
int draw_rotation_steps(double limit, const SensorModel& sensor, Rng& rng) {
  const int kmax = max_rotation_steps(limit, sensor);
  const int kmin = kmax == sensor.num_columns / 2 ? -kmax + 1 : -kmax;
  return static_cast<int>(rng.uniform_int(kmin, kmax));
}

void rotate_in_place(std::vector<Point>& points, int k, const SensorModel& sensor) {
  const int w = sensor.num_columns;
  const int reduced = ((k % w) + w) % w;
  if (reduced == 0) return;
  float c;
  float s;
  if ((4 * reduced) % w == 0) {
    // Quarter turns use exact coefficients.
    static constexpr float kCos[4] = {1.0f, 0.0f, -1.0f, 0.0f};
    static constexpr float kSin[4] = {0.0f, 1.0f, 0.0f, -1.0f};
    const int quarter = 4 * reduced / w;
    c = kCos[quarter];
    s = kSin[quarter];
  } else {
    const double angle = static_cast<double>(k) * sensor.azimuth_step();
    c = static_cast<float>(std::cos(angle));
    s = static_cast<float>(std::sin(angle));
  }
  kernels::active().rotate_z(points, c, s);
}

struct Placed {
  PointCloud cloud;
  std::vector<std::uint32_t> kept;
};

Placed apply_placement(const PointCloud& cloud, const Placement& placement,
                       double limit, const SensorModel& sensor, Rng& rng) {
  Placed out{quantized_rotation(cloud, placement.rotation_steps, sensor, limit), {}};
  if (placement.flip_x) kernels::active().negate_axis(out.cloud.points, 0);
  if (placement.flip_y) kernels::active().negate_axis(out.cloud.points, 1);
  out.kept = point_drop_survivors(out.cloud.size(), placement.drop_rate, rng);
  if (out.kept.size() != out.cloud.size()) out.cloud = select_points(out.cloud, out.kept);
  return out;
}

std::vector<double> nearest_per_cell(const Projection& projection,
                                     std::size_t cell_count) {
  std::vector<double> nearest(cell_count, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < projection.cells.size(); ++i) {
    const auto c = projection.cells[i];
    if (c == kNoCell) continue;
    auto& slot = nearest[static_cast<std::size_t>(c)];
    slot = std::min(slot, static_cast<double>(projection.ranges[i]));
  }
  return nearest;
}

std::vector<std::uint32_t> survivors(std::span<const std::uint8_t> removed) {
  std::vector<std::uint32_t> kept;
  kept.reserve(removed.size());
  for (std::uint32_t i = 0; i < removed.size(); ++i) {
    if (!removed[i]) kept.push_back(i);
  }
  return kept;
}

std::uint16_t fresh_instance_id(std::span<const LabelRecord> labels) {
  std::uint16_t max_id = 0;
  for (auto l : labels) max_id = std::max(max_id, l.instance);
  if (max_id < std::numeric_limits<std::uint16_t>::max()) {
    return static_cast<std::uint16_t>(max_id + 1);
  }
  std::vector<bool> used(65536, false);
  for (auto l : labels) used[l.instance] = true;
  for (std::uint32_t id = 1; id < used.size(); ++id) {
    if (!used[id]) return static_cast<std::uint16_t>(id);
  }
  throw Error("no free instance id left in frame");
}

}  // namespace

PointCloud quantized_rotation(const PointCloud& cloud, int k,
                              const SensorModel& sensor, double limit) {
  if (std::abs(k) > max_rotation_steps(limit, sensor)) {
    throw Error("rotation of " + std::to_string(k) + " steps exceeds the limit of " +
                std::to_string(limit) + " rad");
  }
  PointCloud out = cloud;
  rotate_in_place(out.points, k, sensor);
  return out;
}

PointCloud flip(const PointCloud& cloud, Axis axis) {
  PointCloud out = cloud;
  kernels::active().negate_axis(out.points, axis == Axis::kX ? 0 : 1);
  return out;
}

std::vector<std::uint32_t> point_drop_survivors(std::size_t count, double rate,
                                                Rng& rng) {
  std::vector<std::uint32_t> kept;
  if (rate >= 1.0) return kept;
  kept.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (rate <= 0.0 || !rng.bernoulli(rate)) kept.push_back(i);
  }
  return kept;
}

PointCloud point_drop(const PointCloud& cloud, double rate, Rng& rng) {
  return select_points(cloud, point_drop_survivors(cloud.size(), rate, rng));
}

PointCloud global_augment(const PointCloud& cloud, const AugmentConfig& config,
                          const SensorModel& sensor, Rng& rng,
                          GlobalRecord* record) {
  GlobalRecord local;
  if (!rng.bernoulli(config.p_global)) {
    if (record) *record = local;
    return cloud;
  }
  local.applied = true;
  local.placement.rotation_steps =
      draw_rotation_steps(config.global_rotation_limit, sensor, rng);
  local.placement.flip_x = rng.bernoulli(0.5);
  local.placement.flip_y = rng.bernoulli(0.5);
  local.placement.drop_rate = config.point_drop_rate;
  auto placed = apply_placement(cloud, local.placement,
                                config.global_rotation_limit, sensor, rng);
  local.dropped = cloud.size() - placed.cloud.size();
  if (record) *record = local;
  return std::move(placed.cloud);
}

ObjectInstance place_instance(const ObjectInstance& instance,
                              const Placement& placement,
                              const SensorModel& sensor, Rng& rng) {
  PointCloud cloud;
  cloud.points.reserve(instance.points.size());
  for (const auto& p : instance.points) cloud.points.push_back(p.point);
  auto placed = apply_placement(cloud, placement, kPi, sensor, rng);

  ObjectInstance out;
  out.semantic_class = instance.semantic_class;
  out.source = instance.source;
  const auto projection = project_points(placed.cloud.points, sensor);
  const auto width = static_cast<std::uint32_t>(sensor.num_columns);
  for (std::size_t i = 0; i < placed.cloud.size(); ++i) {
    const auto c = projection.cells[i];
    if (c == kNoCell) continue;
    const auto cell = static_cast<std::uint32_t>(c);
    out.points.push_back({placed.cloud.points[i],
                          static_cast<std::uint16_t>(cell / width),
                          static_cast<std::uint16_t>(cell % width)});
  }
  return out;
}

InjectionResult inject_instance(const PointCloud& target,
                                const ObjectInstance& instance,
                                const SensorModel& sensor, double eps) {
  if (!target.labels) throw Error("injection target must be labelled");
  target.validate();
  const auto& k = kernels::active();

  const auto target_proj = project_points(target.points, sensor);
  const auto target_nearest = nearest_per_cell(target_proj, sensor.cell_count());

  const std::size_t n = instance.points.size();
  std::vector<Point> inst_points(n);
  std::vector<std::int32_t> inst_cells(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = instance.points[i];
    if (p.row >= sensor.num_beams || p.col >= sensor.num_columns) {
      throw Error("instance point outside the sensor grid");
    }
    inst_points[i] = p.point;
    inst_cells[i] = static_cast<std::int32_t>(CellIndex{p.row, p.col}.flat(sensor));
  }
  std::vector<float> inst_ranges(n);
  k.ranges(inst_points, inst_ranges);

  // (a) instance points behind the scene are dropped.
  std::vector<std::uint8_t> occluded(n);
  k.occluded(inst_ranges, inst_cells, target_nearest, eps, occluded);

  InjectionResult result;
  result.kept_instance = survivors(occluded);
  if (result.kept_instance.empty()) {
    result.rejected = true;
    result.cloud = target;
    result.kept_target.resize(target.size());
    std::iota(result.kept_target.begin(), result.kept_target.end(), 0u);
    return result;
  }

  // (b) target points behind a surviving instance point are shadowed.
  std::vector<double> inst_nearest(sensor.cell_count(),
                                   std::numeric_limits<double>::infinity());
  for (auto i : result.kept_instance) {
    auto& slot = inst_nearest[static_cast<std::size_t>(inst_cells[i])];
    slot = std::min(slot, static_cast<double>(inst_ranges[i]));
  }
  std::vector<std::uint8_t> shadowed(target.size());
  k.shadowed(target_proj.ranges, target_proj.cells, inst_nearest, eps, shadowed);
  result.kept_target = survivors(shadowed);

  result.assigned_instance_id = fresh_instance_id(*target.labels);
  result.cloud = select_points(target, result.kept_target);
  const LabelRecord label{instance.semantic_class, result.assigned_instance_id};
  for (auto i : result.kept_instance) {
    result.cloud.points.push_back(inst_points[i]);
    result.cloud.labels->push_back(label);
  }
  return result;
}

CompetitionResult compete_scenes(const PointCloud& first, const PointCloud& second,
                                 const SensorModel& sensor, double eps) {
  if (first.has_labels() != second.has_labels()) {
    throw Error("cannot fuse a labelled and an unlabelled scene");
  }
  first.validate();
  second.validate();
  const auto proj_a = project_points(first.points, sensor);
  const auto proj_b = project_points(second.points, sensor);
  const auto near_a = nearest_per_cell(proj_a, sensor.cell_count());
  const auto near_b = nearest_per_cell(proj_b, sensor.cell_count());

  std::vector<std::uint8_t> state(sensor.cell_count());
  kernels::active().contest(near_a, near_b, eps, state);

  CompetitionResult result;
  auto keep = [&](const Projection& proj, std::uint8_t loses) {
    std::vector<std::uint32_t> kept;
    kept.reserve(proj.cells.size());
    for (std::uint32_t i = 0; i < proj.cells.size(); ++i) {
      const auto c = proj.cells[i];
      if (c == kNoCell || state[static_cast<std::size_t>(c)] != loses) {
        kept.push_back(i);
      }
    }
    return kept;
  };
  result.kept_first = keep(proj_a, kernels::kSecondWins);
  result.kept_second = keep(proj_b, kernels::kFirstWins);
  result.contested_cells = static_cast<std::size_t>(
      std::count_if(state.begin(), state.end(),
                    [](std::uint8_t s) { return s != kernels::kUncontested; }));
  result.cloud = select_points(first, result.kept_first);
  append_cloud(result.cloud, select_points(second, result.kept_second));
  return result;
}

Placement draw_fusion_placement(const AugmentConfig& config,
                                const SensorModel& sensor, Rng& rng) {
  Placement p;
  p.rotation_steps = draw_rotation_steps(config.fusion_rotation_limit, sensor, rng);
  p.flip_x = rng.bernoulli(0.5);
  p.flip_y = rng.bernoulli(0.5);
  p.drop_rate = config.point_drop_rate;
  return p;
}

namespace {

struct Fused {
  CompetitionResult competition;
  std::vector<std::uint32_t> partner_kept;  // survivors of the placement drop
};

Fused fuse_impl(const PointCloud& a, const PointCloud& b, const SensorModel& sensor,
                const AugmentConfig& config, Rng& rng, FusionRecord* record) {
  FusionRecord local;
  local.placement = draw_fusion_placement(config, sensor, rng);
  auto placed = apply_placement(b, local.placement, config.fusion_rotation_limit,
                                sensor, rng);
  Fused out{compete_scenes(a, placed.cloud, sensor, config.range_epsilon),
            std::move(placed.kept)};
  local.partner_dropped = b.size() - placed.cloud.size();
  local.removed_first = a.size() - out.competition.kept_first.size();
  local.removed_second = placed.cloud.size() - out.competition.kept_second.size();
  local.contested_cells = out.competition.contested_cells;
  if (record) *record = local;
  return out;
}

}  // namespace

CompetitionResult fuse_scenes(const PointCloud& a, const PointCloud& b,
                              const SensorModel& sensor, const AugmentConfig& config,
                              Rng& rng, FusionRecord* record) {
  return std::move(fuse_impl(a, b, sensor, config, rng, record).competition);
}

AugmentResult balance_inject(const PointCloud& cloud, const InstanceDatabase& db,
                             const AugmentConfig& config, Rng& rng,
                             std::vector<std::uint16_t> parents,
                             std::optional<FrameKey> self) {
  const SensorModel& sensor = db.sensor();
  AugmentResult result;
  result.cloud = cloud;
  result.parents = parents.empty() ? std::vector<std::uint16_t>(cloud.size(), 0)
                                   : std::move(parents);
  auto& report = result.report;
  if (result.parents.size() != cloud.size()) {
    throw Error("parent list does not match the cloud");
  }
  if (db.empty()) {
    report.stop_reason = "empty database";
    return result;
  }
  if (!cloud.labels) throw Error("class balancing needs point labels");
  if (config.injection_classes.empty()) {
    report.stop_reason = "no injection classes";
    return result;
  }

  // Instances each class may draw from.
  const auto& classes = config.injection_classes;
  std::vector<std::vector<const ObjectInstance*>> eligible(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (!db.has_class(classes[c])) {
      throw ConfigError("injection class " + std::to_string(classes[c]) +
                        " is not in the instance database");
    }
    for (const auto& inst : db.instances(classes[c])) {
      if (!config.allow_self_injection && self &&
          inst.source.sequence == self->sequence && inst.source.frame == self->frame) {
        continue;
      }
      eligible[c].push_back(&inst);
    }
  }

  auto distribution = [](const PointCloud& c) {
    return c.empty() ? ClassDistribution{} : compute_distribution(*c.labels);
  };
  ClassDistribution dist = distribution(result.cloud);
  const auto max_injections = static_cast<std::size_t>(config.max_injections);
  const std::size_t cap =
      static_cast<std::size_t>(config.max_attempts_factor) * max_injections;

  while (true) {
    if (report.injections.size() >= max_injections) {
      report.stop_reason = "max injections";
      break;
    }
    if (report.injection_attempts >= cap) {
      report.stop_reason = "attempt cap";
      break;
    }
    std::vector<std::size_t> below;
    bool starved = false;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      if (dist.share(classes[c]) >= config.desired_share) continue;
      if (eligible[c].empty()) {
        starved = true;
      } else {
        below.push_back(c);
      }
    }
    if (below.empty()) {
      report.stop_reason = starved ? "class pool exhausted" : "desired share reached";
      break;
    }
    auto pick = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(classes.size()) - 1));
    if (std::find(below.begin(), below.end(), pick) == below.end()) {
      pick = below[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(below.size()) - 1))];
    }
    ++report.injection_attempts;
    const auto& pool = eligible[pick];
    const ObjectInstance& source = *pool[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];

    Placement placement;
    placement.rotation_steps = draw_rotation_steps(kPi, sensor, rng);
    placement.flip_x = rng.bernoulli(0.5);
    placement.flip_y = rng.bernoulli(0.5);
    placement.drop_rate = config.point_drop_rate;
    const ObjectInstance placed = place_instance(source, placement, sensor, rng);

    auto injected = inject_instance(result.cloud, placed, sensor, config.range_epsilon);
    if (injected.rejected) {
      ++report.rejected_injections;
      continue;
    }
    const auto parent_id = static_cast<std::uint16_t>(2 + report.injections.size());
    std::vector<std::uint16_t> next_parents;
    next_parents.reserve(injected.cloud.size());
    for (auto i : injected.kept_target) next_parents.push_back(result.parents[i]);
    next_parents.resize(injected.cloud.size(), parent_id);

    InjectionEntry entry;
    entry.semantic_class = source.semantic_class;
    entry.source = source.source;
    entry.placement = placement;
    entry.assigned_instance_id = injected.assigned_instance_id;
    entry.points_added = injected.kept_instance.size();
    entry.target_removed = result.cloud.size() - injected.kept_target.size();
    report.injections.push_back(entry);

    result.cloud = std::move(injected.cloud);
    result.parents = std::move(next_parents);
    dist = distribution(result.cloud);
  }
  return result;
}

AugmentResult augment_frame(const PointCloud& cloud, const InstanceDatabase* db,
                            const ScenePool* pool, const AugmentConfig& config,
                            const SensorModel& sensor, Rng& rng,
                            std::optional<FrameKey> self) {
  if (db != nullptr && !(db->sensor() == sensor)) {
    throw Error("instance database was built for a different sensor model");
  }
  const auto draws_before = rng.draws();
  AugmentResult result;
  auto& report = result.report;
  report.input_points = cloud.size();

  result.cloud = global_augment(cloud, config, sensor, rng, &report.global);
  result.parents.assign(result.cloud.size(), 0);

  if (rng.bernoulli(config.p_fusion)) {
    if (pool == nullptr || pool->size() == 0) {
      report.fusion_error = "no scene pool";
    } else {
      const auto index = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(pool->size()) - 1));
      report.fusion_partner = pool->name(index);
      std::optional<PointCloud> partner;
      try {
        partner = pool->load(index);
        if (partner->has_labels() != result.cloud.has_labels()) {
          throw Error("partner label presence differs from the frame");
        }
      } catch (const std::exception& e) {
        report.fusion_error = e.what();
        partner.reset();
      }
      if (partner) {
        auto fused = fuse_impl(result.cloud, *partner, sensor, config, rng,
                               &report.fusion);
        std::vector<std::uint16_t> parents;
        parents.reserve(fused.competition.cloud.size());
        for (auto i : fused.competition.kept_first) parents.push_back(result.parents[i]);
        parents.resize(fused.competition.cloud.size(), 1);
        result.cloud = std::move(fused.competition.cloud);
        result.parents = std::move(parents);
        report.fusion_applied = true;
      }
    }
  }

  if (rng.bernoulli(config.p_inject)) {
    report.injection_applied = true;
    if (db == nullptr) {
      report.injection_skipped = "no instance database";
    } else {
      auto injected = balance_inject(result.cloud, *db, config, rng,
                                     std::move(result.parents), self);
      result.cloud = std::move(injected.cloud);
      result.parents = std::move(injected.parents);
      report.injections = std::move(injected.report.injections);
      report.injection_attempts = injected.report.injection_attempts;
      report.rejected_injections = injected.report.rejected_injections;
      report.stop_reason = std::move(injected.report.stop_reason);
    }
  }

  report.output_points = result.cloud.size();
  report.random_draws = rng.draws() - draws_before;
  return result;
}

namespace {

nlohmann::json placement_json(const Placement& p) {
  return {{"rotation_steps", p.rotation_steps},
          {"flip_x", p.flip_x},
          {"flip_y", p.flip_y},
          {"drop_rate", p.drop_rate}};
}

}  // namespace

nlohmann::json AugmentReport::to_json() const {
  nlohmann::json j;
  j["frame"] = frame;
  j["seed"] = seed;
  j["input_points"] = input_points;
  j["output_points"] = output_points;
  j["global"] = {{"applied", global.applied}, {"dropped", global.dropped}};
  if (global.applied) j["global"]["placement"] = placement_json(global.placement);

  j["fusion"] = {{"applied", fusion_applied}};
  if (!fusion_partner.empty()) j["fusion"]["partner"] = fusion_partner;
  if (!fusion_error.empty()) j["fusion"]["error"] = fusion_error;
  if (fusion_applied) {
    j["fusion"]["placement"] = placement_json(fusion.placement);
    j["fusion"]["partner_dropped"] = fusion.partner_dropped;
    j["fusion"]["removed_first"] = fusion.removed_first;
    j["fusion"]["removed_second"] = fusion.removed_second;
    j["fusion"]["contested_cells"] = fusion.contested_cells;
  }

  auto injected = nlohmann::json::array();
  for (const auto& e : injections) {
    injected.push_back({{"class", e.semantic_class},
                        {"source",
                         {{"sequence", e.source.sequence},
                          {"frame", e.source.frame},
                          {"instance", e.source.instance_id}}},
                        {"placement", placement_json(e.placement)},
                        {"instance_id", e.assigned_instance_id},
                        {"points_added", e.points_added},
                        {"target_removed", e.target_removed}});
  }
  j["injection"] = {{"applied", injection_applied},
                    {"instances", injected},
                    {"attempts", injection_attempts},
                    {"rejected", rejected_injections}};
  if (!injection_skipped.empty()) j["injection"]["skipped"] = injection_skipped;
  if (!stop_reason.empty()) j["injection"]["stop_reason"] = stop_reason;
  j["random_draws"] = random_draws;
  return j;
}

}  // namespace lidar_forge
