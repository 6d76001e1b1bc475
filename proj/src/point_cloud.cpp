#include "lidar_forge/point_cloud.hpp"

#include <string>

#include "lidar_forge/error.hpp"

namespace lidar_forge {

void PointCloud::validate() const {
  if (labels && labels->size() != points.size()) {
    throw Error("label count " + std::to_string(labels->size()) +
                " does not match point count " + std::to_string(points.size()));
  }
}

PointCloud select_points(const PointCloud& cloud,
                         std::span<const std::uint32_t> ordinals) {
  PointCloud out;
  out.points.reserve(ordinals.size());
  for (auto i : ordinals) out.points.push_back(cloud.points[i]);
  if (cloud.labels) {
    auto& labels = out.labels.emplace();
    labels.reserve(ordinals.size());
    for (auto i : ordinals) labels.push_back((*cloud.labels)[i]);
  }
  return out;
}

void append_cloud(PointCloud& head, const PointCloud& tail) {
  if (head.has_labels() != tail.has_labels()) {
    throw Error("cannot merge a labelled and an unlabelled cloud");
  }
  head.points.insert(head.points.end(), tail.points.begin(), tail.points.end());
  if (tail.labels) {
    head.labels->insert(head.labels->end(), tail.labels->begin(),
                        tail.labels->end());
  }
}

}  // namespace lidar_forge
