#include <cmath>
#include <fstream>
#include <numbers>

#include "lidar_forge/augment.hpp"
#include "lidar_forge/classes.hpp"
#include "lidar_forge/error.hpp"

namespace lidar_forge {

AugmentConfig::AugmentConfig()
    : injection_classes(classes::default_injection_classes()) {}

void AugmentConfig::validate() const {
  auto probability = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError(std::string(name) + " must lie in [0, 1], got " +
                        std::to_string(p));
    }
  };
  probability(p_global, "p_global");
  probability(p_fusion, "p_fusion");
  probability(p_inject, "p_inject");
  probability(point_drop_rate, "point_drop_rate");
  if (max_injections < 0) throw ConfigError("max_injections must be >= 0");
  if (max_attempts_factor < 0) throw ConfigError("max_attempts_factor must be >= 0");
  if (!(desired_share >= 0.0 && desired_share < 1.0)) {
    throw ConfigError("desired_share must lie in [0, 1)");
  }
  if (!(fusion_rotation_limit >= 0.0 && fusion_rotation_limit <= std::numbers::pi)) {
    throw ConfigError("fusion_rotation_limit must lie in [0, pi]");
  }
  if (!(global_rotation_limit >= 0.0 && global_rotation_limit <= std::numbers::pi)) {
    throw ConfigError("global_rotation_limit must lie in [0, pi]");
  }
  if (!(range_epsilon >= 0.0) || !std::isfinite(range_epsilon)) {
    throw ConfigError("range_epsilon must be finite and >= 0");
  }
  for (auto c : injection_classes) {
    if (!classes::is_thing(c)) {
      throw ConfigError("injection class " + std::to_string(c) +
                        " is not a countable object class");
    }
  }
}

namespace {

template <typename T>
T field(const nlohmann::json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace

AugmentConfig AugmentConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  AugmentConfig c;
  for (const auto& [key, value] : doc.items()) {
    if (key == "p_global") c.p_global = field<double>(value, key);
    else if (key == "p_fusion") c.p_fusion = field<double>(value, key);
    else if (key == "p_inject") c.p_inject = field<double>(value, key);
    else if (key == "max_injections") c.max_injections = field<int>(value, key);
    else if (key == "desired_share") c.desired_share = field<double>(value, key);
    else if (key == "injection_classes")
      c.injection_classes = field<std::vector<std::uint16_t>>(value, key);
    else if (key == "fusion_rotation_limit")
      c.fusion_rotation_limit = field<double>(value, key);
    else if (key == "global_rotation_limit")
      c.global_rotation_limit = field<double>(value, key);
    else if (key == "point_drop_rate") c.point_drop_rate = field<double>(value, key);
    else if (key == "range_epsilon") c.range_epsilon = field<double>(value, key);
    else if (key == "max_attempts_factor")
      c.max_attempts_factor = field<int>(value, key);
    else if (key == "seed") c.seed = field<std::uint64_t>(value, key);
    else if (key == "allow_self_injection")
      c.allow_self_injection = field<bool>(value, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

nlohmann::json AugmentConfig::to_json() const {
  return {{"p_global", p_global},
          {"p_fusion", p_fusion},
          {"p_inject", p_inject},
          {"max_injections", max_injections},
          {"desired_share", desired_share},
          {"injection_classes", injection_classes},
          {"fusion_rotation_limit", fusion_rotation_limit},
          {"global_rotation_limit", global_rotation_limit},
          {"point_drop_rate", point_drop_rate},
          {"range_epsilon", range_epsilon},
          {"max_attempts_factor", max_attempts_factor},
          {"seed", seed},
          {"allow_self_injection", allow_self_injection}};
}

AugmentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return AugmentConfig::from_json(doc);
}

}  // namespace lidar_forge
