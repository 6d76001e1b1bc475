#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace lidar_forge::classes {

// Raw SemanticKITTI label ids.
inline constexpr std::uint16_t kUnlabeled = 0;
inline constexpr std::uint16_t kCar = 10;
inline constexpr std::uint16_t kBicycle = 11;
inline constexpr std::uint16_t kBus = 13;
inline constexpr std::uint16_t kMotorcycle = 15;
inline constexpr std::uint16_t kOnRails = 16;
inline constexpr std::uint16_t kTruck = 18;
inline constexpr std::uint16_t kOtherVehicle = 20;
inline constexpr std::uint16_t kPerson = 30;
inline constexpr std::uint16_t kBicyclist = 31;
inline constexpr std::uint16_t kMotorcyclist = 32;
inline constexpr std::uint16_t kRoad = 40;
inline constexpr std::uint16_t kParking = 44;
inline constexpr std::uint16_t kSidewalk = 48;
inline constexpr std::uint16_t kOtherGround = 49;
inline constexpr std::uint16_t kBuilding = 50;
inline constexpr std::uint16_t kFence = 51;
inline constexpr std::uint16_t kVegetation = 70;
inline constexpr std::uint16_t kTrunk = 71;
inline constexpr std::uint16_t kTerrain = 72;
inline constexpr std::uint16_t kPole = 80;
inline constexpr std::uint16_t kTrafficSign = 81;

/// Countable object classes (static and moving variants).
bool is_thing(std::uint16_t semantic) noexcept;
bool is_ground(std::uint16_t semantic) noexcept;

/// bicycle, motorcycle, truck, other-vehicle, person, bicyclist, motorcyclist
std::vector<std::uint16_t> default_injection_classes();

/// Devkit name, or "class-<id>" for unknown ids.
std::string_view name(std::uint16_t semantic) noexcept;

struct Rgb {
  std::uint8_t r, g, b;
};
Rgb color(std::uint16_t semantic) noexcept;

}  // namespace lidar_forge::classes
