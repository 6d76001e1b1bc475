#include "lidar_forge/classes.hpp"

namespace lidar_forge::classes {

bool is_thing(std::uint16_t s) noexcept {
  switch (s) {
    case kCar: case kBicycle: case kBus: case kMotorcycle: case kOnRails:
    case kTruck: case kOtherVehicle: case kPerson: case kBicyclist:
    case kMotorcyclist:
      return true;
    default:
      // Moving variants 252..259.
      return s >= 252 && s <= 259;
  }
}

bool is_ground(std::uint16_t s) noexcept {
  return s == kRoad || s == kParking || s == kSidewalk || s == kOtherGround ||
         s == kTerrain || s == 60;  // 60: lane-marking
}

std::vector<std::uint16_t> default_injection_classes() {
  return {kBicycle, kMotorcycle, kTruck, kOtherVehicle,
          kPerson,  kBicyclist,  kMotorcyclist};
}

std::string_view name(std::uint16_t s) noexcept {
  switch (s) {
    case 0: return "unlabeled";
    case 1: return "outlier";
    case kCar: return "car";
    case kBicycle: return "bicycle";
    case kBus: return "bus";
    case kMotorcycle: return "motorcycle";
    case kOnRails: return "on-rails";
    case kTruck: return "truck";
    case kOtherVehicle: return "other-vehicle";
    case kPerson: return "person";
    case kBicyclist: return "bicyclist";
    case kMotorcyclist: return "motorcyclist";
    case kRoad: return "road";
    case kParking: return "parking";
    case kSidewalk: return "sidewalk";
    case kOtherGround: return "other-ground";
    case kBuilding: return "building";
    case kFence: return "fence";
    case 52: return "other-structure";
    case 60: return "lane-marking";
    case kVegetation: return "vegetation";
    case kTrunk: return "trunk";
    case kTerrain: return "terrain";
    case kPole: return "pole";
    case kTrafficSign: return "traffic-sign";
    case 99: return "other-object";
    case 252: return "moving-car";
    case 253: return "moving-bicyclist";
    case 254: return "moving-person";
    case 255: return "moving-motorcyclist";
    case 256: return "moving-on-rails";
    case 257: return "moving-bus";
    case 258: return "moving-truck";
    case 259: return "moving-other-vehicle";
    default: return "other";
  }
}

Rgb color(std::uint16_t s) noexcept {
  // RGB version of the devkit color map.
  switch (s) {
    case 0: return {0, 0, 0};
    case 1: return {255, 0, 0};
    case kCar: case 252: return {100, 150, 245};
    case kBicycle: return {100, 230, 245};
    case kBus: case 257: return {100, 80, 250};
    case kMotorcycle: return {30, 60, 150};
    case kOnRails: case 256: return {0, 0, 255};
    case kTruck: case 258: return {80, 30, 180};
    case kOtherVehicle: case 259: return {0, 0, 255};
    case kPerson: case 254: return {255, 30, 30};
    case kBicyclist: case 253: return {255, 40, 200};
    case kMotorcyclist: case 255: return {150, 30, 90};
    case kRoad: return {255, 0, 255};
    case kParking: return {255, 150, 255};
    case kSidewalk: return {75, 0, 75};
    case kOtherGround: return {175, 0, 75};
    case kBuilding: return {255, 200, 0};
    case kFence: return {255, 120, 50};
    case 52: return {255, 150, 0};
    case 60: return {150, 255, 170};
    case kVegetation: return {0, 175, 0};
    case kTrunk: return {135, 60, 0};
    case kTerrain: return {150, 240, 80};
    case kPole: return {255, 240, 150};
    case kTrafficSign: return {255, 0, 0};
    default: return {50, 255, 255};
  }
}

}  // namespace lidar_forge::classes
