#pragma once

#include <cstdint>
#include <string>
#include <type_traits>

namespace floodwatch {

// Vehicles double as federated clients; the two id spaces are kept distinct
// so a vehicle id is never passed where a client id is expected by accident.
enum class VehicleId : std::uint32_t {};
enum class ClientId : std::uint32_t {};

constexpr std::uint32_t raw(VehicleId id) { return static_cast<std::uint32_t>(id); }
constexpr std::uint32_t raw(ClientId id) { return static_cast<std::uint32_t>(id); }

constexpr ClientId client_of(VehicleId id) { return ClientId{raw(id)}; }
constexpr VehicleId vehicle_of(ClientId id) { return VehicleId{raw(id)}; }

inline std::string to_string(VehicleId id) { return "v" + std::to_string(raw(id)); }
inline std::string to_string(ClientId id) { return "c" + std::to_string(raw(id)); }

}  // namespace floodwatch
