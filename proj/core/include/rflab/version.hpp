#pragma once

namespace rflab {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSnapshotSchemaVersion = 1;

}  // namespace rflab
