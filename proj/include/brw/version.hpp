#pragma once

namespace brw {

inline constexpr const char* kSchemaVersion = "1";
inline constexpr const char* kCodeVersion = "0.1.0";
inline constexpr const char* kSeedScheme = "splitmix64-stream-v1";

} // namespace brw
