#pragma once

#include <cstdint>

namespace pauselab {

using TokenId = std::int32_t;

// Reserved special ids, fixed at the bottom of every vocabulary.
inline constexpr TokenId kPauseId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kPadId = 3;
inline constexpr int kNumSpecialTokens = 4;

inline constexpr const char* kPauseSurface = "[PAUSE]";
inline constexpr const char* kBosSurface = "[BOS]";
inline constexpr const char* kEosSurface = "[EOS]";
inline constexpr const char* kPadSurface = "[PAD]";

}  // namespace pauselab
