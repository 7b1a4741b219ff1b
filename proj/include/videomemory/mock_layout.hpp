// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "videomemory/image.hpp"

// Fixed frame layout shared by the mock keyframe renderer and the mock
// embedder. Coordinates are defined on a 64x64 grid and scaled to the actual
// frame size, so solid-color frames of any size embed to their color.
//
//   rows [0, 4)                 caption strip: hash of prompt + references
//   x [8, 28)  y [16, 56)       character slot (split into vertical bands)
//   x [36, 56) y [32, 56)       prop slot (split into vertical bands)
//   everything else             background

namespace videomemory::mock_layout {

inline constexpr int kGrid = 64;
inline constexpr int kMockImageSize = 64;

inline Rect scale(const Rect& r, int width, int height) {
    return {r.x0 * width / kGrid, r.y0 * height / kGrid, r.x1 * width / kGrid,
            r.y1 * height / kGrid};
}

inline Rect caption_strip(int width, int height) { return scale({0, 0, 64, 4}, width, height); }
inline Rect character_slot(int width, int height) { return scale({8, 16, 28, 56}, width, height); }
inline Rect prop_slot(int width, int height) { return scale({36, 32, 56, 56}, width, height); }

inline bool in_background(int x, int y, int width, int height) {
    return !caption_strip(width, height).contains(x, y) &&
           !character_slot(width, height).contains(x, y) &&
           !prop_slot(width, height).contains(x, y);
}

/// Splits `slot` into `parts` equal vertical bands; band i of n.
inline Rect band(const Rect& slot, int i, int parts) {
    const int w = slot.x1 - slot.x0;
    return {slot.x0 + w * i / parts, slot.y0, slot.x0 + w * (i + 1) / parts, slot.y1};
}

}  // namespace videomemory::mock_layout
