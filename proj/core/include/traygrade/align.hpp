#pragma once

#include <optional>
#include <vector>

#include "traygrade/detect.hpp"
#include "traygrade/error.hpp"

namespace traygrade {

// Detections placed on the R x C tray lattice, row-major. Boxes that fit no
// cell (overflow rows or columns) land in `unassigned`.
struct GridLayout {
    int rows = 0;
    int cols = 0;
    std::vector<std::optional<DetBox>> cells;
    std::vector<DetBox> unassigned;
    bool cx_tie = false; // exact x ties within a row; input order kept

    const std::optional<DetBox>& cell(int r, int c) const {
        return cells[static_cast<std::size_t>(r) * cols + c];
    }
    std::optional<DetBox>& cell(int r, int c) {
        return cells[static_cast<std::size_t>(r) * cols + c];
    }
};

enum class MirrorMode { none, horizontal };

// One tray cell with whichever view detections were found for it. Cell
// indices are in the top view's frame.
struct PairedCell {
    int row = 0;
    int col = 0;
    std::optional<DetBox> top;
    std::optional<DetBox> bottom;
};

struct ViewPairing {
    std::vector<PairedCell> pairs; // cells with at least one detection
    MirrorMode mirror_mode = MirrorMode::none;
};

// Y-then-X lattice sort. Boxes are ordered by cy; a new row starts when a
// box's cy exceeds the current row's running mean cy by more than half the
// median box height; rows are then ordered by cx. Rows beyond R and the
// rightmost per-row overflow beyond C go to unassigned. Permutation
// invariant in its input.
GridLayout sort_grid(const std::vector<DetBox>& boxes, int rows, int cols);

// Matches top cell (r, c) with bottom cell (r, c) or, under horizontal
// mirroring, (r, C-1-c). Cells missing a detection in one view become
// half-pairs. Throws DimensionMismatch on unequal layout shapes.
ViewPairing pair_views(const GridLayout& top, const GridLayout& bottom, MirrorMode mode);

} // namespace traygrade
