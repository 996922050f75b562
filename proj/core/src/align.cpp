#include "traygrade/align.hpp"

#include <algorithm>
#include <numeric>

namespace traygrade {

namespace {

double median_height(const std::vector<DetBox>& boxes) {
    std::vector<double> h;
    h.reserve(boxes.size());
    for (const DetBox& b : boxes) h.push_back(b.h);
    std::sort(h.begin(), h.end());
    const std::size_t n = h.size();
    if (n % 2 == 1) return h[n / 2];
    return 0.5 * (h[n / 2 - 1] + h[n / 2]);
}

} // namespace

GridLayout sort_grid(const std::vector<DetBox>& boxes, int rows, int cols) {
    GridLayout out;
    out.rows = rows;
    out.cols = cols;
    out.cells.assign(static_cast<std::size_t>(rows) * cols, std::nullopt);
    if (boxes.empty()) return out;

    // Sort by cy; stable so equal-cy boxes keep input order.
    std::vector<std::size_t> order(boxes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return boxes[a].cy < boxes[b].cy; });

    const double band = 0.5 * median_height(boxes);

    std::vector<std::vector<std::size_t>> grid_rows;
    double row_sum = 0.0;
    for (std::size_t idx : order) {
        const double cy = boxes[idx].cy;
        if (grid_rows.empty() || cy - row_sum / grid_rows.back().size() > band) {
            grid_rows.emplace_back();
            row_sum = 0.0;
        }
        grid_rows.back().push_back(idx);
        row_sum += cy;
    }

    for (std::size_t r = 0; r < grid_rows.size(); ++r) {
        std::vector<std::size_t>& row = grid_rows[r];
        std::stable_sort(row.begin(), row.end(),
                         [&](std::size_t a, std::size_t b) { return boxes[a].cx < boxes[b].cx; });
        for (std::size_t c = 1; c < row.size(); ++c)
            if (boxes[row[c]].cx == boxes[row[c - 1]].cx) out.cx_tie = true;

        for (std::size_t c = 0; c < row.size(); ++c) {
            if (r < static_cast<std::size_t>(rows) && c < static_cast<std::size_t>(cols))
                out.cell(static_cast<int>(r), static_cast<int>(c)) = boxes[row[c]];
            else
                out.unassigned.push_back(boxes[row[c]]);
        }
    }
    return out;
}

ViewPairing pair_views(const GridLayout& top, const GridLayout& bottom, MirrorMode mode) {
    if (top.rows != bottom.rows || top.cols != bottom.cols)
        throw DimensionMismatch("pair_views: layout shapes differ");

    ViewPairing out;
    out.mirror_mode = mode;
    for (int r = 0; r < top.rows; ++r) {
        for (int c = 0; c < top.cols; ++c) {
            const int bc = mode == MirrorMode::horizontal ? top.cols - 1 - c : c;
            const std::optional<DetBox>& t = top.cell(r, c);
            const std::optional<DetBox>& b = bottom.cell(r, bc);
            if (!t && !b) continue;
            out.pairs.push_back(PairedCell{r, c, t, b});
        }
    }
    return out;
}

} // namespace traygrade
