#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcs/system.hpp"

namespace tcs {

/// Cells per axis, shared by every chart box.
struct GridSpec {
    std::vector<int> cells;
};

struct ReachOptions {
    GridSpec grid;
    double dwell = 0.1;
    double horizon = 1.0;
    /// Integrator step; zero picks dwell / 10.
    double step = 0.0;
};

struct Cell {
    int chart = 0;
    std::vector<int> index;

    friend bool operator==(const Cell&, const Cell&) = default;
    friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct ReachReport {
    Point start;
    GridSpec grid;
    double dwell = 0.0;
    double horizon = 0.0;
    double step = 0.0;
    /// First-arrival time of every visited cell.
    std::map<Cell, double> arrival;
    std::size_t covered = 0;
    std::size_t total_cells = 0;
    double coverage = 0.0;
    bool stopped_early = false;

    bool visited(const Cell& c) const { return arrival.count(c) != 0; }
};

/// Grid cell of a canonical point.
Cell cell_of(const Atlas& atlas, const GridSpec& grid, const Point& p);
/// Chart coordinates of a cell centre.
Vec cell_center(const Atlas& atlas, const GridSpec& grid, const Cell& c);
/// True when the canonical chart of the cell centre is the cell's own chart.
bool owned(const Atlas& atlas, const GridSpec& grid, const Cell& c);
/// Number of owned cells over all charts.
std::size_t owned_cell_count(const Atlas& atlas, const GridSpec& grid);
/// Cells whose centres are one grid step away along any combination of axes.
std::vector<Cell> neighbors(const Atlas& atlas, const GridSpec& grid, const Cell& c);

/// Time-ordered search over grid cells. Every integrator sample marks its
/// cell; a cell is expanded from the first trajectory point that reached it by
/// flowing each field of `sys.flow_fields()` for min(dwell, horizon - t).
/// Times are counted in integrator steps, so a longer horizon never loses cells.
ReachReport reach(const GeneratedSystem& sys, const Point& start, const ReachOptions& opts,
                  const std::vector<Cell>& stop_when_visited = {});

struct ReachabilitySetResult {
    bool holds = false;
    /// witness[i][j]: the cell of point j is reached from point i.
    std::vector<std::vector<bool>> witness;
};

ReachabilitySetResult is_reachability_set(const GeneratedSystem& sys, const std::vector<Point>& points,
                                          const ReachOptions& opts);

/// Discrete interiority: every neighbour cell of x0's cell is visited within t.
std::vector<bool> stlc_probe(const GeneratedSystem& sys, const Point& x0, const std::vector<double>& times,
                             const ReachOptions& opts);

/// chart_id, i0..i{n-1}, arrival_time, one row per visited cell.
void write_csv(std::ostream& os, const ReachReport& report);
nlohmann::json summary_json(const ReachReport& report);

/// True when every visited cell of `a` is visited in `b`.
bool visited_subset(const ReachReport& a, const ReachReport& b);

} // namespace tcs
