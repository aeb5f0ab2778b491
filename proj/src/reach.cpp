#include "tcs/reach.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace tcs {

namespace {

void check_grid(const Atlas& atlas, const GridSpec& grid) {
    if (static_cast<int>(grid.cells.size()) != atlas.dim())
        throw DimensionMismatch("grid with " + std::to_string(grid.cells.size()) + " axes on a " +
                                std::to_string(atlas.dim()) + "-dimensional atlas");
    for (int n : grid.cells)
        if (n <= 0) throw DimensionMismatch("grid axis without cells");
}

std::int64_t cells_per_chart(const GridSpec& grid) {
    std::int64_t n = 1;
    for (int c : grid.cells) n *= c;
    return n;
}

std::int64_t encode(const GridSpec& grid, const Cell& c) {
    std::int64_t flat = 0;
    for (std::size_t a = 0; a < grid.cells.size(); ++a) flat = flat * grid.cells[a] + c.index[a];
    return static_cast<std::int64_t>(c.chart) * cells_per_chart(grid) + flat;
}

Cell decode(const GridSpec& grid, std::int64_t key) {
    const std::int64_t per = cells_per_chart(grid);
    Cell c;
    c.chart = static_cast<int>(key / per);
    std::int64_t flat = key % per;
    c.index.assign(grid.cells.size(), 0);
    for (std::size_t a = grid.cells.size(); a-- > 0;) {
        c.index[a] = static_cast<int>(flat % grid.cells[a]);
        flat /= grid.cells[a];
    }
    return c;
}

std::int64_t steps_in(double duration, double h) { return static_cast<std::int64_t>(std::floor(duration / h + 1e-9)); }

} // namespace

Cell cell_of(const Atlas& atlas, const GridSpec& grid, const Point& p) {
    check_grid(atlas, grid);
    const Chart& ch = atlas.chart(p.chart);
    Cell c{p.chart, std::vector<int>(grid.cells.size(), 0)};
    for (int a = 0; a < atlas.dim(); ++a) {
        const int n = grid.cells[static_cast<std::size_t>(a)];
        const double u = (p.coords(a) - ch.lo(a)) / (ch.hi(a) - ch.lo(a));
        c.index[static_cast<std::size_t>(a)] = std::clamp(static_cast<int>(std::floor(u * n)), 0, n - 1);
    }
    return c;
}

Vec cell_center(const Atlas& atlas, const GridSpec& grid, const Cell& c) {
    check_grid(atlas, grid);
    const Chart& ch = atlas.chart(c.chart);
    Vec x(atlas.dim());
    for (int a = 0; a < atlas.dim(); ++a) {
        const double w = (ch.hi(a) - ch.lo(a)) / grid.cells[static_cast<std::size_t>(a)];
        x(a) = ch.lo(a) + (c.index[static_cast<std::size_t>(a)] + 0.5) * w;
    }
    return x;
}

bool owned(const Atlas& atlas, const GridSpec& grid, const Cell& c) {
    auto loc = atlas.locate(c.chart, cell_center(atlas, grid, c));
    return loc && loc->point.chart == c.chart;
}

std::size_t owned_cell_count(const Atlas& atlas, const GridSpec& grid) {
    check_grid(atlas, grid);
    const std::int64_t per = cells_per_chart(grid);
    std::size_t n = 0;
    for (int chart = 0; chart < atlas.chart_count(); ++chart) {
        if (chart == 0 && atlas.chart_count() == 1) return static_cast<std::size_t>(per);
        for (std::int64_t k = 0; k < per; ++k)
            if (owned(atlas, grid, decode(grid, chart * per + k))) ++n;
    }
    return n;
}

std::vector<Cell> neighbors(const Atlas& atlas, const GridSpec& grid, const Cell& c) {
    const Chart& ch = atlas.chart(c.chart);
    const Vec center = cell_center(atlas, grid, c);
    const int n = atlas.dim();
    std::set<Cell> out;
    std::vector<int> off(static_cast<std::size_t>(n), -1);
    for (;;) {
        if (std::any_of(off.begin(), off.end(), [](int o) { return o != 0; })) {
            Vec x = center;
            for (int a = 0; a < n; ++a)
                x(a) += off[static_cast<std::size_t>(a)] * (ch.hi(a) - ch.lo(a)) / grid.cells[static_cast<std::size_t>(a)];
            if (auto loc = atlas.locate(c.chart, x)) {
                Cell nb = cell_of(atlas, grid, loc->point);
                if (nb != c) out.insert(nb);
            }
        }
        int a = 0;
        while (a < n && off[static_cast<std::size_t>(a)] == 1) off[static_cast<std::size_t>(a++)] = -1;
        if (a == n) break;
        ++off[static_cast<std::size_t>(a)];
    }
    return {out.begin(), out.end()};
}

ReachReport reach(const GeneratedSystem& sys, const Point& start, const ReachOptions& opts,
                  const std::vector<Cell>& stop_when_visited) {
    const Atlas& atlas = sys.atlas();
    check_grid(atlas, opts.grid);
    if (!(opts.dwell > 0.0)) throw DimensionMismatch("dwell time must be positive");
    if (!(opts.horizon >= 0.0)) throw DimensionMismatch("horizon must be nonnegative");
    const double h = opts.step > 0.0 ? opts.step : opts.dwell / 10.0;
    const std::int64_t dwell_steps = std::max<std::int64_t>(1, steps_in(opts.dwell, h));
    const std::int64_t horizon_steps = steps_in(opts.horizon, h);

    ReachReport report;
    report.start = atlas.normalize(start);
    report.grid = opts.grid;
    report.dwell = opts.dwell;
    report.horizon = opts.horizon;
    report.step = h;

    struct State {
        std::int64_t steps;
        Point rep;
    };
    std::unordered_map<std::int64_t, State> state;
    using Entry = std::pair<std::int64_t, std::int64_t>;  // (arrival steps, cell key)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;

    std::unordered_set<std::int64_t> pending;
    for (const auto& c : stop_when_visited) pending.insert(encode(opts.grid, c));

    auto mark = [&](const Point& p, std::int64_t steps) {
        const std::int64_t key = encode(opts.grid, cell_of(atlas, opts.grid, p));
        auto it = state.find(key);
        if (it != state.end() && it->second.steps <= steps) return;
        state[key] = State{steps, p};
        queue.emplace(steps, key);
        pending.erase(key);
    };
    mark(report.start, 0);

    const std::vector<VectorField> fields = sys.flow_fields();
    const bool targets = !stop_when_visited.empty();
    while (!queue.empty() && !(targets && pending.empty())) {
        const auto [steps, key] = queue.top();
        queue.pop();
        const State& s = state.at(key);
        if (s.steps != steps) continue;
        const std::int64_t budget = std::min(dwell_steps, horizon_steps - steps);
        if (budget <= 0) continue;
        const Point rep = s.rep;
        for (const auto& f : fields) {
            if (!f.defined_at(rep)) continue;
            if (max_abs(f(rep)) <= 1e-14) continue;
            Point p = rep;
            for (std::int64_t k = 1; k <= budget; ++k) {
                auto next = rk4_step(f, p, h);
                if (!next || !f.defined_at(*next)) break;
                p = *next;
                mark(p, steps + k);
                if (targets && pending.empty()) break;
            }
            if (targets && pending.empty()) break;
        }
    }
    report.stopped_early = targets && pending.empty() && !queue.empty();

    for (const auto& [key, s] : state) report.arrival.emplace(decode(opts.grid, key), static_cast<double>(s.steps) * h);
    report.total_cells = owned_cell_count(atlas, opts.grid);
    for (const auto& [c, t] : report.arrival)
        if (owned(atlas, opts.grid, c)) ++report.covered;
    report.coverage = report.total_cells ? static_cast<double>(report.covered) / report.total_cells : 0.0;
    return report;
}

ReachabilitySetResult is_reachability_set(const GeneratedSystem& sys, const std::vector<Point>& points,
                                          const ReachOptions& opts) {
    const Atlas& atlas = sys.atlas();
    std::vector<Cell> cells;
    std::vector<Point> canon;
    for (const auto& p : points) {
        canon.push_back(atlas.normalize(p));
        cells.push_back(cell_of(atlas, opts.grid, canon.back()));
    }
    ReachabilitySetResult out;
    out.holds = true;
    for (std::size_t i = 0; i < canon.size(); ++i) {
        ReachReport r = reach(sys, canon[i], opts, cells);
        std::vector<bool> row;
        for (const auto& c : cells) row.push_back(r.visited(c));
        out.holds = out.holds && std::all_of(row.begin(), row.end(), [](bool b) { return b; });
        out.witness.push_back(std::move(row));
    }
    return out;
}

std::vector<bool> stlc_probe(const GeneratedSystem& sys, const Point& x0, const std::vector<double>& times,
                             const ReachOptions& opts) {
    const Atlas& atlas = sys.atlas();
    const Point p = atlas.normalize(x0);
    const Cell home = cell_of(atlas, opts.grid, p);
    const std::vector<Cell> around = neighbors(atlas, opts.grid, home);
    std::vector<bool> out;
    for (double t : times) {
        ReachOptions o = opts;
        o.horizon = t;
        if (o.dwell > t) o.dwell = t;
        if (o.step <= 0.0) o.step = opts.dwell / 10.0;
        if (around.empty() || !(t > 0.0)) {
            out.push_back(false);
            continue;
        }
        ReachReport r = reach(sys, p, o, around);
        out.push_back(std::all_of(around.begin(), around.end(), [&](const Cell& c) { return r.visited(c); }));
    }
    return out;
}

void write_csv(std::ostream& os, const ReachReport& report) {
    os << "chart_id";
    for (std::size_t a = 0; a < report.grid.cells.size(); ++a) os << ",i" << a;
    os << ",arrival_time\n";
    char buf[64];
    for (const auto& [c, t] : report.arrival) {
        os << c.chart;
        for (int i : c.index) os << ',' << i;
        std::snprintf(buf, sizeof buf, "%.9g", t);
        os << ',' << buf << '\n';
    }
}

nlohmann::json summary_json(const ReachReport& report) {
    return nlohmann::json{{"start", {{"chart", report.start.chart}, {"coords", to_std(report.start.coords)}}},
                          {"grid", report.grid.cells},
                          {"dwell", report.dwell},
                          {"horizon", report.horizon},
                          {"step", report.step},
                          {"visited", report.arrival.size()},
                          {"covered", report.covered},
                          {"total_cells", report.total_cells},
                          {"coverage", report.coverage}};
}

bool visited_subset(const ReachReport& a, const ReachReport& b) {
    return std::all_of(a.arrival.begin(), a.arrival.end(), [&](const auto& kv) { return b.visited(kv.first); });
}

} // namespace tcs
