#pragma once

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tcs/errors.hpp"
#include "tcs/linalg.hpp"
#include "tcs/rng.hpp"

namespace tcs {

/// A state in chart coordinates. Canonical points come out of Atlas::normalize.
struct Point {
    int chart = 0;
    Vec coords;
};

/// A tangent vector in the chart frame of its base point.
struct Tangent {
    Point base;
    Vec components;
};

/// Per-axis identification rule of a chart box.
///
/// A periodic axis identifies `lo` with `hi`. Every odd number of wraps also
/// reflects the `flips` axes through the middle of their interval, which is
/// how the Moebius band glues (0, y) to (1, 1 - y).
struct AxisGluing {
    bool periodic = false;
    std::vector<int> flips;
};

struct Chart {
    Vec lo;
    Vec hi;
    std::vector<AxisGluing> axes;
};

using CoordMap = std::function<Vec(const Vec&)>;
using CoordJacobian = std::function<Mat(const Vec&)>;
using MetricFn = std::function<Mat(int chart, const Vec& coords)>;

/// Coordinate change defined on the overlap of two charts.
struct Transition {
    int from = 0;
    int to = 0;
    CoordMap map;
    CoordJacobian jacobian;  // central differences when empty
};

/// Canonical point plus d(canonical coords)/d(raw coords).
struct Located {
    Point point;
    Mat jacobian;
    bool identity = true;
};

/// Finite chart atlas over open boxes.
///
/// Chart ids are positions in the chart list. A raw point belongs to the atlas
/// if gluing it inside its own chart lands strictly inside the box; its
/// canonical representative lives in the lowest-index chart that contains it.
class Atlas {
public:
    Atlas(std::string name, int dim, std::vector<Chart> charts);

    static Atlas box(std::string name, const Vec& lo, const Vec& hi);
    static Atlas circle(std::string name, double period = 2.0 * 3.14159265358979323846);
    /// [0,1) x (0,1) with (x, y) ~ (x + 1, 1 - y).
    static Atlas mobius(std::string name);
    static Atlas torus(std::string name, double period = 2.0 * 3.14159265358979323846);

    Atlas& set_metric(MetricFn metric);
    /// Explicit overlap maps. With `shared_coordinates` every pair of charts
    /// without an explicit entry is related by the identity.
    Atlas& set_transitions(std::vector<Transition> transitions, bool shared_coordinates);
    Atlas& set_coord_names(std::vector<std::string> names);

    const std::string& name() const { return name_; }
    int dim() const { return dim_; }
    int chart_count() const { return static_cast<int>(charts_.size()); }
    const Chart& chart(int id) const;
    const std::vector<std::string>& coord_names() const { return coord_names_; }
    bool has_metric() const { return static_cast<bool>(metric_); }
    bool shared_coordinates() const { return shared_; }
    const std::vector<Transition>& transitions() const { return transitions_; }

    std::optional<Located> locate(int chart, const Vec& raw) const;
    /// Throws OutOfAtlas when the raw point is not in the chart's glued domain.
    Point normalize(int chart, const Vec& raw) const;
    Point normalize(const Point& raw) const { return normalize(raw.chart, raw.coords); }

    /// Coordinates of a canonical point in another chart, if it lies there.
    std::optional<Located> express_in(const Point& p, int chart) const;
    /// Chart in which `p` is farthest from an open boundary (ties: lowest id).
    int working_chart(const Point& p) const;
    double margin(int chart, const Vec& coords) const;
    bool inside_box(int chart, const Vec& coords) const;

    Mat metric(int chart, const Vec& coords) const;

    /// Shortest chart displacement from `a` to `b` over wrap images of `b`.
    Vec difference(const Point& a, const Point& b) const;
    double distance(const Point& a, const Point& b) const { return difference(a, b).norm(); }

    Tangent transport(const Tangent& v, int chart) const;

    /// Uniform chart, then uniform coordinates in its box; canonicalised.
    Point sample(Rng& rng) const;
    /// Raw coordinates in the glued domain of `chart`, periodic axes spread
    /// over `wraps` periods on either side.
    Vec sample_raw(int chart, Rng& rng, int wraps = 2) const;

private:
    struct Glued {
        Vec coords;
        Vec signs;
    };
    Glued glue_self(int chart, const Vec& raw) const;
    const Transition* find_transition(int from, int to) const;
    std::optional<std::pair<Vec, Mat>> apply_transition(int from, int to, const Vec& coords) const;

    std::string name_;
    int dim_;
    std::vector<Chart> charts_;
    std::vector<Transition> transitions_;
    std::map<std::pair<int, int>, std::size_t> transition_index_;
    bool shared_ = true;
    MetricFn metric_;
    std::vector<std::string> coord_names_;
};

using AtlasPtr = std::shared_ptr<const Atlas>;

/// Central-difference Jacobian with per-coordinate step 1e-6 * max(1, |x_i|).
Mat finite_difference_jacobian(const CoordMap& f, const Vec& x);

/// Largest |T(raw) - FD| / max(1, |T|) over sampled overlap points of every explicit transition.
double transition_jacobian_error(const Atlas& atlas, Rng& rng, int samples);

/// max ||J^T g(canonical) J - g(raw)|| over raw samples; 0 for the Euclidean default.
double metric_compatibility_residual(const Atlas& atlas, Rng& rng, int samples);

/// Smallest metric eigenvalue over canonical samples.
double metric_min_eigenvalue(const Atlas& atlas, Rng& rng, int samples);

} // namespace tcs
