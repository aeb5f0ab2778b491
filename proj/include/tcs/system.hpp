#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tcs/vector_field.hpp"

namespace tcs {

/// Chart-local sections of the vertical distribution that a system may switch
/// on. `global` records whether every section glued across the atlas.
struct KernelSections {
    std::vector<VectorField> fields;
    bool global = false;
    std::string label;
};

/// Globally generated tautological control system on an atlas, optionally
/// extended by kernel sections selected through coefficient vectors.
class GeneratedSystem {
public:
    GeneratedSystem(AtlasPtr atlas, std::vector<VectorField> generators, std::string label = {});

    const Atlas& atlas() const { return *atlas_; }
    const AtlasPtr& atlas_ptr() const { return atlas_; }
    const std::vector<VectorField>& generators() const { return generators_; }
    const std::string& label() const { return label_; }
    const std::shared_ptr<const KernelSections>& kernel() const { return kernel_; }

    GeneratedSystem with_kernel(std::shared_ptr<const KernelSections> kernel) const;
    GeneratedSystem with_generators(std::vector<VectorField> generators, std::string label) const;

    /// Every field a reach search flows: generators, then each kernel section with both signs.
    std::vector<VectorField> flow_fields() const;

private:
    AtlasPtr atlas_;
    std::vector<VectorField> generators_;
    std::shared_ptr<const KernelSections> kernel_;
    std::string label_;
};

/// Restrict every generator to an open sub-box of one chart.
GeneratedSystem restrict(const GeneratedSystem& sys, const Region& box);

struct GeneratorIndex {
    std::size_t index = 0;
};
struct ControlValue {
    Vec u;
};
struct KernelCoefficients {
    Vec c;
};
using Selector = std::variant<GeneratorIndex, ControlValue, KernelCoefficients>;

struct Segment {
    Selector selector;
    double duration = 0.0;
};

/// Piecewise-constant open-loop law.
class Schedule {
public:
    Schedule() = default;
    explicit Schedule(std::vector<Segment> segments);

    Schedule& hold(Selector selector, double duration);
    Schedule& generator(std::size_t index, double duration) { return hold(GeneratorIndex{index}, duration); }
    Schedule& control(const Vec& u, double duration) { return hold(ControlValue{u}, duration); }
    Schedule& kernel(const Vec& c, double duration) { return hold(KernelCoefficients{c}, duration); }

    const std::vector<Segment>& segments() const { return segments_; }
    double total_duration() const { return total_; }
    Schedule then(const Schedule& next) const;

private:
    std::vector<Segment> segments_;
    double total_ = 0.0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Point> points;
    Schedule schedule;
    double step = 0.0;

    const Point& end() const { return points.back(); }
};

/// One classical fourth-order step from canonical `p`, taken in the chart
/// where `p` is farthest from a boundary. nullopt when any stage leaves the atlas.
std::optional<Point> rk4_step(const VectorField& field, const Point& p, double h);

/// Result of flowing one field: the samples and the escape time if any.
struct FlowOutcome {
    Point end;
    double elapsed = 0.0;
    bool escaped = false;
};

/// Flow `field` for `duration` with full steps of `h` and one final partial
/// step. `visit(t, point)` sees every sample after the start.
template <class Visit>
FlowOutcome flow(const VectorField& field, const Point& start, double duration, double h, Visit&& visit) {
    FlowOutcome out{start, 0.0, false};
    if (duration <= 0.0) return out;
    const auto full = static_cast<long>(duration / h + 1e-9);
    for (long k = 1; k <= full + 1; ++k) {
        double t = static_cast<double>(k) * h;
        double dt = h;
        if (k == full + 1) {
            dt = duration - static_cast<double>(full) * h;
            if (dt <= 1e-12 * h) break;
            t = duration;
        }
        auto next = rk4_step(field, out.end, dt);
        if (!next) {
            out.escaped = true;
            return out;
        }
        out.end = *next;
        out.elapsed = t;
        visit(t, out.end);
    }
    return out;
}

/// Field selected by one schedule segment.
VectorField resolve(const GeneratedSystem& sys, const Selector& selector);

/// Integrate a schedule. Throws Escape(t) when the flow leaves the atlas and
/// UnresolvedSelector for selectors the system cannot interpret.
Trajectory integrate(const GeneratedSystem& sys, const Point& start, const Schedule& schedule, double h);

/// Same as integrate, but returns the samples up to the escape instead of throwing.
struct PartialTrajectory {
    Trajectory trajectory;
    std::optional<double> escape_time;
};
PartialTrajectory integrate_until_escape(const GeneratedSystem& sys, const Point& start, const Schedule& schedule,
                                         double h);

/// Pointwise independence of a field family: smallest singular value of the
/// stacked components over sampled points.
double min_pointwise_singular_value(const std::vector<VectorField>& fields, Rng& rng, int samples);

} // namespace tcs
