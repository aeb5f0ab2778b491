#include "tcs/system.hpp"

#include <algorithm>
#include <cmath>

namespace tcs {

GeneratedSystem::GeneratedSystem(AtlasPtr atlas, std::vector<VectorField> generators, std::string label)
    : atlas_(std::move(atlas)), generators_(std::move(generators)), label_(std::move(label)) {
    for (const auto& g : generators_)
        if (g.atlas().dim() != atlas_->dim()) throw DimensionMismatch("generator '" + g.label() + "' lives on another atlas");
}

GeneratedSystem GeneratedSystem::with_kernel(std::shared_ptr<const KernelSections> kernel) const {
    GeneratedSystem out = *this;
    out.kernel_ = std::move(kernel);
    return out;
}

GeneratedSystem GeneratedSystem::with_generators(std::vector<VectorField> generators, std::string label) const {
    GeneratedSystem out(atlas_, std::move(generators), std::move(label));
    out.kernel_ = kernel_;
    return out;
}

std::vector<VectorField> GeneratedSystem::flow_fields() const {
    std::vector<VectorField> out = generators_;
    if (kernel_) {
        for (const auto& k : kernel_->fields) {
            const bool listed = std::any_of(generators_.begin(), generators_.end(), [&](const VectorField& g) { return g.same_as(k); });
            if (!listed) out.push_back(k);
            out.push_back(k.scaled(-1.0));
        }
    }
    return out;
}

GeneratedSystem restrict(const GeneratedSystem& sys, const Region& box) {
    if (box.empty()) throw EmptyRestriction();
    const Chart& c = sys.atlas().chart(box.chart);
    if (box.lo.size() != sys.atlas().dim() || box.hi.size() != sys.atlas().dim())
        throw DimensionMismatch("restriction box");
    for (int a = 0; a < sys.atlas().dim(); ++a)
        if (box.lo(a) < c.lo(a) || box.hi(a) > c.hi(a))
            throw OutOfAtlas("restriction box leaves chart " + std::to_string(box.chart));
    std::vector<VectorField> gens;
    gens.reserve(sys.generators().size());
    for (const auto& g : sys.generators()) gens.push_back(g.restricted(box));
    return sys.with_generators(std::move(gens), sys.label() + "|box");
}

Schedule::Schedule(std::vector<Segment> segments) {
    for (auto& s : segments) hold(s.selector, s.duration);
}

Schedule& Schedule::hold(Selector selector, double duration) {
    if (!(duration >= 0.0)) throw DimensionMismatch("negative segment duration");
    segments_.push_back(Segment{std::move(selector), duration});
    total_ += duration;
    return *this;
}

Schedule Schedule::then(const Schedule& next) const {
    Schedule out = *this;
    for (const auto& s : next.segments()) out.hold(s.selector, s.duration);
    return out;
}

std::optional<Point> rk4_step(const VectorField& field, const Point& p, double h) {
    const Atlas& atlas = field.atlas();
    const int w = atlas.working_chart(p);
    Vec x = p.coords;
    if (w != p.chart) {
        auto loc = atlas.express_in(p, w);
        if (!loc) return std::nullopt;
        x = loc->point.coords;
    }
    auto k1 = field.in_chart(w, x);
    if (!k1) return std::nullopt;
    auto k2 = field.in_chart(w, x + 0.5 * h * *k1);
    if (!k2) return std::nullopt;
    auto k3 = field.in_chart(w, x + 0.5 * h * *k2);
    if (!k3) return std::nullopt;
    auto k4 = field.in_chart(w, x + h * *k3);
    if (!k4) return std::nullopt;
    Vec next = x + (h / 6.0) * (*k1 + 2.0 * *k2 + 2.0 * *k3 + *k4);
    auto loc = atlas.locate(w, next);
    if (!loc) return std::nullopt;
    return loc->point;
}

VectorField resolve(const GeneratedSystem& sys, const Selector& selector) {
    if (const auto* g = std::get_if<GeneratorIndex>(&selector)) {
        if (g->index >= sys.generators().size())
            throw UnresolvedSelector("generator index " + std::to_string(g->index) + " of " +
                                     std::to_string(sys.generators().size()));
        return sys.generators()[g->index];
    }
    if (const auto* k = std::get_if<KernelCoefficients>(&selector)) {
        if (!sys.kernel()) throw UnresolvedSelector("kernel coefficients on a system without kernel sections");
        if (static_cast<std::size_t>(k->c.size()) != sys.kernel()->fields.size())
            throw UnresolvedSelector("kernel coefficient vector of size " + std::to_string(k->c.size()) + " for " +
                                     std::to_string(sys.kernel()->fields.size()) + " sections");
        return combine(sys.kernel()->fields, k->c, "kernel" + format_vec(k->c));
    }
    throw UnresolvedSelector("control values need a control system");
}

PartialTrajectory integrate_until_escape(const GeneratedSystem& sys, const Point& start, const Schedule& schedule,
                                         double h) {
    if (!(h > 0.0)) throw DimensionMismatch("integrator step must be positive");
    PartialTrajectory out;
    Trajectory& traj = out.trajectory;
    traj.schedule = schedule;
    traj.step = h;
    const Point p0 = sys.atlas().normalize(start);
    traj.times.push_back(0.0);
    traj.points.push_back(p0);
    double t0 = 0.0;
    for (const auto& seg : schedule.segments()) {
        VectorField field = resolve(sys, seg.selector);
        if (seg.duration <= 0.0) continue;
        FlowOutcome f = flow(field, traj.points.back(), seg.duration, h, [&](double t, const Point& p) {
            traj.times.push_back(t0 + t);
            traj.points.push_back(p);
        });
        if (f.escaped) {
            out.escape_time = t0 + f.elapsed;
            return out;
        }
        t0 += seg.duration;
    }
    return out;
}

Trajectory integrate(const GeneratedSystem& sys, const Point& start, const Schedule& schedule, double h) {
    // resolve everything up front so a bad selector fails before any flow
    for (const auto& seg : schedule.segments()) (void)resolve(sys, seg.selector);
    PartialTrajectory p = integrate_until_escape(sys, start, schedule, h);
    if (p.escape_time) throw Escape(*p.escape_time);
    return std::move(p.trajectory);
}

double min_pointwise_singular_value(const std::vector<VectorField>& fields, Rng& rng, int samples) {
    if (fields.empty()) return std::numeric_limits<double>::infinity();
    const Atlas& atlas = fields.front().atlas();
    double lowest = std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
        Point p = atlas.sample(rng);
        Eigen::MatrixXd m(atlas.dim(), static_cast<Eigen::Index>(fields.size()));
        for (std::size_t i = 0; i < fields.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = fields[i](p);
        if (m.cols() > m.rows()) return 0.0;
        Eigen::VectorXd sv = singular_values(m);
        lowest = std::min(lowest, sv.size() ? sv(sv.size() - 1) : 0.0);
    }
    return lowest;
}

} // namespace tcs
