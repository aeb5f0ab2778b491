#include "tcs/control.hpp"

#include <algorithm>

namespace tcs {

ControlSystem::ControlSystem(AtlasPtr atlas, std::vector<Vec> controls, FieldMap field, std::string label)
    : atlas_(std::move(atlas)), points_(std::move(controls)), field_(std::move(field)), label_(std::move(label)) {
    if (points_.empty()) throw ControlOutOfSet("empty control set");
    for (const auto& u : points_)
        if (u.size() != points_.front().size()) throw DimensionMismatch("control points of mixed size");
}

ControlSystem::ControlSystem(AtlasPtr atlas, ControlBox box, FieldMap field, std::string label)
    : atlas_(std::move(atlas)), box_(std::move(box)), field_(std::move(field)), label_(std::move(label)) {
    if (box_->lo.size() != box_->hi.size()) throw DimensionMismatch("control box bounds");
    for (Eigen::Index i = 0; i < box_->lo.size(); ++i)
        if (box_->lo(i) > box_->hi(i)) throw ControlOutOfSet("empty control box");
}

namespace {

ControlSystem::FieldMap affine_map(const VectorField& drift, const std::vector<VectorField>& controls) {
    return [drift, controls](int chart, const Vec& x, const Vec& u) {
        if (static_cast<std::size_t>(u.size()) != controls.size())
            throw DimensionMismatch("control of size " + std::to_string(u.size()));
        Vec out = drift.raw(chart, x);
        for (std::size_t a = 0; a < controls.size(); ++a) out += u(static_cast<Eigen::Index>(a)) * controls[a].raw(chart, x);
        return out;
    };
}

} // namespace

ControlSystem ControlSystem::affine(VectorField drift, std::vector<VectorField> controls, std::vector<Vec> control_points,
                                   std::string label) {
    auto atlas = drift.atlas_ptr();
    ControlSystem cs(atlas, std::move(control_points), affine_map(drift, controls), std::move(label));
    cs.affine_ = Affine{std::move(drift), std::move(controls)};
    return cs;
}

ControlSystem ControlSystem::affine(VectorField drift, std::vector<VectorField> controls, ControlBox box,
                                   std::string label) {
    auto atlas = drift.atlas_ptr();
    ControlSystem cs(atlas, std::move(box), affine_map(drift, controls), std::move(label));
    cs.affine_ = Affine{std::move(drift), std::move(controls)};
    return cs;
}

int ControlSystem::control_dim() const {
    return static_cast<int>(box_ ? box_->lo.size() : points_.front().size());
}

bool ControlSystem::contains(const Vec& u) const {
    if (u.size() != control_dim()) return false;
    if (box_) {
        for (Eigen::Index i = 0; i < u.size(); ++i)
            if (u(i) < box_->lo(i) - 1e-12 || u(i) > box_->hi(i) + 1e-12) return false;
        return true;
    }
    return std::any_of(points_.begin(), points_.end(), [&](const Vec& p) { return max_abs(p - u) <= 1e-12; });
}

Vec ControlSystem::operator()(const Point& p, const Vec& u) const {
    if (!generator_slices_.empty()) return slice(u)(p);
    return field_(p.chart, p.coords, u);
}

VectorField ControlSystem::slice(const Vec& u) const {
    if (!contains(u)) throw ControlOutOfSet(format_vec(u) + " for " + label_);
    if (!generator_slices_.empty()) {
        const auto i = static_cast<std::size_t>(std::llround(u(0)));
        return generator_slices_[i];
    }
    FieldMap f = field_;
    Vec frozen = u;
    return VectorField(
        atlas_, [f, frozen](int chart, const Vec& x) { return f(chart, x, frozen); }, label_ + "^" + format_vec(u));
}

std::vector<std::pair<VectorField, double>> slice(const ControlSystem& cs, const Schedule& mu) {
    std::vector<std::pair<VectorField, double>> out;
    for (const auto& seg : mu.segments()) {
        const auto* u = std::get_if<ControlValue>(&seg.selector);
        if (!u) throw UnresolvedSelector("control signal segment without a control value");
        out.emplace_back(cs.slice(u->u), seg.duration);
    }
    return out;
}

Trajectory integrate(const ControlSystem& cs, const Point& start, const Schedule& mu, double h) {
    auto pieces = slice(cs, mu);
    std::vector<VectorField> fields;
    Schedule indexed;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        fields.push_back(pieces[i].first);
        indexed.generator(i, pieces[i].second);
    }
    Trajectory t = integrate(GeneratedSystem(cs.atlas_ptr(), fields, cs.label()), start, indexed, h);
    t.schedule = mu;
    return t;
}

GeneratedSystem tcs_from_control_system(const ControlSystem& cs, const std::vector<Vec>& controls) {
    const std::vector<Vec>& us = controls.empty() ? cs.control_points() : controls;
    if (us.empty()) throw ControlOutOfSet("no controls sampled from a control box");
    std::vector<VectorField> gens;
    gens.reserve(us.size());
    for (const auto& u : us) gens.push_back(cs.slice(u));
    return GeneratedSystem(cs.atlas_ptr(), std::move(gens), "G[" + cs.label() + "]");
}

ControlSystem control_system_from_tcs(const GeneratedSystem& sys) {
    if (sys.generators().empty()) throw ControlOutOfSet("system without generators");
    std::vector<Vec> indices;
    for (std::size_t i = 0; i < sys.generators().size(); ++i) indices.push_back(make_vec({static_cast<double>(i)}));
    auto gens = sys.generators();
    ControlSystem cs(
        sys.atlas_ptr(), std::move(indices),
        [gens](int chart, const Vec& x, const Vec& u) { return gens[static_cast<std::size_t>(std::llround(u(0)))].raw(chart, x); },
        "Sigma[" + sys.label() + "]");
    cs.generator_slices_ = sys.generators();
    return cs;
}

bool same_generators(const std::vector<VectorField>& a, const std::vector<VectorField>& b, Rng& rng, int samples) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].same_as(b[i])) continue;
        for (int s = 0; s < samples; ++s) {
            Point p = a[i].atlas().sample(rng);
            if (a[i](p) != b[i](p)) return false;
        }
    }
    return true;
}

double affine_decomposition_residual(const ControlSystem& cs, Rng& rng, int samples) {
    const auto& aff = cs.affine_decomposition();
    if (!aff) return 0.0;
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        Point p = cs.atlas().sample(rng);
        Vec u(cs.control_dim());
        if (cs.finite()) {
            u = cs.control_points()[rng.index(cs.control_points().size())];
        } else {
            for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.uniform(cs.box()->lo(i), cs.box()->hi(i));
        }
        Vec expect = aff->drift(p);
        for (std::size_t a = 0; a < aff->controls.size(); ++a) expect += u(static_cast<Eigen::Index>(a)) * aff->controls[a](p);
        worst = std::max(worst, max_abs(cs(p, u) - expect));
    }
    return worst;
}

} // namespace tcs
