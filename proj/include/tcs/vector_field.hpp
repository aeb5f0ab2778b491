#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tcs/atlas.hpp"

namespace tcs {

/// Axis-aligned open sub-box of one chart.
struct Region {
    int chart = 0;
    Vec lo;
    Vec hi;

    bool empty() const;
    bool contains(const Atlas& atlas, const Point& p) const;
};

/// Vector field given by chart components.
///
/// The component function is a chart formula: it may be called at raw
/// coordinates outside the box, which is what the overlap compatibility
/// check probes. Flows and lifts go through `in_chart`, which evaluates at the
/// canonical point and carries the result back into the requested frame.
class VectorField {
public:
    using ComponentFn = std::function<Vec(int chart, const Vec& coords)>;
    using DomainFn = std::function<bool(const Point&)>;

    VectorField(AtlasPtr atlas, ComponentFn components, std::string label = {});

    static VectorField zero(AtlasPtr atlas);
    static VectorField constant(AtlasPtr atlas, const Vec& components, std::string label = {});

    Vec operator()(const Point& p) const { return impl_->components(p.chart, p.coords); }
    Vec raw(int chart, const Vec& coords) const { return impl_->components(chart, coords); }
    Tangent at(const Point& p) const { return Tangent{p, (*this)(p)}; }

    /// Components in the frame of `chart` at raw coordinates, or nullopt if the
    /// raw point is outside the atlas.
    std::optional<Vec> in_chart(int chart, const Vec& raw) const;

    bool defined_at(const Point& p) const { return !impl_->domain || impl_->domain(p); }
    VectorField restricted(DomainFn domain, std::string label = {}) const;
    VectorField restricted(const Region& region) const;
    const DomainFn& domain() const { return impl_->domain; }

    VectorField scaled(double a) const;
    VectorField operator+(const VectorField& other) const;

    const Atlas& atlas() const { return *impl_->atlas; }
    const AtlasPtr& atlas_ptr() const { return impl_->atlas; }
    const std::string& label() const { return impl_->label; }

    /// True when both handles share one definition.
    bool same_as(const VectorField& other) const { return impl_ == other.impl_; }

private:
    struct Impl {
        AtlasPtr atlas;
        ComponentFn components;
        DomainFn domain;
        std::string label;
    };
    explicit VectorField(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

    std::shared_ptr<const Impl> impl_;
};

/// sum_i c_i X_i, all fields on one atlas.
VectorField combine(const std::vector<VectorField>& fields, const Vec& coefficients, std::string label = {});

/// max || J * X_formula(raw) - X(canonical) || over raw points in glued and
/// overlapping positions. Zero for globally defined fields.
double overlap_compatibility_residual(const VectorField& field, Rng& rng, int samples);

} // namespace tcs
