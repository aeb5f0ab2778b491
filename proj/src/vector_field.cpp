#include "tcs/vector_field.hpp"

#include <algorithm>

namespace tcs {

bool Region::empty() const {
    for (Eigen::Index i = 0; i < lo.size(); ++i)
        if (!(lo(i) < hi(i))) return true;
    return false;
}

bool Region::contains(const Atlas& atlas, const Point& p) const {
    auto loc = atlas.express_in(p, chart);
    if (!loc) return false;
    const Vec& x = loc->point.coords;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!(x(i) > lo(i) && x(i) < hi(i))) return false;
    return true;
}

VectorField::VectorField(AtlasPtr atlas, ComponentFn components, std::string label)
    : impl_(std::make_shared<Impl>(Impl{std::move(atlas), std::move(components), {}, std::move(label)})) {}

VectorField VectorField::zero(AtlasPtr atlas) {
    const int n = atlas->dim();
    return VectorField(atlas, [n](int, const Vec&) { return Vec(Vec::Zero(n)); }, "0");
}

VectorField VectorField::constant(AtlasPtr atlas, const Vec& components, std::string label) {
    if (components.size() != atlas->dim()) throw DimensionMismatch("constant field components");
    return VectorField(atlas, [components](int, const Vec&) { return components; }, std::move(label));
}

std::optional<Vec> VectorField::in_chart(int chart, const Vec& raw) const {
    auto loc = impl_->atlas->locate(chart, raw);
    if (!loc) return std::nullopt;
    Vec v = (*this)(loc->point);
    if (loc->identity) return v;
    return Vec(loc->jacobian.partialPivLu().solve(v));
}

VectorField VectorField::restricted(DomainFn domain, std::string label) const {
    auto impl = std::make_shared<Impl>(*impl_);
    if (impl_->domain) {
        DomainFn outer = impl_->domain;
        impl->domain = [outer, domain](const Point& p) { return outer(p) && domain(p); };
    } else {
        impl->domain = std::move(domain);
    }
    if (!label.empty()) impl->label = std::move(label);
    return VectorField(std::shared_ptr<const Impl>(impl));
}

VectorField VectorField::restricted(const Region& region) const {
    if (region.empty()) throw EmptyRestriction();
    AtlasPtr atlas = impl_->atlas;
    return restricted([atlas, region](const Point& p) { return region.contains(*atlas, p); }, label() + "|box");
}

VectorField VectorField::scaled(double a) const {
    VectorField self = *this;
    auto out = VectorField(
        impl_->atlas, [self, a](int c, const Vec& x) { return Vec(a * self.raw(c, x)); },
        std::to_string(a) + "*" + label());
    return impl_->domain ? out.restricted(impl_->domain) : out;
}

VectorField VectorField::operator+(const VectorField& other) const {
    VectorField a = *this;
    VectorField b = other;
    auto out = VectorField(
        impl_->atlas, [a, b](int c, const Vec& x) { return Vec(a.raw(c, x) + b.raw(c, x)); },
        label() + "+" + other.label());
    if (!impl_->domain && !other.domain()) return out;
    return out.restricted([a, b](const Point& p) { return a.defined_at(p) && b.defined_at(p); });
}

VectorField combine(const std::vector<VectorField>& fields, const Vec& coefficients, std::string label) {
    if (fields.empty()) throw DimensionMismatch("combination of no fields");
    if (static_cast<std::size_t>(coefficients.size()) != fields.size())
        throw DimensionMismatch("coefficient vector of size " + std::to_string(coefficients.size()) + " for " +
                                std::to_string(fields.size()) + " fields");
    auto fs = fields;
    const Vec c = coefficients;
    const int n = fields.front().atlas().dim();
    return VectorField(
        fields.front().atlas_ptr(),
        [fs, c, n](int chart, const Vec& x) {
            Vec out = Vec::Zero(n);
            for (std::size_t i = 0; i < fs.size(); ++i)
                if (c(static_cast<Eigen::Index>(i)) != 0.0) out += c(static_cast<Eigen::Index>(i)) * fs[i].raw(chart, x);
            return out;
        },
        std::move(label));
}

double overlap_compatibility_residual(const VectorField& field, Rng& rng, int samples) {
    const Atlas& atlas = field.atlas();
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const int c = static_cast<int>(rng.index(static_cast<std::size_t>(atlas.chart_count())));
        Vec raw = atlas.sample_raw(c, rng, 1);
        auto loc = atlas.locate(c, raw);
        if (!loc) continue;
        Vec moved = loc->jacobian * field.raw(c, raw);
        worst = std::max(worst, max_abs(moved - field(loc->point)));
    }
    return worst;
}

} // namespace tcs
