#include "tcs/smooth_map.hpp"

#include <algorithm>
#include <cmath>

namespace tcs {

SmoothMap::SmoothMap(AtlasPtr source, AtlasPtr target, ValueFn value, JacobianFn jacobian, std::string label)
    : source_(std::move(source)), target_(std::move(target)), value_(std::move(value)), jacobian_(std::move(jacobian)),
      label_(std::move(label)) {}

SmoothMap SmoothMap::identity(AtlasPtr atlas) {
    const int n = atlas->dim();
    return SmoothMap(
        atlas, atlas, [](const Point& p) { return p; }, [n](const Point&) { return Mat(Mat::Identity(n, n)); },
        "id");
}

SmoothMap SmoothMap::projection(AtlasPtr source, AtlasPtr target) {
    const int n = source->dim();
    const int m = target->dim();
    if (m > n) throw DimensionMismatch("projection onto a larger space");
    return SmoothMap(
        source, target, [m](const Point& p) { return Point{p.chart, p.coords.head(m)}; },
        [n, m](const Point&) {
            Mat j = Mat::Zero(m, n);
            j.leftCols(m).setIdentity();
            return j;
        },
        "projection");
}

Point SmoothMap::raw_value(const Point& p) const {
    if (p.coords.size() != source_->dim()) throw DimensionMismatch("map input of size " + std::to_string(p.coords.size()));
    Point out = value_(p);
    if (out.coords.size() != target_->dim()) throw DimensionMismatch("map output of size " + std::to_string(out.coords.size()));
    return out;
}

Located SmoothMap::image(const Point& p) const {
    Point raw = raw_value(p);
    auto loc = target_->locate(raw.chart, raw.coords);
    if (!loc) throw OutOfAtlas("image " + format_vec(raw.coords) + " of " + format_vec(p.coords) + " under " + label_);
    return *loc;
}

Point SmoothMap::operator()(const Point& p) const { return image(p).point; }

Mat SmoothMap::raw_jacobian(const Point& p) const {
    if (jacobian_) return jacobian_(p);
    CoordMap f = [&](const Vec& x) { return raw_value(Point{p.chart, x}).coords; };
    return finite_difference_jacobian(f, p.coords);
}

Mat SmoothMap::jacobian(const Point& p) const {
    Located loc = image(p);
    Mat raw = raw_jacobian(p);
    return loc.identity ? raw : Mat(loc.jacobian * raw);
}

SmoothMap SmoothMap::then(const SmoothMap& outer) const {
    SmoothMap inner = *this;
    ValueFn value = [inner, outer](const Point& p) { return outer.raw_value(inner(p)); };
    JacobianFn jac;
    if (analytic() && outer.analytic())
        jac = [inner, outer](const Point& p) { return Mat(outer.raw_jacobian(inner(p)) * inner.jacobian(p)); };
    return SmoothMap(source_, outer.target_ptr(), value, jac, outer.label() + " o " + label_);
}

Tangent pushforward(const SmoothMap& f, const Tangent& v) {
    if (v.components.size() != f.source().dim())
        throw DimensionMismatch("tangent of size " + std::to_string(v.components.size()) + " pushed through " + f.label());
    Located img = f.image(v.base);
    Mat raw = f.raw_jacobian(v.base);
    return Tangent{img.point, img.jacobian * (raw * v.components)};
}

int differential_rank(const SmoothMap& f, const Point& p) {
    // the absolute floor sits above central-difference noise
    return numerical_rank(Eigen::MatrixXd(f.jacobian(p)), 1e-8, 1e-10);
}

double jacobian_fd_error(const SmoothMap& f, Rng& rng, int samples) {
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        Point p = f.source().sample(rng);
        CoordMap raw = [&](const Vec& x) { return f.raw_value(Point{p.chart, x}).coords; };
        Mat fd = finite_difference_jacobian(raw, p.coords);
        Mat j = f.raw_jacobian(p);
        const double scale = std::max(1.0, j.cwiseAbs().maxCoeff());
        worst = std::max(worst, (fd - j).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

double normalization_commutation_error(const SmoothMap& f, Rng& rng, int samples) {
    double worst = 0.0;
    const Atlas& src = f.source();
    for (int s = 0; s < samples; ++s) {
        const int c = static_cast<int>(rng.index(static_cast<std::size_t>(src.chart_count())));
        Vec raw = src.sample_raw(c, rng);
        auto loc = src.locate(c, raw);
        if (!loc) continue;
        Point a = f(loc->point);
        Point b = f(Point{c, raw});
        worst = std::max(worst, f.target().distance(a, b));
    }
    return worst;
}

} // namespace tcs
