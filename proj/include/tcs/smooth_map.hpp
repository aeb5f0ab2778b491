#pragma once

#include <functional>
#include <string>

#include "tcs/atlas.hpp"

namespace tcs {

/// Smooth map between atlases, given chart-wise.
///
/// The value function takes raw source coordinates (possibly outside the box
/// along a glued axis) and returns raw target coordinates. Differentials are
/// taken on these raw formulas and then composed with the target gluing.
class SmoothMap {
public:
    using ValueFn = std::function<Point(const Point& raw_source)>;
    using JacobianFn = std::function<Mat(const Point& raw_source)>;

    SmoothMap(AtlasPtr source, AtlasPtr target, ValueFn value, JacobianFn jacobian = {}, std::string label = {});

    static SmoothMap identity(AtlasPtr atlas);
    /// (x_0..x_{n-1}) -> (x_0..x_{m-1}) with the same chart id.
    static SmoothMap projection(AtlasPtr source, AtlasPtr target);

    const Atlas& source() const { return *source_; }
    const Atlas& target() const { return *target_; }
    const AtlasPtr& source_ptr() const { return source_; }
    const AtlasPtr& target_ptr() const { return target_; }
    const std::string& label() const { return label_; }
    bool analytic() const { return static_cast<bool>(jacobian_); }

    Point raw_value(const Point& p) const;
    /// Canonical image; throws OutOfAtlas.
    Point operator()(const Point& p) const;
    /// Canonical image with the target gluing Jacobian.
    Located image(const Point& p) const;
    /// d(raw target)/d(source coords): analytic if supplied, else central differences.
    Mat raw_jacobian(const Point& p) const;
    /// d(canonical target)/d(source coords).
    Mat jacobian(const Point& p) const;

    SmoothMap then(const SmoothMap& outer) const;

private:
    AtlasPtr source_;
    AtlasPtr target_;
    ValueFn value_;
    JacobianFn jacobian_;
    std::string label_;
};

Tangent pushforward(const SmoothMap& f, const Tangent& v);

/// Rank of dPhi(p) with threshold max(1e-8 * sigma_max, 1e-10).
int differential_rank(const SmoothMap& f, const Point& p);

/// max over sampled points of |J - J_fd| / max(1, |J|).
double jacobian_fd_error(const SmoothMap& f, Rng& rng, int samples);

/// max distance between f(normalize(raw)) and normalize(f(raw)) over raw samples.
double normalization_commutation_error(const SmoothMap& f, Rng& rng, int samples);

} // namespace tcs
