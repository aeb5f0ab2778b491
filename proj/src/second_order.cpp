#include "tcs/second_order.hpp"

#include <algorithm>
#include <cmath>

namespace tcs {

TangentAtlas tangent_atlas(AtlasPtr base, double velocity_bound) {
    if (!(velocity_bound > 0.0)) throw DimensionMismatch("velocity bound must be positive");
    const int n = base->dim();
    if (2 * n > kMaxDim) throw DimensionMismatch("tangent atlas of a " + std::to_string(n) + "-dimensional base");
    std::vector<Chart> charts;
    for (int c = 0; c < base->chart_count(); ++c) {
        const Chart& b = base->chart(c);
        Chart t;
        t.lo = Vec(2 * n);
        t.hi = Vec(2 * n);
        t.lo.head(n) = b.lo;
        t.hi.head(n) = b.hi;
        t.lo.tail(n).setConstant(-velocity_bound);
        t.hi.tail(n).setConstant(velocity_bound);
        t.axes.resize(static_cast<std::size_t>(2 * n));
        for (int a = 0; a < n; ++a) {
            AxisGluing g = b.axes[static_cast<std::size_t>(a)];
            const std::vector<int> flips = g.flips;
            for (int f : flips) g.flips.push_back(n + f);
            t.axes[static_cast<std::size_t>(a)] = g;
        }
        charts.push_back(std::move(t));
    }
    auto atlas = std::make_shared<Atlas>("T" + base->name(), 2 * n, std::move(charts));
    std::vector<Transition> lifted;
    for (const auto& tr : base->transitions()) {
        Transition t{tr.from, tr.to, {}, {}};
        CoordMap map = tr.map;
        CoordJacobian jac = tr.jacobian;
        t.map = [map, jac, n](const Vec& xy) {
            const Vec x = xy.head(n);
            const Mat j = jac ? jac(x) : finite_difference_jacobian(map, x);
            Vec out(2 * n);
            out.head(n) = map(x);
            out.tail(n) = j * xy.tail(n);
            return out;
        };
        lifted.push_back(std::move(t));
    }
    atlas->set_transitions(std::move(lifted), base->shared_coordinates());
    std::vector<std::string> names = base->coord_names();
    for (int a = 0; a < n; ++a) names.push_back("v_" + base->coord_names()[static_cast<std::size_t>(a)]);
    atlas->set_coord_names(std::move(names));
    AtlasPtr tangent = atlas;
    return TangentAtlas{base, tangent, SmoothMap::projection(tangent, base)};
}

double tangent_block_residual(const TangentAtlas& ta, Rng& rng, int samples) {
    const int n = ta.base_dim();
    const double bound = ta.atlas->chart(0).hi(n);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const int c = static_cast<int>(rng.index(static_cast<std::size_t>(ta.base->chart_count())));
        Vec raw(2 * n);
        raw.head(n) = ta.base->sample_raw(c, rng, 1);
        for (int a = 0; a < n; ++a) raw(n + a) = rng.open(-0.5 * bound, 0.5 * bound);
        auto up = ta.atlas->locate(c, raw);
        auto down = ta.base->locate(c, raw.head(n));
        if (!up || !down) continue;
        const Mat& j = up->jacobian;
        worst = std::max({worst, j.topRightCorner(n, n).cwiseAbs().maxCoeff(),
                          (j.topLeftCorner(n, n) - down->jacobian).cwiseAbs().maxCoeff(),
                          (j.bottomRightCorner(n, n) - down->jacobian).cwiseAbs().maxCoeff()});
    }
    return worst;
}

SecondOrderSystem::SecondOrderSystem(TangentAtlas ta, VectorField drift, std::vector<VectorField> controls,
                                     std::string label)
    : ta_(std::move(ta)), drift_(std::move(drift)), controls_(std::move(controls)), label_(std::move(label)) {
    if (drift_.atlas().dim() != ta_.atlas->dim()) throw DimensionMismatch("drift off the tangent atlas");
    for (const auto& f : controls_)
        if (f.atlas().dim() != ta_.atlas->dim()) throw DimensionMismatch("control field off the tangent atlas");
}

SecondOrderSystem SecondOrderSystem::from_local(TangentAtlas ta, LocalData local, std::string label) {
    const int n = ta.base_dim();
    LocalFn gamma = local.gamma;
    VectorField drift(
        ta.atlas,
        [gamma, n](int chart, const Vec& xy) {
            Vec out(2 * n);
            out.head(n) = xy.tail(n);
            out.tail(n) = gamma ? gamma(chart, xy.head(n), xy.tail(n)) : Vec(Vec::Zero(n));
            return out;
        },
        "f0");
    std::vector<VectorField> controls;
    for (std::size_t j = 0; j < local.g.size(); ++j) {
        LocalFn g = local.g[j];
        controls.emplace_back(
            ta.atlas,
            [g, n](int chart, const Vec& xy) {
                Vec out(2 * n);
                out.head(n).setZero();
                out.tail(n) = g(chart, xy.head(n), xy.tail(n));
                return out;
            },
            "f" + std::to_string(j + 1));
    }
    SecondOrderSystem sys(std::move(ta), std::move(drift), std::move(controls), std::move(label));
    sys.local_ = std::move(local);
    return sys;
}

ControlSystem SecondOrderSystem::control_system(std::vector<Vec> control_points) const {
    return ControlSystem::affine(drift_, controls_, std::move(control_points), label_);
}

GeneratedSystem SecondOrderSystem::slices(double magnitude) const {
    std::vector<VectorField> gens{drift_};
    for (const auto& f : controls_) {
        gens.push_back(drift_ + f.scaled(magnitude));
        gens.push_back(drift_ + f.scaled(-magnitude));
    }
    return GeneratedSystem(ta_.atlas, std::move(gens), label_ + " slices");
}

PredicateResult is_second_order(const SecondOrderSystem& sys, int samples, std::uint64_t seed) {
    const int n = sys.tangent().base_dim();
    Rng rng(seed);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Point p = sys.tangent().atlas->sample(rng);
        worst = std::max(worst, max_abs(Vec(sys.drift()(p).head(n) - p.coords.tail(n))));
        for (const auto& f : sys.controls()) worst = std::max(worst, max_abs(Vec(f(p).head(n))));
    }
    return PredicateResult{worst <= 1e-9, worst};
}

SmoothMap tangent_map(const SmoothMap& phi, const TangentAtlas& tp, const TangentAtlas& tq) {
    const int m = tp.base_dim();
    const int n = tq.base_dim();
    SmoothMap base = phi;
    SmoothMap::ValueFn value = [base, m, n](const Point& p) {
        const Point x{p.chart, p.coords.head(m)};
        const Point y = base.raw_value(x);
        Vec out(2 * n);
        out.head(n) = y.coords;
        out.tail(n) = base.raw_jacobian(x) * p.coords.tail(m);
        return Point{y.chart, out};
    };
    SmoothMap::JacobianFn jac;
    if (phi.analytic()) {
        jac = [base, m, n](const Point& p) {
            const Point x{p.chart, p.coords.head(m)};
            const Mat j = base.raw_jacobian(x);
            const Vec v = p.coords.tail(m);
            CoordMap jv = [&](const Vec& xx) { return Vec(base.raw_jacobian(Point{p.chart, xx}) * v); };
            Mat out = Mat::Zero(2 * n, 2 * m);
            out.topLeftCorner(n, m) = j;
            out.bottomLeftCorner(n, m) = finite_difference_jacobian(jv, x.coords);
            out.bottomRightCorner(n, m) = j;
            return out;
        };
    }
    return SmoothMap(tp.atlas, tq.atlas, value, jac, "T" + phi.label());
}

SecondOrderLift second_order_lift(const SecondOrderSystem& sys2, const SmoothMap& phi, double velocity_bound,
                                  int check_samples, std::uint64_t seed) {
    const int n = phi.target().dim();
    const int m = phi.source().dim();
    if (n != sys2.tangent().base_dim()) throw DimensionMismatch("second-order system lives on another base");
    if (!sys2.local()) throw NotAdapted("second-order system without local data");
    Rng rng(seed);
    for (int s = 0; s < check_samples; ++s) {
        const Point p = phi.source().sample(rng);
        const Point y = phi.raw_value(p);
        if (y.chart != p.chart || max_abs(Vec(y.coords - p.coords.head(n))) > 1e-12)
            throw NotAdapted("map is not the coordinate projection at " + format_vec(p.coords));
    }
    const LocalData& base = *sys2.local();
    auto widen = [n, m](LocalFn f) -> LocalFn {
        return [f, n, m](int chart, const Vec& x, const Vec& v) {
            Vec out = Vec::Zero(m);
            if (f) out.head(n) = f(chart, x.head(n), v.head(n));
            return out;
        };
    };
    LocalData lifted{widen(base.gamma), {}};
    for (const auto& g : base.g) lifted.g.push_back(widen(g));
    TangentAtlas tp = tangent_atlas(phi.source_ptr(), velocity_bound);
    SecondOrderSystem sys1 = SecondOrderSystem::from_local(tp, std::move(lifted), "lift[" + sys2.label() + "]");

    // affine slices at u = 0 and the unit controls determine the lifting map
    const std::size_t k = sys2.controls().size();
    std::vector<Vec> points{Vec(Vec::Zero(static_cast<Eigen::Index>(k)))};
    for (std::size_t j = 0; j < k; ++j) {
        Vec e = Vec::Zero(static_cast<Eigen::Index>(k));
        e(static_cast<Eigen::Index>(j)) = 1.0;
        points.push_back(e);
    }
    std::vector<std::pair<Vec, Vec>> identity;
    for (const auto& u : points) identity.emplace_back(u, u);
    const ControlSystem sigma1 = sys1.control_system(points);
    const ControlSystem sigma2 = sys2.control_system(points);
    Morphism morph = morphism_from_lifting(identity, sigma1, sigma2, tangent_map(phi, tp, sys2.tangent()));
    return SecondOrderLift{std::move(tp), std::move(sys1), std::move(morph)};
}

double second_order_relatedness_residual(const SecondOrderLift& lift, const SecondOrderSystem& sys2, int samples,
                                         std::uint64_t seed) {
    const SmoothMap& tphi = lift.morphism.phi();
    std::vector<std::pair<VectorField, VectorField>> pairs{{lift.system.drift(), sys2.drift()}};
    for (std::size_t j = 0; j < sys2.controls().size(); ++j) pairs.emplace_back(lift.system.controls()[j], sys2.controls()[j]);
    Rng rng(seed);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Point p = lift.tp.atlas->sample(rng);
        const Located img = tphi.image(p);
        const Mat j = tphi.jacobian(p);
        for (const auto& [up, down] : pairs) worst = std::max(worst, max_abs(Vec(j * up(p) - down(img.point))));
    }
    return worst;
}

VectorField vertical_lift(const VectorField& x, const TangentAtlas& ta) {
    const int n = ta.base_dim();
    if (x.atlas().dim() != n) throw DimensionMismatch("vertical lift of a field on another base");
    return VectorField(
        ta.atlas,
        [x, n](int chart, const Vec& xy) {
            Vec out(2 * n);
            out.head(n).setZero();
            out.tail(n) = x.raw(chart, xy.head(n));
            return out;
        },
        x.label() + "^vlft");
}

GeneratedSystem augment_second_order(const SecondOrderSystem& lifted, const KernelFrame& frame, const SmoothMap& phi,
                                     double control_magnitude, double kernel_magnitude, int samples, std::uint64_t seed) {
    const TangentAtlas& ta = lifted.tangent();
    std::vector<VectorField> kept;
    Rng rng(seed);
    const std::vector<Point> pts = [&] {
        std::vector<Point> out;
        for (int s = 0; s < samples; ++s) out.push_back(phi.source().sample(rng));
        return out;
    }();
    for (std::size_t i = 0; i < frame.generators.size(); ++i) {
        const VectorField& x = frame.generators[i];
        if (x.atlas().dim() != ta.base_dim()) throw FrameNotKernel("generator " + std::to_string(i) + " lives on another base");
        double size = 0.0;
        for (const auto& p : pts) {
            const Vec v = x(p);
            if ((phi.jacobian(p) * v).norm() > 1e-8)
                throw FrameNotKernel("generator " + std::to_string(i) + " at " + format_vec(p.coords));
            size = std::max(size, max_abs(v));
        }
        if (size > 0.0) kept.push_back(x);
    }
    std::vector<VectorField> gens = lifted.slices(control_magnitude).generators();
    for (const auto& x : kept) {
        const VectorField v = vertical_lift(x, ta);
        gens.push_back(lifted.drift() + v.scaled(kernel_magnitude));
        gens.push_back(lifted.drift() + v.scaled(-kernel_magnitude));
    }
    return GeneratedSystem(ta.atlas, std::move(gens), lifted.label() + "+vker");
}

double christoffel_symmetry_residual(const ConnectionSystem& cs, Rng& rng, int samples) {
    const int n = cs.base->dim();
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Point p = cs.base->sample(rng);
        const std::vector<double> g = cs.christoffel(p.chart, p.coords);
        if (static_cast<int>(g.size()) != n * n * n) throw DimensionMismatch("christoffel symbols");
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = j + 1; k < n; ++k)
                    worst = std::max(worst, std::abs(g[static_cast<std::size_t>(i * n * n + j * n + k)] -
                                                     g[static_cast<std::size_t>(i * n * n + k * n + j)]));
    }
    return worst;
}

SecondOrderSystem geodesic_spray(const ConnectionSystem& cs, double velocity_bound, std::string label) {
    const int n = cs.base->dim();
    if (cs.christoffel) {
        Rng rng(41);
        if (christoffel_symmetry_residual(cs, rng, 200) > 1e-12) throw Error("connection has torsion");
    }
    LocalData local;
    ChristoffelFn chris = cs.christoffel;
    if (chris) {
        local.gamma = [chris, n](int chart, const Vec& x, const Vec& y) {
            const std::vector<double> g = chris(chart, x);
            Vec a = Vec::Zero(n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k) a(i) -= g[static_cast<std::size_t>(i * n * n + j * n + k)] * y(j) * y(k);
            return a;
        };
    }
    for (const auto& g : cs.controls) {
        if (g.atlas().dim() != n) throw DimensionMismatch("connection control field");
        local.g.push_back([g](int chart, const Vec& x, const Vec&) { return g.raw(chart, x); });
    }
    return SecondOrderSystem::from_local(tangent_atlas(cs.base, velocity_bound), std::move(local), std::move(label));
}

double spray_homogeneity_residual(const SecondOrderSystem& spray, Rng& rng, int samples) {
    const int n = spray.tangent().base_dim();
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Point p = spray.tangent().atlas->sample(rng);
        const Vec a = spray.drift().raw(p.chart, p.coords).tail(n);
        for (double l : {-1.0, 0.5, 2.0}) {
            Vec q = p.coords;
            q.tail(n) *= l;
            const Vec b = spray.drift().raw(p.chart, q).tail(n);
            worst = std::max(worst, max_abs(Vec(b - l * l * a)) / std::max(1.0, max_abs(a)));
        }
    }
    return worst;
}

} // namespace tcs
