#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"

using namespace tcs;

namespace {

// Line (0,2) as two charts: A = x in (0,1.5), B = s = 2x in (2,4).
AtlasPtr two_chart_line() {
    Chart a{make_vec({0.0}), make_vec({1.5}), {}};
    Chart b{make_vec({2.0}), make_vec({4.0}), {}};
    auto atlas = std::make_shared<Atlas>("line", 1, std::vector<Chart>{a, b});
    atlas->set_transitions({Transition{0, 1, [](const Vec& x) { return Vec(2.0 * x); }, {}},
                            Transition{1, 0, [](const Vec& s) { return Vec(0.5 * s); }, {}}},
                           false);
    atlas->set_metric([](int chart, const Vec&) { return Mat(Mat::Constant(1, 1, chart == 0 ? 1.0 : 0.25)); });
    return atlas;
}

} // namespace

TEST_CASE("periodic and flipped normalisation") {
    auto s1 = fx::circle();
    CHECK(s1->normalize(0, make_vec({fx::kTwoPi + 0.5})).coords(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s1->normalize(0, make_vec({-0.5})).coords(0) == doctest::Approx(fx::kTwoPi - 0.5).epsilon(1e-12));

    auto m = fx::mobius();
    Point p = m->normalize(0, make_vec({1.25, 0.3}));
    CHECK(p.coords(0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p.coords(1) == doctest::Approx(0.7).epsilon(1e-12));
    Point q = m->normalize(0, make_vec({2.25, 0.3}));
    CHECK(q.coords(1) == doctest::Approx(0.3).epsilon(1e-12));

    Point inside = m->normalize(0, make_vec({0.4, 0.4}));
    CHECK(inside.coords(0) == 0.4);
    CHECK(inside.coords(1) == 0.4);
    CHECK_THROWS_AS(m->normalize(0, make_vec({0.5, 1.5})), OutOfAtlas);
}

TEST_CASE("normalisation is idempotent") {
    Rng rng(1);
    for (const AtlasPtr& atlas : std::vector<AtlasPtr>{fx::circle(), fx::mobius(), std::make_shared<Atlas>(Atlas::torus("T")), two_chart_line()}) {
        double worst = 0.0;
        int used = 0;
        for (int s = 0; s < 1000; ++s) {
            const int c = static_cast<int>(rng.index(static_cast<std::size_t>(atlas->chart_count())));
            auto loc = atlas->locate(c, atlas->sample_raw(c, rng));
            if (!loc) continue;
            ++used;
            Point again = atlas->normalize(loc->point);
            CHECK(again.chart == loc->point.chart);
            worst = std::max(worst, max_abs(Vec(again.coords - loc->point.coords)));
        }
        CHECK(used > 500);
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("transition jacobians, metric and transport") {
    auto line = two_chart_line();
    Rng rng(2);
    CHECK(transition_jacobian_error(*line, rng, 500) <= 1e-6);
    CHECK(metric_compatibility_residual(*line, rng, 500) <= 1e-9);
    CHECK(metric_min_eigenvalue(*line, rng, 200) > 0.0);

    // x = 1.2 lies in both charts; canonical is A
    Point p = line->normalize(1, make_vec({2.4}));
    CHECK(p.chart == 0);
    CHECK(p.coords(0) == doctest::Approx(1.2));
    Tangent v{p, make_vec({0.7})};
    Tangent in_b = line->transport(v, 1);
    CHECK(in_b.components(0) == doctest::Approx(1.4));
    Tangent back = line->transport(in_b, 0);
    CHECK(std::abs(back.components(0) - 0.7) <= 1e-9);

    // points only B covers canonicalise to B
    CHECK(line->normalize(1, make_vec({3.5})).chart == 1);
    CHECK_FALSE(line->locate(0, make_vec({1.7})).has_value());
}

TEST_CASE("pushforward") {
    auto q = fx::square();
    auto i = fx::interval();
    Tangent v{Point{0, make_vec({0.1, -0.2})}, make_vec({0.3, 0.4})};
    Tangent same = pushforward(SmoothMap::identity(q), v);
    CHECK(same.components == v.components);

    Tangent down = pushforward(SmoothMap::projection(q, i), Tangent{Point{0, make_vec({0.0, 0.0})}, make_vec({2.0, 5.0})});
    CHECK(down.components.size() == 1);
    CHECK(down.components(0) == 2.0);
    CHECK(down.base.coords(0) == 0.0);

    CHECK_THROWS_AS(pushforward(SmoothMap::projection(q, i), Tangent{v.base, make_vec({1.0})}), DimensionMismatch);

    // crossing the Moebius seam: d(glue) at raw x = 1 + eps, by finite differences of normalise
    auto m = fx::mobius();
    const Vec raw = make_vec({1.0 + 1e-3, 0.3});
    auto loc = m->locate(0, raw);
    REQUIRE(loc);
    CoordMap glue = [&](const Vec& x) { return m->normalize(0, x).coords; };
    const Mat fd = finite_difference_jacobian(glue, raw);
    const Vec moved = fd * make_vec({1.0, 1.0});
    CHECK(moved(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(moved(1) == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(max_abs(Vec(loc->jacobian * make_vec({1.0, 1.0}) - moved)) <= 1e-6);
}

TEST_CASE("differential rank") {
    auto q = fx::square();
    auto i = fx::interval();
    CHECK(differential_rank(SmoothMap::projection(q, i), Point{0, make_vec({0.3, 0.3})}) == 1);

    SmoothMap cube(i, i, [](const Point& p) { return Point{0, Vec(p.coords.cwiseProduct(p.coords).cwiseProduct(p.coords))}; });
    CHECK(differential_rank(cube, Point{0, make_vec({0.0})}) == 0);
    CHECK(differential_rank(cube, Point{0, make_vec({0.5})}) == 1);

    auto m = fx::mobius();
    SmoothMap quotient = fx::mobius_quotient(m, fx::circle());
    SmoothMap numeric(m, fx::circle(), [](const Point& p) { return Point{0, make_vec({fx::kTwoPi * p.coords(0)})}; });
    Rng rng(3);
    for (int s = 0; s < 20; ++s) {
        Point p = m->sample(rng);
        CHECK(differential_rank(quotient, p) == 1);
        CHECK(differential_rank(numeric, p) == 1);
    }
    CHECK(jacobian_fd_error(quotient, rng, 100) <= 1e-5);
    CHECK(normalization_commutation_error(quotient, rng, 500) <= 1e-9);
}

TEST_CASE("chain rule through composition") {
    auto q = fx::square();
    auto i = fx::interval(-10.0, 10.0);
    SmoothMap bend(q, q, [](const Point& p) {
        return Point{0, make_vec({0.5 * std::sin(p.coords(0) + p.coords(1)), 0.5 * p.coords(0) * p.coords(1)})};
    });
    SmoothMap squash(q, i, [](const Point& p) { return Point{0, make_vec({std::exp(p.coords(0)) + p.coords(1)})}; });
    SmoothMap both = bend.then(squash);
    Rng rng(4);
    double worst = 0.0;
    for (int s = 0; s < 200; ++s) {
        Tangent v{q->sample(rng), make_vec({rng.uniform(-1, 1), rng.uniform(-1, 1)})};
        Tangent direct = pushforward(both, v);
        Tangent stepwise = pushforward(squash, pushforward(bend, v));
        worst = std::max(worst, max_abs(Vec(direct.components - stepwise.components)));
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("vector field overlap compatibility") {
    auto m = fx::mobius();
    VectorField around(m, [](int, const Vec&) { return make_vec({1.0 / fx::kTwoPi, 0.0}); });
    VectorField up = fx::constant(m, {0.0, 1.0});
    Rng rng(5);
    CHECK(overlap_compatibility_residual(around, rng, 1000) <= 1e-9);
    CHECK(overlap_compatibility_residual(up, rng, 1000) == doctest::Approx(2.0));

    // a field in the frame of the two-chart line: d/dx is 2 d/ds in chart B
    auto line = two_chart_line();
    VectorField ddx(line, [](int chart, const Vec&) { return make_vec({chart == 0 ? 1.0 : 2.0}); });
    CHECK(overlap_compatibility_residual(ddx, rng, 1000) <= 1e-9);
    VectorField wrong = fx::constant(line, {1.0});
    CHECK(overlap_compatibility_residual(wrong, rng, 1000) > 0.5);

    // evaluation is pure
    Point p{0, make_vec({0.2, 0.6})};
    CHECK(around(p) == around(p));
}

TEST_CASE("restriction of fields") {
    auto s1 = fx::circle();
    VectorField rot = fx::constant(s1, {1.0});
    Region arc{0, make_vec({0.0}), make_vec({1.0})};
    VectorField small = rot.restricted(arc);
    CHECK(small.defined_at(Point{0, make_vec({0.5})}));
    CHECK_FALSE(small.defined_at(Point{0, make_vec({2.0})}));
    CHECK(small(Point{0, make_vec({0.5})}) == rot(Point{0, make_vec({0.5})}));
    CHECK_THROWS_AS(rot.restricted(Region{0, make_vec({1.0}), make_vec({1.0})}), EmptyRestriction);
}
