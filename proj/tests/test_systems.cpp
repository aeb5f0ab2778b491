#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "tcs/control.hpp"
#include "tcs/reach.hpp"

using namespace tcs;

namespace {

GeneratedSystem scalar(std::vector<double> speeds, double lo = -1.0, double hi = 1.0) {
    auto i = fx::interval(lo, hi);
    std::vector<VectorField> gens;
    for (double s : speeds) gens.push_back(fx::constant(i, {s}));
    return GeneratedSystem(i, gens, "scalar");
}

ReachOptions opts(std::vector<int> grid, double dwell, double horizon, double step = 0.0) {
    return ReachOptions{GridSpec{std::move(grid)}, dwell, horizon, step};
}

double exp_error(double h) {
    auto i = fx::interval(-10.0, 10.0);
    GeneratedSystem sys(i, {VectorField(i, [](int, const Vec& x) { return x; })});
    Trajectory t = integrate(sys, Point{0, make_vec({1.0})}, Schedule().generator(0, 1.0), h);
    return std::abs(t.end().coords(0) - std::exp(1.0));
}

} // namespace

TEST_CASE("restriction") {
    auto q = fx::square();
    VectorField swirl(q, [](int, const Vec& x) { return make_vec({-x(1), x(0)}); });
    GeneratedSystem sys(q, {swirl});
    GeneratedSystem full = restrict(sys, Region{0, make_vec({-1.0, -1.0}), make_vec({1.0, 1.0})});
    Rng rng(1);
    for (int s = 0; s < 100; ++s) {
        Point p = q->sample(rng);
        CHECK(full.generators()[0].defined_at(p));
        CHECK(full.generators()[0](p) == swirl(p));
    }

    const Region outer{0, make_vec({-0.8, -0.8}), make_vec({0.8, 0.8})};
    const Region inner{0, make_vec({-0.3, -0.2}), make_vec({0.4, 0.5})};
    GeneratedSystem twice = restrict(restrict(sys, outer), inner);
    GeneratedSystem once = restrict(sys, inner);
    for (int s = 0; s < 100; ++s) {
        Point p{0, make_vec({rng.open(-0.3, 0.4), rng.open(-0.2, 0.5)})};
        CHECK(twice.generators()[0].defined_at(p));
        CHECK(twice.generators()[0](p) == once.generators()[0](p));
    }
    Point outside{0, make_vec({0.6, 0.6})};
    CHECK(twice.generators()[0].defined_at(outside) == once.generators()[0].defined_at(outside));

    CHECK_THROWS_AS(restrict(sys, Region{0, make_vec({0.5, 0.0}), make_vec({0.5, 1.0})}), EmptyRestriction);
    CHECK_THROWS_AS(restrict(sys, Region{0, make_vec({-2.0, 0.0}), make_vec({0.5, 1.0})}), OutOfAtlas);
}

TEST_CASE("integration against closed forms") {
    auto s1 = fx::circle();
    GeneratedSystem still(s1, {VectorField::zero(s1)});
    Trajectory rest = integrate(still, Point{0, make_vec({2.0})}, Schedule().generator(0, 3.0), 1e-2);
    for (const auto& p : rest.points) CHECK(p.coords(0) == 2.0);

    GeneratedSystem rot(s1, {fx::constant(s1, {1.0})});
    Trajectory turn = integrate(rot, Point{0, make_vec({0.0})}, Schedule().generator(0, fx::kTwoPi + 1.0), 1e-3);
    CHECK(std::abs(turn.end().coords(0) - 1.0) <= 1e-8);
    for (std::size_t k = 1; k < turn.times.size(); ++k) CHECK(turn.times[k] > turn.times[k - 1]);

    CHECK(exp_error(1e-3) <= 1e-7);
}

TEST_CASE("integrator order") {
    const double ratio = exp_error(0.1) / exp_error(0.05);
    CHECK(ratio >= 10.0);
    CHECK(ratio <= 22.0);
}

TEST_CASE("escape and selectors") {
    GeneratedSystem right = scalar({1.0});
    try {
        integrate(right, Point{0, make_vec({0.0})}, Schedule().generator(0, 2.0), 1e-3);
        FAIL("expected an escape");
    } catch (const Escape& e) {
        CHECK(e.time == doctest::Approx(1.0).epsilon(2e-3));
    }
    CHECK_THROWS_AS(integrate(right, Point{0, make_vec({0.0})}, Schedule().generator(3, 0.1), 1e-3), UnresolvedSelector);
    CHECK_THROWS_AS(integrate(right, Point{0, make_vec({0.0})}, Schedule().kernel(make_vec({1.0}), 0.1), 1e-3),
                    UnresolvedSelector);
    CHECK_THROWS_AS(Schedule().generator(0, -1.0), DimensionMismatch);
}

TEST_CASE("schedule concatenation") {
    auto q = fx::square(-3.0, 3.0);
    GeneratedSystem sys(q, {VectorField(q, [](int, const Vec& x) { return make_vec({-x(1), x(0)}); }),
                            VectorField(q, [](int, const Vec& x) { return make_vec({0.3, std::sin(x(0))}); })});
    Schedule a, b;
    a.generator(0, 0.7).generator(1, 0.35);
    b.generator(1, 0.2).generator(0, 0.55);
    const Point x0{0, make_vec({0.5, -0.2})};
    const double h = 1e-3;
    Trajectory first = integrate(sys, x0, a, h);
    Trajectory second = integrate(sys, first.end(), b, h);
    Trajectory joined = integrate(sys, x0, a.then(b), h);
    CHECK(joined.schedule.total_duration() == doctest::Approx(a.total_duration() + b.total_duration()));
    CHECK(max_abs(Vec(joined.end().coords - second.end().coords)) <= 1e-9);
}

TEST_CASE("control systems") {
    auto plane = fx::square(-2.0, 2.0);
    VectorField drift(plane, [](int, const Vec& x) { return make_vec({x(1), 0.0}); }, "drift");
    VectorField push = fx::constant(plane, {0.0, 1.0});
    ControlSystem di = ControlSystem::affine(drift, {push}, ControlBox{make_vec({-1.0}), make_vec({1.0})}, "di");

    Schedule bang;
    bang.control(make_vec({1.0}), 1.0).control(make_vec({-1.0}), 1.0);
    auto pieces = slice(di, bang);
    REQUIRE(pieces.size() == 2);
    Trajectory t = integrate(di, Point{0, make_vec({0.0, 0.0})}, bang, 1e-3);
    CHECK(std::abs(t.end().coords(0) - 1.0) <= 1e-8);
    CHECK(std::abs(t.end().coords(1)) <= 1e-8);
    CHECK_THROWS_AS(di.slice(make_vec({2.0})), ControlOutOfSet);

    // constant signal is a single frozen field
    Schedule hold;
    hold.control(make_vec({0.5}), 1.0);
    CHECK(slice(di, hold).size() == 1);

    // affine switching: u = 0 is the drift, u = 1 the drift plus control field
    Rng rng(2);
    auto sw = slice(di, Schedule().control(make_vec({0.0}), 0.5).control(make_vec({1.0}), 0.5));
    for (int s = 0; s < 50; ++s) {
        Point p = plane->sample(rng);
        CHECK(sw[0].first(p) == drift(p));
        CHECK(max_abs(Vec(sw[1].first(p) - drift(p) - push(p))) <= 1e-15);
    }
    CHECK(affine_decomposition_residual(di, rng, 200) <= 1e-10);

    GeneratedSystem sampled = tcs_from_control_system(di, {make_vec({-1.0}), make_vec({0.0}), make_vec({1.0})});
    REQUIRE(sampled.generators().size() == 3);
    for (int s = 0; s < 50; ++s) {
        Point p = plane->sample(rng);
        CHECK(sampled.generators()[1](p) == drift(p));
    }

    ControlSystem two(plane, std::vector<Vec>{make_vec({0.0}), make_vec({1.0})},
                      [](int, const Vec& x, const Vec& u) { return make_vec({u(0), x(0)}); });
    CHECK(tcs_from_control_system(two).generators().size() == 2);
}

TEST_CASE("round trips between generated and control systems") {
    auto plane = fx::square(-2.0, 2.0);
    GeneratedSystem sys(plane, {fx::constant(plane, {1.0, 0.0}),
                                VectorField(plane, [](int, const Vec& x) { return make_vec({0.0, x(0)}); })},
                        "pair");
    ControlSystem cs = control_system_from_tcs(sys);
    GeneratedSystem back = tcs_from_control_system(cs);
    REQUIRE(back.generators().size() == sys.generators().size());
    for (std::size_t i = 0; i < sys.generators().size(); ++i) CHECK(back.generators()[i].same_as(sys.generators()[i]));
    Rng rng(3);
    CHECK(same_generators(back.generators(), sys.generators(), rng));

    GeneratedSystem one(plane, {fx::constant(plane, {0.3, 0.1})});
    CHECK(control_system_from_tcs(one).slice(make_vec({0.0})).same_as(one.generators()[0]));

    // trajectories coincide segment-wise
    Schedule by_index;
    by_index.generator(0, 0.4).generator(1, 0.3).generator(0, 0.2);
    Schedule by_control;
    by_control.control(make_vec({0.0}), 0.4).control(make_vec({1.0}), 0.3).control(make_vec({0.0}), 0.2);
    const Point x0{0, make_vec({-0.5, 0.2})};
    Trajectory a = integrate(sys, x0, by_index, 1e-3);
    Trajectory b = integrate(cs, x0, by_control, 1e-3);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t k = 0; k < a.points.size(); ++k) CHECK(a.points[k].coords == b.points[k].coords);
}

TEST_CASE("reach") {
    auto s1 = fx::circle();
    GeneratedSystem nothing(s1, {VectorField::zero(s1)});
    ReachReport none = reach(nothing, Point{0, make_vec({0.0})}, opts({100}, 0.1, 10.0));
    CHECK(none.arrival.size() == 1);
    CHECK(none.arrival.begin()->second == 0.0);

    GeneratedSystem spin(s1, {VectorField::zero(s1), fx::constant(s1, {1.0})});
    ReachReport around = reach(spin, Point{0, make_vec({0.0})}, opts({100}, 0.1, 10.0));
    CHECK(around.coverage >= 0.99);
    CHECK(around.total_cells == 100);

    // monotone flow: exactly the cells with centre >= 0, one cell of slack
    ReachReport forward = reach(scalar({1.0}), Point{0, make_vec({0.0})}, opts({40}, 0.1, 5.0));
    auto i = fx::interval();
    for (int k = 0; k < 40; ++k) {
        Cell c{0, {k}};
        const double centre = cell_center(*i, GridSpec{{40}}, c)(0);
        if (centre > 0.05) CHECK(forward.visited(c));
        if (centre < -0.05) CHECK_FALSE(forward.visited(c));
    }
    CHECK(forward.arrival.at(cell_of(*i, GridSpec{{40}}, Point{0, make_vec({0.0})})) == 0.0);

    std::ostringstream csv;
    write_csv(csv, forward);
    CHECK(csv.str().rfind("chart_id,i0,arrival_time\n", 0) == 0);
    CHECK(summary_json(forward)["coverage"].get<double>() == forward.coverage);
}

TEST_CASE("reach is monotone in the horizon") {
    auto q = fx::square();
    GeneratedSystem sys(q, {VectorField(q, [](int, const Vec& x) { return make_vec({1.0, std::sin(3.0 * x(0))}); }),
                            VectorField(q, [](int, const Vec& x) { return make_vec({-x(1), 0.5}); })});
    ReachReport prev = reach(sys, Point{0, make_vec({-0.5, -0.5})}, opts({16, 16}, 0.1, 0.0, 0.01));
    for (double t : {0.1, 0.35, 0.8, 1.5}) {
        ReachReport next = reach(sys, Point{0, make_vec({-0.5, -0.5})}, opts({16, 16}, 0.1, t, 0.01));
        CHECK(visited_subset(prev, next));
        prev = next;
    }
}

TEST_CASE("reachability sets and transitivity") {
    auto i = fx::interval();
    GeneratedSystem right = scalar({1.0});
    CHECK(is_reachability_set(right, {Point{0, make_vec({0.3})}}, opts({20}, 0.1, 1.0)).holds);
    auto pair = is_reachability_set(right, {Point{0, make_vec({-0.5})}, Point{0, make_vec({0.5})}}, opts({20}, 0.1, 3.0));
    CHECK_FALSE(pair.holds);
    CHECK(pair.witness[0][1]);
    CHECK_FALSE(pair.witness[1][0]);

    // grid transitivity on sampled triples
    const GridSpec g{{20}};
    Rng rng(4);
    for (int s = 0; s < 10; ++s) {
        Point x{0, make_vec({rng.open(-0.9, 0.9)})};
        Point z{0, make_vec({rng.open(-0.9, 0.9)})};
        Point w{0, make_vec({rng.open(-0.9, 0.9)})};
        ReachReport from_x = reach(right, x, opts({20}, 0.1, 4.0));
        ReachReport from_z = reach(right, z, opts({20}, 0.1, 2.0));
        if (from_x.visited(cell_of(*i, g, z)) && from_z.visited(cell_of(*i, g, w)))
            CHECK(from_x.visited(cell_of(*i, g, w)));
    }
}

TEST_CASE("stlc probe") {
    const ReachOptions o = opts({40}, 0.05, 0.0, 0.005);
    auto both = stlc_probe(scalar({-1.0, 0.0, 1.0}), Point{0, make_vec({0.0})}, {0.1, 0.2}, o);
    CHECK(both == std::vector<bool>{true, true});
    auto one = stlc_probe(scalar({0.0, 1.0}), Point{0, make_vec({0.0})}, {0.1, 0.2}, o);
    CHECK(one == std::vector<bool>{false, false});
    auto none = stlc_probe(scalar({0.0}), Point{0, make_vec({0.0})}, {0.1, 0.2}, o);
    CHECK(none == std::vector<bool>{false, false});
}
