#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tcs/expr.hpp"
#include "tcs/scenario.hpp"

using namespace tcs;

namespace {

double eval(const std::string& text, std::vector<double> values = {}) {
    return Expr::compile(text, {"x", "y"}, {{"c", 0.5}})(values.empty() ? std::vector<double>{0.0, 0.0} : values);
}

std::string minimal(const std::string& experiments) {
    return "name: tiny\n"
           "atlases:\n"
           "  - name: L\n"
           "    kind: box\n"
           "    coords: [x]\n"
           "    lo: [-1]\n"
           "    hi: [1]\n"
           "fields:\n"
           "  - name: right\n"
           "    atlas: L\n"
           "    components: [\"1\"]\n"
           "systems:\n"
           "  - name: H\n"
           "    atlas: L\n"
           "    generators: [right]\n" +
           experiments;
}

const char* kPlane = R"(name: plane
atlases:
  - name: N
    kind: box
    coords: [x]
    lo: [-1]
    hi: [1]
  - name: P
    kind: box
    coords: [x, z]
    lo: [-1, -1]
    hi: [1, 1]
maps:
  - name: pr
    source: P
    target: N
    value: ["x"]
  - name: flat
    source: P
    target: N
    value: ["0*x"]
fields:
  - name: right
    atlas: N
    components: ["1"]
  - name: sideways
    atlas: P
    components: ["1", "0"]
systems:
  - name: H
    atlas: N
    generators: [right]
experiments:
  - name: lift
    kind: lift
    system: H
    map: pr
    as: G
  - name: collapse
    kind: lift
    system: H
    map: flat
    expect_error: NotSubmersion
  - name: reach
    kind: reach
    system: G
    start: [0, 0]
    grid: [10, 10]
    dwell: 0.3
    horizon: 2
)";

const char* kBadFrame = R"(  - name: bad_frame
    kind: kernel_frame
    morphism: lift
    mode: global
    generators: [sideways]
)";

} // namespace

TEST_CASE("expression language") {
    CHECK(eval("1 + 2 * 3") == 7.0);
    CHECK(eval("(1 + 2) * 3") == 9.0);
    CHECK(eval("2^3^2") == 512.0);
    CHECK(eval("2**3") == 8.0);
    CHECK(eval("-2^2") == -4.0);
    CHECK(eval("8 / 4 / 2") == 1.0);
    CHECK(eval("1e-3 * 2") == 2e-3);
    CHECK(eval("x * y - c", {3.0, 4.0}) == 11.5);
    CHECK(eval("pi") == doctest::Approx(3.141592653589793).epsilon(1e-16));
    for (double x : {-0.7, 0.3, 1.9}) {
        CHECK(eval("sin(x)", {x, 0.0}) == std::sin(x));
        CHECK(eval("cos(x)", {x, 0.0}) == std::cos(x));
        CHECK(eval("tan(x)", {x, 0.0}) == std::tan(x));
        CHECK(eval("exp(x)", {x, 0.0}) == std::exp(x));
        CHECK(eval("abs(x)", {x, 0.0}) == std::abs(x));
        CHECK(eval("sqrt(abs(x))", {x, 0.0}) == std::sqrt(std::abs(x)));
        CHECK(eval("log(1 + x^2)", {x, 0.0}) == std::log(1.0 + std::pow(x, 2.0)));
    }
    CHECK(Expr::compile("2 * c", {}, {{"c", 0.5}}).constant());
    CHECK_FALSE(Expr::compile("x", {"x"}).constant());

    try {
        Expr::compile("siin(x)", {"x"}, {}, 7);
        FAIL("no error");
    } catch (const ParseError& e) {
        CHECK(e.line == 7);
        CHECK(std::string(e.what()).find("siin") != std::string::npos);
    }
    CHECK_THROWS_AS(Expr::compile("q + 1", {"x"}), ParseError);
    CHECK_THROWS_AS(Expr::compile("(x + 1", {"x"}), ParseError);
    CHECK_THROWS_AS(Expr::compile("x +", {"x"}), ParseError);
    CHECK_THROWS_AS(Expr::compile("x $ 2", {"x"}), ParseError);
    CHECK_THROWS_AS(Expr::compile("1 2", {}), ParseError);
}

TEST_CASE("built-in mobius scenario") {
    Scenario sc = load_scenario("mobius");
    CHECK(sc.name == "mobius");
    REQUIRE(sc.atlases.size() == 2);
    CHECK(sc.atlases.at("M")->dim() == 2);
    CHECK(sc.atlases.at("S1")->dim() == 1);
    REQUIRE(sc.maps.count("q") == 1);
    CHECK(sc.maps.at("q").analytic());
    std::set<std::string> kinds;
    for (const auto& e : sc.experiments) kinds.insert(e.kind);
    for (const char* k : {"lift", "augment", "reach"}) CHECK(kinds.count(k) == 1);

    // the quotient sends x to 2 pi x
    Point img = sc.maps.at("q")(Point{0, make_vec({0.25, 0.4})});
    CHECK(img.coords(0) == doctest::Approx(0.5 * 3.141592653589793).epsilon(1e-15));

    CHECK(builtin_scenarios().size() == 7);
    for (const auto& name : builtin_scenarios()) CHECK_NOTHROW(load_scenario(name));
}

TEST_CASE("empty experiment list") {
    for (const char* tail : {"experiments: []\n", "experiments:\n", ""}) {
        Scenario sc = parse_scenario_text(minimal(tail));
        CHECK(sc.experiments.empty());
        RunResult r = run(sc, 0);
        CHECK(r.experiments.empty());
        CHECK(r.all_pass());
        CHECK(r.summary()["experiments"].empty());
    }
}

TEST_CASE("parse errors carry line numbers") {
    const std::string bad = minimal("") + "  - name: H\n    atlas: L\n    generators: [right]\n";
    const std::string text = "name: tiny\n"
                             "atlases:\n"
                             "  - name: L\n"
                             "    kind: box\n"
                             "    lo: [-1]\n"
                             "    hi: [1]\n"
                             "fields:\n"
                             "  - name: f\n"
                             "    atlas: L\n"
                             "    components: [\"siin(x0)\"]\n";
    try {
        parse_scenario_text(text);
        FAIL("no error");
    } catch (const ParseError& e) {
        CHECK(e.line == 10);
        CHECK(std::string(e.what()).find("siin") != std::string::npos);
    }
    try {
        parse_scenario_text("name: x\natlases: [\n");
        FAIL("no error");
    } catch (const ParseError& e) {
        CHECK(e.line >= 2);
    }
    CHECK_THROWS_AS(parse_scenario_text("- just\n- a list\n"), ParseError);
    CHECK_THROWS_AS(parse_scenario_text("atlases: []\n"), ParseError);
    CHECK_THROWS_AS(parse_scenario_text(bad), ParseError);  // duplicate system
    CHECK_THROWS_AS(parse_scenario_text(minimal("experiments:\n  - {name: a, kind: teleport}\n")), ParseError);
    CHECK_THROWS_AS(parse_scenario_text(minimal("experiments:\n  - {name: a, kind: reach}\n")), ParseError);
    CHECK_THROWS_AS(parse_scenario_text(minimal("experiments:\n  - {name: a, kind: round_trip, system: H}\n"
                                                "  - {name: a, kind: round_trip, system: H}\n")),
                    ParseError);
}

TEST_CASE("references and dimensions") {
    CHECK_THROWS_AS(parse_scenario_text(minimal("experiments:\n  - {name: a, kind: round_trip, system: K}\n")),
                    UnresolvedReference);
    // a produced system is visible to later blocks only
    const std::string order = "maps:\n  - {name: id, source: L, target: L, value: [\"x\"]}\n"
                              "experiments:\n"
                              "  - {name: r, kind: round_trip, system: G}\n"
                              "  - {name: l, kind: lift, system: H, map: id, as: G}\n";
    CHECK_THROWS_AS(parse_scenario_text(minimal(order)), UnresolvedReference);
    const std::string ok = "maps:\n  - {name: id, source: L, target: L, value: [\"x\"]}\n"
                           "experiments:\n"
                           "  - {name: l, kind: lift, system: H, map: id, as: G}\n"
                           "  - {name: r, kind: round_trip, system: G}\n";
    CHECK_NOTHROW(parse_scenario_text(minimal(ok)));

    const std::string unknown_field = "name: t\natlases:\n  - {name: L, kind: circle}\n"
                                      "systems:\n  - {name: H, atlas: L, generators: [nope]}\n";
    CHECK_THROWS_AS(parse_scenario_text(unknown_field), UnresolvedReference);
    const std::string wrong_dim = "name: t\natlases:\n  - {name: L, kind: circle}\n"
                                  "fields:\n  - {name: f, atlas: L, components: [\"1\", \"2\"]}\n";
    CHECK_THROWS_AS(parse_scenario_text(wrong_dim), DimensionMismatch);
    const std::string wrong_map = "name: t\natlases:\n  - {name: L, kind: circle}\n  - {name: T, kind: torus}\n"
                                  "maps:\n  - {name: m, source: T, target: L, value: [\"theta\", \"phi\"]}\n";
    CHECK_THROWS_AS(parse_scenario_text(wrong_map), DimensionMismatch);
    const std::string wrong_jac = "name: t\natlases:\n  - {name: L, kind: circle}\n  - {name: T, kind: torus}\n"
                                  "maps:\n  - {name: m, source: T, target: L, value: [\"theta\"], jacobian: [[\"1\"]]}\n";
    CHECK_THROWS_AS(parse_scenario_text(wrong_jac), DimensionMismatch);
    const std::string wrong_controls = "name: t\natlases:\n  - {name: L, kind: circle}\n"
                                       "fields:\n  - {name: f, atlas: L, components: [\"1\"]}\n"
                                       "control_systems:\n  - {name: s, atlas: L, controls: [[0], [1, 2]], fields: [f]}\n";
    CHECK_THROWS_AS(parse_scenario_text(wrong_controls), DimensionMismatch);
    const std::string torsion = "name: t\natlases:\n  - {name: P, kind: box, lo: [-1, -1], hi: [1, 1]}\n"
                                "connections:\n  - {name: c, base: P, christoffel: [\"0\", \"1\", \"0\", \"0\", \"0\", \"0\", \"0\", \"0\"]}\n";
    CHECK_THROWS_AS(parse_scenario_text(torsion), ParseError);
}

TEST_CASE("declared atlases with transitions and metrics") {
    // the line as two charts, s = 2x on the right one, with the pulled-back metric
    const char* text = R"(name: line
atlases:
  - name: R
    kind: charts
    coords: [x]
    charts:
      - {lo: [-2], hi: [1]}
      - {lo: [0], hi: [4]}
    transitions:
      - {from: 0, to: 1, map: ["2*x"], jacobian: [["2"]]}
      - {from: 1, to: 0, map: ["x/2"], jacobian: [["0.5"]]}
    shared: false
  - name: C
    kind: charts
    coords: [a, b]
    charts:
      - lo: [0, 0]
        hi: [1, 1]
        axes: [{periodic: true, flips: [1]}, {}]
    metric: [["1 + b^2", "0"], ["0", "1"]]
)";
    Scenario sc = parse_scenario_text(text);
    const Atlas& r = *sc.atlases.at("R");
    CHECK(r.chart_count() == 2);
    CHECK_FALSE(r.shared_coordinates());
    auto in1 = r.express_in(Point{0, make_vec({0.5})}, 1);
    REQUIRE(in1);
    CHECK(in1->point.coords(0) == 1.0);
    Rng rng(1);
    CHECK(transition_jacobian_error(r, rng, 200) <= 1e-8);

    const Atlas& c = *sc.atlases.at("C");
    // glued like the Moebius band: (a + 1, b) ~ (a, 1 - b)
    Point p = c.normalize(0, make_vec({1.25, 0.2}));
    CHECK(p.coords(0) == doctest::Approx(0.25));
    CHECK(p.coords(1) == doctest::Approx(0.8));
    CHECK(c.metric(0, make_vec({0.5, 0.5}))(0, 0) == 1.25);
}

TEST_CASE("runs are deterministic") {
    Scenario sc = load_scenario("projection");
    RunResult a = run(sc, 3);
    RunResult b = run(sc, 3);
    CHECK(a.summary().dump() == b.summary().dump());
    RunResult c = run(sc, 4);
    REQUIRE(c.experiments.size() == a.experiments.size());
    for (std::size_t i = 0; i < a.experiments.size(); ++i) CHECK(a.experiments[i].verdict == c.experiments[i].verdict);
    CHECK(a.summary()["seed"] == 3);
    CHECK(a.summary()["scenario"] == "projection");
}

TEST_CASE("run output, overrides and error tagging") {
    Scenario sc = parse_scenario_text(kPlane);
    const auto dir = std::filesystem::temp_directory_path() / "tcs_scenario_test";
    std::filesystem::remove_all(dir);

    RunOptions only_reach;
    only_reach.experiment = "reach";
    RunResult r = run(sc, 0, dir.string(), only_reach);
    REQUIRE(r.experiments.size() == 3);  // lift, collapse, reach
    CHECK(r.find("lift")->verdict == "pass");
    CHECK(r.find("collapse")->verdict == "pass");
    CHECK(r.find("collapse")->metrics["error"] == "NotSubmersion");
    const ExperimentResult* reach = r.find("reach");
    REQUIRE(reach);
    CHECK(reach->verdict == "ok");
    CHECK(reach->metrics["runs"][0]["grid"] == std::vector<int>{10, 10});
    CHECK(std::filesystem::exists(dir / "summary.json"));
    CHECK(std::filesystem::exists(dir / "timings.json"));
    REQUIRE(std::filesystem::exists(dir / "reach_0.csv"));
    std::ifstream csv(dir / "reach_0.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "chart_id,i0,i1,arrival_time");
    std::ifstream js(dir / "summary.json");
    nlohmann::json summary = nlohmann::json::parse(js);
    CHECK(summary == r.summary());
    CHECK(summary.dump().find("seconds") == std::string::npos);

    RunOptions coarse = only_reach;
    coarse.grid = 4;
    coarse.horizon = 0.5;
    RunResult o = run(sc, 0, {}, coarse);
    CHECK(o.find("reach")->metrics["runs"][0]["grid"] == std::vector<int>{4, 4});
    CHECK(o.find("reach")->metrics["runs"][0]["horizon"] == 0.5);

    RunOptions lifts_only;
    lifts_only.kinds = {"-"};
    CHECK(run(sc, 0, {}, lifts_only).experiments.size() == 2);

    try {
        run(parse_scenario_text(std::string(kPlane) + kBadFrame), 0);
        FAIL("no error");
    } catch (const ExperimentError& e) {
        CHECK(e.experiment == "bad_frame");
        CHECK(e.kind == "NotInKernel");
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("expected verdict comparison") {
    RunResult r;
    r.experiments.push_back(ExperimentResult{"a", "reach", "pass", {}, {}, 0.0});
    r.experiments.push_back(ExperimentResult{"b", "stlc", "false", {}, {}, 0.0});
    CHECK(r.all_pass());
    CHECK(compare_verdicts(r, {{"experiments", {{"a", "pass"}, {"b", "false"}}}}).empty());
    CHECK(compare_verdicts(r, {{"experiments", {{"a", "pass"}, {"b", "true"}}}}).size() == 1);
    CHECK(compare_verdicts(r, {{"experiments", {{"a", "pass"}}}}).size() == 1);
    r.experiments.push_back(ExperimentResult{"c", "verify", "fail", {}, {}, 0.0});
    CHECK_FALSE(r.all_pass());

    for (const auto& name : builtin_scenarios()) {
        std::ifstream in(std::string(TCS_SOURCE_DIR) + "/scenarios/expected/" + name + ".json");
        REQUIRE(in);
        nlohmann::json expected = nlohmann::json::parse(in);
        CHECK(expected["experiments"].size() == load_scenario(name).experiments.size());
    }
}
