#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include "scenario_detail.hpp"
#include "tcs/reach.hpp"
#include "tcs/scenario.hpp"

namespace tcs {

namespace {

using namespace detail;
using nlohmann::json;

enum class Cat { Map, Field, System, Control, Second, Morphism, Frame };

struct Ref {
    const char* key;
    Cat cat;
    bool required;
    bool list = false;
};

struct Produce {
    Cat cat;
    bool from_as;  // name from the `as` key, falling back to the block name
};

struct KindSpec {
    const char* kind;
    bool construction;
    std::vector<Ref> refs;
    std::vector<Produce> produces;
};

const std::vector<KindSpec>& kind_specs() {
    static const std::vector<KindSpec> specs{
        {"lift", true, {{"system", Cat::System, true}, {"map", Cat::Map, true}}, {{Cat::Morphism, false}, {Cat::System, true}}},
        {"horizontal_lift", true, {{"system", Cat::System, true}, {"map", Cat::Map, true}}, {{Cat::Morphism, false}, {Cat::System, true}}},
        {"kernel_frame", true, {{"morphism", Cat::Morphism, true}, {"generators", Cat::Field, false, true}}, {{Cat::Frame, false}}},
        {"augment", true, {{"system", Cat::System, true}, {"frame", Cat::Frame, true}}, {{Cat::System, true}}},
        {"slices", true, {{"system", Cat::Second, true}}, {{Cat::System, true}}},
        {"second_order_lift", true, {{"system", Cat::Second, true}, {"map", Cat::Map, true}}, {{Cat::Morphism, false}, {Cat::Second, true}}},
        {"augment_second_order", true, {{"system", Cat::Second, true}, {"frame", Cat::Frame, true}, {"map", Cat::Map, true}}, {{Cat::System, true}}},
        {"reach", false, {{"system", Cat::System, true}}, {}},
        {"reach_monotonicity", false, {{"system", Cat::System, true}}, {}},
        {"reachability_set", false, {{"system", Cat::System, true}}, {}},
        {"fiber_tangent_reachability", false, {{"system", Cat::System, true}}, {}},
        {"stlc", false, {{"system", Cat::System, true}}, {}},
        {"verify", false, {{"morphism", Cat::Morphism, true}, {"system", Cat::System, true}}, {}},
        {"global_in_time", false, {{"morphism", Cat::Morphism, true}, {"system", Cat::System, true}}, {}},
        {"liftable", false, {{"upper", Cat::Control, true}, {"lower", Cat::Control, true}, {"map", Cat::Map, true}, {"verify", Cat::System, false}}, {{Cat::Morphism, true}}},
        {"round_trip", false, {{"system", Cat::System, true}}, {}},
        {"projector", false, {{"map", Cat::Map, true}}, {}},
        {"second_order_check", false, {{"system", Cat::Second, true}}, {}},
        {"geodesic", false, {{"system", Cat::Second, true}}, {}},
    };
    return specs;
}

const KindSpec* find_kind(const std::string& kind) {
    for (const auto& k : kind_specs())
        if (kind == k.kind) return &k;
    return nullptr;
}

std::string produced_name(const Experiment& e) { return e.params["as"] ? as_string(e.params["as"]) : e.name; }

// ---------------------------------------------------------------------------
// run-time registry

struct Context {
    const Scenario& sc;
    const RunOptions& opts;
    std::string out_dir;
    std::map<std::string, SmoothMap> maps;
    std::map<std::string, GeneratedSystem> systems;
    std::map<std::string, ControlSystem> controls;
    std::map<std::string, SecondOrderSystem> second;
    std::map<std::string, Morphism> morphisms;
    std::map<std::string, KernelFrame> frames;

    explicit Context(const Scenario& s, const RunOptions& o)
        : sc(s), opts(o), maps(s.maps), systems(s.systems), controls(s.control_systems), second(s.second_order) {}

    template <class M>
    static const typename M::mapped_type& get(const M& m, const std::string& key) {
        auto it = m.find(key);
        if (it == m.end()) throw UnresolvedReference(key);
        return it->second;
    }

    GeneratedSystem generated(const std::string& key) const {
        if (auto it = systems.find(key); it != systems.end()) return it->second;
        return tcs_from_control_system(get(controls, key));
    }
    ControlSystem control(const std::string& key) const {
        if (auto it = controls.find(key); it != controls.end()) return it->second;
        return control_system_from_tcs(get(systems, key));
    }
};

struct Block {
    const Experiment& e;
    Context& ctx;
    std::uint64_t seed;
    ExperimentResult& result;

    const YAML::Node& p() const { return e.params; }
    const std::map<std::string, double>& params() const { return ctx.sc.parameters; }
    bool has(const char* key) const { return static_cast<bool>(p()[key]); }
    std::string str(const char* key) const { return as_string(require(p(), key)); }
    double num(const char* key, double fallback) const { return has(key) ? as_double(p()[key], params()) : fallback; }
    int integer(const char* key, int fallback) const { return has(key) ? as_int(p()[key]) : fallback; }
    bool flag(const char* key, bool fallback) const { return has(key) ? as_bool(p()[key]) : fallback; }
    double tol(const char* key, double fallback) const { return ctx.opts.tol.value_or(num(key, fallback)); }

    Point point(const YAML::Node& n, const Atlas& atlas) const {
        Point pt;
        if (n.IsMap()) {
            pt.chart = as_int(require(n, "chart"));
            pt.coords = to_vec(as_doubles(require(n, "coords"), params()));
        } else {
            pt.coords = to_vec(as_doubles(n, params()));
        }
        if (pt.coords.size() != atlas.dim())
            throw DimensionMismatch("point at line " + std::to_string(line_of(n)) + " has " +
                                    std::to_string(pt.coords.size()) + " coordinates on '" + atlas.name() + "'");
        if (pt.chart < 0 || pt.chart >= atlas.chart_count()) throw ParseError(line_of(n), "chart out of range");
        return atlas.normalize(pt);
    }

    std::vector<Point> points(const char* key, const Atlas& atlas) const {
        std::vector<Point> out;
        for (const auto& n : sequence(require(p(), key))) out.push_back(point(n, atlas));
        return out;
    }

    std::vector<Point> starts(const Atlas& atlas) const {
        if (has("starts")) return points("starts", atlas);
        return {point(require(p(), "start"), atlas)};
    }

    ReachOptions reach_options(const Atlas& atlas) const {
        ReachOptions o;
        const auto dim = static_cast<std::size_t>(atlas.dim());
        if (ctx.opts.grid) {
            o.grid.cells.assign(dim, *ctx.opts.grid);
        } else {
            const YAML::Node g = require(p(), "grid");
            if (g.IsScalar()) {
                o.grid.cells.assign(dim, as_int(g));
            } else {
                for (const auto& c : sequence(g)) o.grid.cells.push_back(as_int(c));
                if (o.grid.cells.size() != dim) throw DimensionMismatch("grid of '" + e.name + "'");
            }
        }
        for (int c : o.grid.cells)
            if (c <= 0) throw ParseError(line_of(p()["grid"]), "grid counts must be positive");
        o.dwell = ctx.opts.dwell.value_or(num("dwell", 0.1));
        o.horizon = ctx.opts.horizon.value_or(num("horizon", 1.0));
        o.step = ctx.opts.step.value_or(num("step", 0.0));
        return o;
    }

    std::string artifact(const std::string& file) const {
        result.artifacts.push_back(file);
        return (std::filesystem::path(ctx.out_dir) / file).string();
    }
    bool writing() const { return !ctx.out_dir.empty(); }
};

json point_json(const Point& p) { return {{"chart", p.chart}, {"coords", to_std(p.coords)}}; }

json verification_metrics(const VerificationReport& rep) {
    return {{"pushforward_residual", rep.worst_residual},
            {"tolerance", rep.tolerance},
            {"samples", rep.samples},
            {"trajectory_worst_error", rep.details.value("trajectory_worst_error", 0.0)},
            {"pass", rep.pass}};
}

TrajectoryCheckOptions check_options(const Block& b) {
    TrajectoryCheckOptions o;
    o.samples = b.integer("samples", 1000);
    o.schedules = b.integer("schedules", 10);
    o.segments = b.integer("segments", 3);
    o.max_segment = b.num("max_segment", 0.5);
    o.step = b.ctx.opts.step.value_or(b.num("trajectory_step", 1e-2));
    o.seed = b.seed;
    o.tolerance = b.ctx.opts.tol.value_or(b.num("tolerance", 0.0));
    return o;
}

void record_lift(Block& b, const LiftResult& r, const GeneratedSystem& target) {
    VerificationReport rep = verify_trajectory_preserving(r.morphism, target, check_options(b));
    b.result.metrics = {{"generators", r.system.generators().size()},
                        {"min_singular_value", r.min_singular_value},
                        {"generators_independent", r.generators_independent},
                        {"analytic_jacobian", r.morphism.phi().analytic()},
                        {"proper", r.morphism.proper()},
                        {"verification", verification_metrics(rep)}};
    b.result.verdict = rep.pass ? "pass" : "fail";
    b.ctx.morphisms.insert_or_assign(b.e.name, r.morphism);
    b.ctx.systems.insert_or_assign(produced_name(b.e), r.system);
}

void run_lift(Block& b) {
    const GeneratedSystem target = b.ctx.generated(b.str("system"));
    const SmoothMap& phi = Context::get(b.ctx.maps, b.str("map"));
    record_lift(b, lift_system(target, phi, b.flag("proper", false), 200, b.seed), target);
}

void run_horizontal_lift(Block& b) {
    const GeneratedSystem target = b.ctx.generated(b.str("system"));
    const SmoothMap& phi = Context::get(b.ctx.maps, b.str("map"));
    ConnectionFn conn;
    if (b.has("connection")) {
        const Atlas& src = phi.source();
        const int n = phi.target().dim();
        const int k = src.dim() - n;
        std::vector<std::string> vars = src.coord_names();
        if (vars.empty())
            for (int i = 0; i < src.dim(); ++i) vars.push_back("x" + std::to_string(i));
        for (int i = 0; i < n; ++i) vars.push_back("y" + std::to_string(i));
        const YAML::Node c = b.p()["connection"];
        if (static_cast<int>(sequence(c).size()) != k)
            throw DimensionMismatch("connection of '" + b.e.name + "' needs " + std::to_string(k) + " entries");
        auto exprs = compile_list(c, vars, b.params());
        conn = [exprs, n, k](int, const Vec& base, const Vec& y, const Vec& fiber) {
            double buf[2 * kMaxDim];
            for (int i = 0; i < n; ++i) buf[i] = base(i);
            for (int i = 0; i < k; ++i) buf[n + i] = fiber(i);
            for (int i = 0; i < n; ++i) buf[n + k + i] = y(i);
            return eval(exprs, buf);
        };
    }
    record_lift(b, horizontal_lift(target, phi, conn, b.flag("proper", false), 200, b.seed), target);
}

void run_kernel_frame(Block& b) {
    const Morphism& m = Context::get(b.ctx.morphisms, b.str("morphism"));
    const std::string mode = b.has("mode") ? b.str("mode") : "chartwise";
    KernelFrame f;
    if (mode == "chartwise") {
        f = kernel_frame(m, KernelMode::Chartwise, {}, b.integer("samples", 200), b.seed);
    } else if (mode == "global") {
        std::vector<VectorField> user;
        for (const auto& g : sequence(require(b.p(), "generators"))) user.push_back(Context::get(b.ctx.sc.fields, as_string(g)));
        f = kernel_frame(m, KernelMode::Global, user, b.integer("samples", 200), b.seed);
    } else {
        throw ParseError(line_of(b.p()["mode"]), "unknown kernel mode '" + mode + "'");
    }
    b.result.metrics = {{"mode", to_string(f.mode)}, {"rank", f.rank}, {"sections", f.generators.size()}, {"global", f.global}};
    b.result.verdict = "ok";
    b.ctx.frames.insert_or_assign(b.e.name, f);
}

void run_augment(Block& b) {
    const GeneratedSystem sys = b.ctx.generated(b.str("system"));
    const KernelFrame& f = Context::get(b.ctx.frames, b.str("frame"));
    GeneratedSystem aug = augment_with_kernel(sys, f);
    b.result.metrics = {{"generators", aug.generators().size()},
                        {"kernel_sections", aug.kernel() ? aug.kernel()->fields.size() : 0},
                        {"flow_fields", aug.flow_fields().size()}};
    b.result.verdict = "ok";
    b.ctx.systems.insert_or_assign(produced_name(b.e), aug);
}

void run_slices(Block& b) {
    const SecondOrderSystem& s = Context::get(b.ctx.second, b.str("system"));
    GeneratedSystem g = s.slices(b.num("magnitude", 1.0));
    b.result.metrics = {{"generators", g.generators().size()}};
    b.result.verdict = "ok";
    b.ctx.systems.insert_or_assign(produced_name(b.e), g);
}

double velocity_bound(const TangentAtlas& ta) { return ta.atlas->chart(0).hi(ta.base_dim()); }

void run_second_order_lift(Block& b) {
    const SecondOrderSystem& s = Context::get(b.ctx.second, b.str("system"));
    const SmoothMap& phi = Context::get(b.ctx.maps, b.str("map"));
    SecondOrderLift lift = second_order_lift(s, phi, b.num("velocity_bound", velocity_bound(s.tangent())), 200, b.seed);
    const int samples = b.integer("samples", 1000);
    const double tolerance = b.tol("tolerance", 1e-9);
    PredicateResult so = is_second_order(lift.system, samples, b.seed);
    const double related = second_order_relatedness_residual(lift, s, samples, b.seed);
    VerificationReport rep = verify_trajectory_preserving(lift.morphism, s.slices(1.0), check_options(b));
    const bool pass = so.holds && related <= tolerance && rep.pass;
    b.result.metrics = {{"is_second_order", so.holds},
                        {"second_order_residual", so.residual},
                        {"relatedness_residual", related},
                        {"tolerance", tolerance},
                        {"verification", verification_metrics(rep)}};
    b.result.verdict = pass ? "pass" : "fail";
    b.ctx.morphisms.insert_or_assign(b.e.name, lift.morphism);
    b.ctx.second.insert_or_assign(produced_name(b.e), lift.system);
}

void run_augment_second_order(Block& b) {
    const SecondOrderSystem& s = Context::get(b.ctx.second, b.str("system"));
    const KernelFrame& f = Context::get(b.ctx.frames, b.str("frame"));
    const SmoothMap& phi = Context::get(b.ctx.maps, b.str("map"));
    GeneratedSystem aug = augment_second_order(s, f, phi, b.num("control_magnitude", 1.0), b.num("kernel_magnitude", 1.0),
                                               b.integer("samples", 200), b.seed);
    b.result.metrics = {{"generators", aug.generators().size()}};
    b.result.verdict = "ok";
    b.ctx.systems.insert_or_assign(produced_name(b.e), aug);
}

void run_reach(Block& b) {
    const GeneratedSystem sys = b.ctx.generated(b.str("system"));
    const ReachOptions o = b.reach_options(sys.atlas());
    json runs = json::array();
    double worst = 1.0;
    const auto starts = b.starts(sys.atlas());
    for (std::size_t i = 0; i < starts.size(); ++i) {
        ReachReport r = reach(sys, starts[i], o);
        worst = std::min(worst, r.coverage);
        runs.push_back(summary_json(r));
        if (b.writing()) {
            std::ofstream csv(b.artifact(b.e.name + "_" + std::to_string(i) + ".csv"));
            write_csv(csv, r);
        }
    }
    b.result.metrics = {{"runs", runs}, {"min_coverage", worst}};
    if (b.has("min_coverage")) {
        const double need = b.num("min_coverage", 0.0);
        b.result.metrics["required_coverage"] = need;
        b.result.verdict = worst >= need ? "pass" : "fail";
    } else {
        b.result.verdict = "ok";
    }
}

void run_reach_monotonicity(Block& b) {
    const GeneratedSystem sys = b.ctx.generated(b.str("system"));
    ReachOptions o = b.reach_options(sys.atlas());
    std::vector<double> horizons = as_doubles(require(b.p(), "horizons"), b.params());
    std::sort(horizons.begin(), horizons.end());
    bool nested = true;
    json rows = json::array();
    for (const auto& start : b.starts(sys.atlas())) {
        std::optional<ReachReport> prev;
        for (double t : horizons) {
            o.horizon = t;
            ReachReport r = reach(sys, start, o);
            if (prev) nested = nested && visited_subset(*prev, r);
            rows.push_back({{"start", point_json(start)}, {"horizon", t}, {"visited", r.arrival.size()}});
            prev = std::move(r);
        }
    }
    b.result.metrics = {{"nested", nested}, {"runs", rows}};
    b.result.verdict = nested ? "pass" : "fail";
}

void run_reachability_set(Block& b) {
    const GeneratedSystem sys = b.ctx.generated(b.str("system"));
    const ReachOptions o = b.reach_options(sys.atlas());
    ReachabilitySetResult r = is_reachability_set(sys, b.points("points", sys.atlas()), o);
    std::size_t hits = 0;
    for (const auto& row : r.witness) hits += static_cast<std::size_t>(std::count(row.begin(), row.end(), true));
    b.result.metrics = {{"holds", r.holds}, {"points", r.witness.size()}, {"reached_pairs", hits}, {"witness", r.witness}};
    b.result.verdict = r.holds ? "true" : "false";
}

void run_stlc(Block& b) {
    const GeneratedSystem sys = b.ctx.generated(b.str("system"));
    const ReachOptions o = b.reach_options(sys.atlas());
    const Point x0 = b.point(require(b.p(), "point"), sys.atlas());
    const std::vector<double> times = as_doubles(require(b.p(), "times"), b.params());
    std::vector<bool> v = stlc_probe(sys, x0, times, o);
    const bool all = !v.empty() && std::all_of(v.begin(), v.end(), [](bool x) { return x; });
    b.result.metrics = {{"times", times}, {"interior", v}};
    b.result.verdict = all ? "true" : "false";
}

void run_verify(Block& b) {
    const Morphism& m = Context::get(b.ctx.morphisms, b.str("morphism"));
    const GeneratedSystem target = b.ctx.generated(b.str("system"));
    VerificationReport rep = verify_trajectory_preserving(m, target, check_options(b));
    b.result.metrics = verification_metrics(rep);
    if (b.writing()) std::ofstream(b.artifact(b.e.name + "_report.json")) << rep.to_json().dump(2) << '\n';
    b.result.verdict = rep.pass ? "pass" : "fail";
}

void run_global_in_time(Block& b) {
    const Morphism& m = Context::get(b.ctx.morphisms, b.str("morphism"));
    const GeneratedSystem target = b.ctx.generated(b.str("system"));
    const double horizon = b.ctx.opts.horizon.value_or(b.num("horizon", 2.0));
    const double h = b.ctx.opts.step.value_or(b.num("step", 1e-3));
    GlobalInTimeReport rep = verify_global_in_time(m, target, b.starts(m.phi().source()), horizon, h);
    b.result.metrics = rep.to_json();
    b.result.verdict = rep.pass ? "pass" : "fail";
}

void run_liftable(Block& b) {
    const ControlSystem upper = b.ctx.control(b.str("upper"));
    const ControlSystem lower = b.ctx.control(b.str("lower"));
    const SmoothMap& phi = Context::get(b.ctx.maps, b.str("map"));
    Liftability res = check_liftable(upper, lower, phi, b.integer("samples", 200), b.seed);
    json pairs = json::array();
    for (const auto& [u, l] : res.lifting) pairs.push_back({to_std(u), to_std(l)});
    b.result.metrics = {{"liftable", res.liftable}, {"residuals", res.residuals}, {"lifting", pairs}};
    b.result.verdict = res.liftable ? "true" : "false";
    if (!res.liftable) return;
    Morphism m = morphism_from_lifting(res.lifting, upper, lower, phi, 60, b.seed);
    if (upper.affine_decomposition() && lower.affine_decomposition()) {
        Rng rng(b.seed);
        b.result.metrics["affine_lifting_residual"] = affine_lifting_residual(m, upper, lower, rng, 200);
    }
    if (b.has("verify")) {
        VerificationReport rep = verify_trajectory_preserving(m, b.ctx.generated(b.str("verify")), check_options(b));
        b.result.metrics["verification"] = verification_metrics(rep);
        if (!rep.pass) b.result.verdict = "fail";
    }
    b.ctx.morphisms.insert_or_assign(produced_name(b.e), m);
}

void run_round_trip(Block& b) {
    const GeneratedSystem sys = b.ctx.generated(b.str("system"));
    const ControlSystem cs = control_system_from_tcs(sys);
    const GeneratedSystem back = tcs_from_control_system(cs);
    bool exact = back.generators().size() == sys.generators().size();
    for (std::size_t i = 0; exact && i < sys.generators().size(); ++i)
        exact = back.generators()[i].same_as(sys.generators()[i]);
    b.result.metrics = {{"generators", sys.generators().size()}, {"controls", cs.control_points().size()}, {"exact", exact}};
    b.result.verdict = exact ? "pass" : "fail";
}

void run_projector(Block& b) {
    const SmoothMap& phi = Context::get(b.ctx.maps, b.str("map"));
    Rng rng(b.seed);
    auto [idem, jp] = projector_residuals(phi, rng, b.integer("samples", 1000));
    const double tolerance = b.tol("tolerance", 1e-9);
    b.result.metrics = {{"idempotence_residual", idem}, {"kernel_residual", jp}, {"tolerance", tolerance}};
    b.result.verdict = idem <= tolerance && jp <= tolerance ? "pass" : "fail";
}

void run_second_order_check(Block& b) {
    const SecondOrderSystem& s = Context::get(b.ctx.second, b.str("system"));
    PredicateResult r = is_second_order(s, b.integer("samples", 1000), b.seed);
    b.result.metrics = {{"residual", r.residual}};
    b.result.verdict = r.holds ? "pass" : "fail";
}

void run_geodesic(Block& b) {
    const SecondOrderSystem& s = Context::get(b.ctx.second, b.str("system"));
    const Atlas& atlas = *s.tangent().atlas;
    const Point x0 = b.point(require(b.p(), "start"), atlas);
    const double duration = b.num("duration", 1.0);
    const double h = b.ctx.opts.step.value_or(b.num("step", 1e-3));
    const YAML::Node cf = require(b.p(), "closed_form");
    if (static_cast<int>(sequence(cf).size()) != atlas.dim())
        throw DimensionMismatch("closed_form of '" + b.e.name + "' needs " + std::to_string(atlas.dim()) + " entries");
    auto exact = compile_list(cf, {"t"}, b.params());
    Trajectory t = integrate(GeneratedSystem(s.tangent().atlas, {s.drift()}), x0, Schedule().generator(0, duration), h);
    double worst = 0.0;
    for (std::size_t k = 0; k < t.points.size(); ++k) {
        const Vec want = eval(exact, &t.times[k]);
        worst = std::max(worst, max_abs(Vec(t.points[k].coords - want)));
    }
    const double tolerance = b.tol("tolerance", 1e-6);
    b.result.metrics = {{"max_error", worst}, {"tolerance", tolerance}, {"samples", t.points.size()}, {"step", h}};
    b.result.verdict = worst <= tolerance ? "pass" : "fail";
}

const std::map<std::string, std::function<void(Block&)>>& runners() {
    static const std::map<std::string, std::function<void(Block&)>> r{
        {"lift", run_lift},
        {"horizontal_lift", run_horizontal_lift},
        {"kernel_frame", run_kernel_frame},
        {"augment", run_augment},
        {"slices", run_slices},
        {"second_order_lift", run_second_order_lift},
        {"augment_second_order", run_augment_second_order},
        {"reach", run_reach},
        {"reach_monotonicity", run_reach_monotonicity},
        {"reachability_set", run_reachability_set},
        {"fiber_tangent_reachability", run_reachability_set},
        {"stlc", run_stlc},
        {"verify", run_verify},
        {"global_in_time", run_global_in_time},
        {"liftable", run_liftable},
        {"round_trip", run_round_trip},
        {"projector", run_projector},
        {"second_order_check", run_second_order_check},
        {"geodesic", run_geodesic},
    };
    return r;
}

std::uint64_t block_seed(std::uint64_t seed, std::size_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace

void validate_experiments(const Scenario& sc) {
    std::map<Cat, std::set<std::string>> known;
    for (const auto& kv : sc.maps) known[Cat::Map].insert(kv.first);
    for (const auto& kv : sc.fields) known[Cat::Field].insert(kv.first);
    for (const auto& kv : sc.systems) known[Cat::System].insert(kv.first);
    for (const auto& kv : sc.control_systems) known[Cat::Control].insert(kv.first);
    for (const auto& kv : sc.second_order) known[Cat::Second].insert(kv.first);

    auto resolves = [&](Cat cat, const std::string& name) {
        if (cat == Cat::System || cat == Cat::Control) return known[Cat::System].count(name) + known[Cat::Control].count(name) > 0;
        return known[cat].count(name) > 0;
    };
    for (const auto& e : sc.experiments) {
        const KindSpec* spec = find_kind(e.kind);
        if (!spec) throw ParseError(e.line, "unknown experiment kind '" + e.kind + "'");
        for (const auto& ref : spec->refs) {
            const YAML::Node v = e.params[ref.key];
            if (!v) {
                if (ref.required) throw ParseError(e.line, "experiment '" + e.name + "' is missing '" + ref.key + "'");
                continue;
            }
            const std::vector<std::string> names = ref.list ? as_strings(v) : std::vector<std::string>{as_string(v)};
            for (const auto& n : names)
                if (!resolves(ref.cat, n)) throw UnresolvedReference(n);
        }
        if (e.params["expect_error"]) as_string(e.params["expect_error"]);
        for (const auto& pr : spec->produces) known[pr.cat].insert(pr.from_as ? produced_name(e) : e.name);
    }
}

bool construction_kind(const std::string& kind) {
    const KindSpec* k = find_kind(kind);
    return k && k->construction;
}

std::vector<std::string> experiment_kinds() {
    std::vector<std::string> out;
    for (const auto& k : kind_specs()) out.emplace_back(k.kind);
    return out;
}

std::string error_kind(const std::exception& e) {
#define TCS_KIND(T) \
    if (dynamic_cast<const T*>(&e)) return #T;
    TCS_KIND(OutOfAtlas)
    TCS_KIND(DimensionMismatch)
    TCS_KIND(Escape)
    TCS_KIND(UnresolvedSelector)
    TCS_KIND(EmptyRestriction)
    TCS_KIND(ControlOutOfSet)
    TCS_KIND(NotSubmersion)
    TCS_KIND(SingularGram)
    TCS_KIND(NotAdapted)
    TCS_KIND(NotInKernel)
    TCS_KIND(RankDeficient)
    TCS_KIND(IndependenceViolated)
    TCS_KIND(UnmappedControl)
    TCS_KIND(FrameNotKernel)
    TCS_KIND(ParseError)
    TCS_KIND(UnresolvedReference)
#undef TCS_KIND
    return "Error";
}

bool RunResult::all_pass() const {
    return std::none_of(experiments.begin(), experiments.end(), [](const ExperimentResult& r) { return r.failed(); });
}

const ExperimentResult* RunResult::find(const std::string& name) const {
    for (const auto& r : experiments)
        if (r.name == name) return &r;
    return nullptr;
}

json RunResult::summary() const {
    json ex = json::array();
    for (const auto& r : experiments) {
        json m = r.metrics;
        if (!r.artifacts.empty()) m["artifacts"] = r.artifacts;
        ex.push_back({{"name", r.name}, {"kind", r.kind}, {"verdict", r.verdict}, {"metrics", m}});
    }
    return {{"scenario", scenario}, {"seed", seed}, {"experiments", ex}};
}

json RunResult::timings() const {
    json ex = json::array();
    for (const auto& r : experiments) ex.push_back({{"name", r.name}, {"seconds", r.seconds}});
    return {{"scenario", scenario}, {"total_seconds", seconds}, {"experiments", ex}};
}

RunResult run(const Scenario& scenario, std::uint64_t seed, const std::string& output_dir, const RunOptions& options) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    RunResult out;
    out.scenario = scenario.name;
    out.seed = seed;
    if (!output_dir.empty()) std::filesystem::create_directories(output_dir);
    Context ctx(scenario, options);
    ctx.out_dir = output_dir;

    for (std::size_t i = 0; i < scenario.experiments.size(); ++i) {
        const Experiment& e = scenario.experiments[i];
        if (!construction_kind(e.kind)) {
            if (!options.kinds.empty() && !options.kinds.count(e.kind)) continue;
            if (options.experiment && *options.experiment != e.name) continue;
        }
        ExperimentResult res{e.name, e.kind, "", json::object(), {}, 0.0};
        Block block{e, ctx, block_seed(seed, i), res};
        const auto start = clock::now();
        const std::string expected = e.params["expect_error"] ? as_string(e.params["expect_error"]) : "";
        try {
            runners().at(e.kind)(block);
            if (!expected.empty()) {
                res.verdict = "fail";
                res.metrics["expected_error"] = expected;
            }
        } catch (const Error& err) {
            const std::string kind = error_kind(err);
            if (expected.empty()) throw ExperimentError(e.name, kind, err.what());
            res.metrics = {{"expected_error", expected}, {"error", kind}, {"message", err.what()}};
            res.verdict = kind == expected ? "pass" : "fail";
        } catch (const YAML::Exception& err) {
            throw ExperimentError(e.name, "ParseError", "line " + std::to_string(err.mark.line + 1) + ": " + err.msg);
        }
        res.seconds = std::chrono::duration<double>(clock::now() - start).count();
        out.experiments.push_back(std::move(res));
    }
    out.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    for (const auto& r : out.experiments)
        for (const auto& a : r.artifacts) out.artifacts.push_back(a);
    if (!output_dir.empty()) {
        const std::filesystem::path dir(output_dir);
        std::ofstream(dir / "summary.json") << out.summary().dump(2) << '\n';
        std::ofstream(dir / "timings.json") << out.timings().dump(2) << '\n';
        out.artifacts.push_back("summary.json");
        out.artifacts.push_back("timings.json");
    }
    return out;
}

std::vector<std::string> compare_verdicts(const RunResult& result, const json& expected) {
    std::vector<std::string> problems;
    const json& want = expected.at("experiments");
    for (const auto& [name, verdict] : want.items()) {
        const ExperimentResult* r = result.find(name);
        if (!r) {
            problems.push_back(name + ": not run");
            continue;
        }
        if (r->verdict != verdict.get<std::string>())
            problems.push_back(name + ": expected " + verdict.get<std::string>() + ", got " + r->verdict);
    }
    for (const auto& r : result.experiments)
        if (!want.contains(r.name)) problems.push_back(r.name + ": no expected verdict");
    return problems;
}

} // namespace tcs
