#include <fstream>
#include <sstream>

#include "scenario_detail.hpp"
#include "tcs/expr.hpp"
#include "tcs/scenario.hpp"

namespace tcs {

namespace detail {

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

YAML::Node require(const YAML::Node& node, const std::string& key) {
    if (!node.IsMap()) throw ParseError(line_of(node), "expected a mapping");
    YAML::Node v = node[key];
    if (!v) throw ParseError(line_of(node), "missing key '" + key + "'");
    return v;
}

std::string as_string(const YAML::Node& n) {
    if (!n.IsScalar()) throw ParseError(line_of(n), "expected a scalar");
    return n.Scalar();
}

double as_double(const YAML::Node& n, const std::map<std::string, double>& params) {
    if (!n.IsScalar()) throw ParseError(line_of(n), "expected a number");
    Expr e = Expr::compile(n.Scalar(), {}, params, line_of(n));
    return e(nullptr);
}

int as_int(const YAML::Node& n) {
    try {
        return n.as<int>();
    } catch (const YAML::Exception&) {
        throw ParseError(line_of(n), "expected an integer");
    }
}

bool as_bool(const YAML::Node& n) {
    try {
        return n.as<bool>();
    } catch (const YAML::Exception&) {
        throw ParseError(line_of(n), "expected true or false");
    }
}

YAML::Node sequence(const YAML::Node& n) {
    if (!n.IsSequence()) throw ParseError(line_of(n), "expected a list");
    return n;
}

std::vector<double> as_doubles(const YAML::Node& n, const std::map<std::string, double>& params) {
    std::vector<double> out;
    for (const auto& v : sequence(n)) out.push_back(as_double(v, params));
    return out;
}

std::vector<std::string> as_strings(const YAML::Node& n) {
    std::vector<std::string> out;
    for (const auto& v : sequence(n)) out.push_back(as_string(v));
    return out;
}

std::vector<Expr> compile_list(const YAML::Node& n, const std::vector<std::string>& vars,
                               const std::map<std::string, double>& params) {
    std::vector<Expr> out;
    for (const auto& v : sequence(n)) out.push_back(Expr::compile(as_string(v), vars, params, line_of(v)));
    return out;
}

Vec eval(const std::vector<Expr>& exprs, const double* vars) {
    Vec v(static_cast<Eigen::Index>(exprs.size()));
    for (std::size_t i = 0; i < exprs.size(); ++i) v(static_cast<Eigen::Index>(i)) = exprs[i](vars);
    return v;
}

} // namespace detail

namespace {

using namespace detail;

std::vector<std::string> coord_names(const Atlas& a) {
    if (!a.coord_names().empty()) return a.coord_names();
    std::vector<std::string> names;
    for (int i = 0; i < a.dim(); ++i) names.push_back("x" + std::to_string(i));
    return names;
}

void check_count(const YAML::Node& n, std::size_t expected, const std::string& what) {
    if (n.size() != expected)
        throw DimensionMismatch(what + " has " + std::to_string(n.size()) + " entries, expected " +
                                std::to_string(expected) + " (line " + std::to_string(line_of(n)) + ")");
}

std::vector<Expr> compile_matrix(const YAML::Node& n, int rows, int cols, const std::vector<std::string>& vars,
                                 const std::map<std::string, double>& params, const std::string& what) {
    check_count(sequence(n), static_cast<std::size_t>(rows), what);
    std::vector<Expr> out;
    for (const auto& row : n) {
        check_count(sequence(row), static_cast<std::size_t>(cols), what + " row");
        for (const auto& e : compile_list(row, vars, params)) out.push_back(e);
    }
    return out;
}

Mat eval_matrix(const std::vector<Expr>& m, int rows, int cols, const double* vars) {
    Mat out(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out(r, c) = m[static_cast<std::size_t>(r * cols + c)](vars);
    return out;
}

Vec vec_of(const YAML::Node& n, const std::map<std::string, double>& params) { return to_vec(as_doubles(n, params)); }

AtlasPtr parse_atlas(const YAML::Node& n, const std::map<std::string, double>& params) {
    const std::string name = as_string(require(n, "name"));
    const std::string kind = n["kind"] ? as_string(n["kind"]) : "box";
    std::optional<Atlas> atlas;
    if (kind == "mobius") {
        atlas = Atlas::mobius(name);
    } else if (kind == "circle") {
        atlas = n["period"] ? Atlas::circle(name, as_double(n["period"], params)) : Atlas::circle(name);
    } else if (kind == "torus") {
        atlas = n["period"] ? Atlas::torus(name, as_double(n["period"], params)) : Atlas::torus(name);
    } else if (kind == "box") {
        const Vec lo = vec_of(require(n, "lo"), params);
        const Vec hi = vec_of(require(n, "hi"), params);
        if (lo.size() != hi.size()) throw DimensionMismatch("atlas '" + name + "': lo and hi differ in length");
        atlas = Atlas::box(name, lo, hi);
    } else if (kind == "charts") {
        std::vector<Chart> charts;
        int dim = -1;
        for (const auto& c : sequence(require(n, "charts"))) {
            Chart chart{vec_of(require(c, "lo"), params), vec_of(require(c, "hi"), params), {}};
            if (chart.lo.size() != chart.hi.size() || (dim >= 0 && chart.lo.size() != dim))
                throw DimensionMismatch("atlas '" + name + "' chart at line " + std::to_string(line_of(c)));
            dim = static_cast<int>(chart.lo.size());
            if (c["axes"]) {
                check_count(sequence(c["axes"]), static_cast<std::size_t>(dim), "axes of atlas '" + name + "'");
                for (const auto& ax : c["axes"]) {
                    AxisGluing g;
                    if (ax["periodic"]) g.periodic = as_bool(ax["periodic"]);
                    if (ax["flips"])
                        for (const auto& f : sequence(ax["flips"])) g.flips.push_back(as_int(f));
                    chart.axes.push_back(g);
                }
            }
            charts.push_back(chart);
        }
        if (charts.empty()) throw ParseError(line_of(n), "atlas '" + name + "' has no charts");
        atlas.emplace(name, dim, charts);
    } else {
        throw ParseError(line_of(n["kind"]), "unknown atlas kind '" + kind + "'");
    }

    if (n["coords"]) {
        auto names = as_strings(n["coords"]);
        check_count(n["coords"], static_cast<std::size_t>(atlas->dim()), "coords of atlas '" + name + "'");
        atlas->set_coord_names(names);
    }
    const auto vars = coord_names(*atlas);
    const int dim = atlas->dim();

    if (n["transitions"]) {
        std::vector<Transition> ts;
        for (const auto& t : sequence(n["transitions"])) {
            Transition tr;
            tr.from = as_int(require(t, "from"));
            tr.to = as_int(require(t, "to"));
            if (tr.from < 0 || tr.to < 0 || tr.from >= atlas->chart_count() || tr.to >= atlas->chart_count())
                throw ParseError(line_of(t), "transition refers to a missing chart");
            const YAML::Node map = require(t, "map");
            check_count(sequence(map), static_cast<std::size_t>(dim), "transition map");
            auto value = compile_list(map, vars, params);
            tr.map = [value](const Vec& x) { return eval(value, x.data()); };
            if (t["jacobian"]) {
                auto jac = compile_matrix(t["jacobian"], dim, dim, vars, params, "transition jacobian");
                tr.jacobian = [jac, dim](const Vec& x) { return eval_matrix(jac, dim, dim, x.data()); };
            }
            ts.push_back(std::move(tr));
        }
        const bool shared = n["shared"] ? as_bool(n["shared"]) : true;
        atlas->set_transitions(std::move(ts), shared);
    } else if (n["shared"]) {
        atlas->set_transitions({}, as_bool(n["shared"]));
    }

    if (n["metric"]) {
        auto g = compile_matrix(n["metric"], dim, dim, vars, params, "metric of atlas '" + name + "'");
        atlas->set_metric([g, dim](int, const Vec& x) { return eval_matrix(g, dim, dim, x.data()); });
    }
    return std::make_shared<Atlas>(std::move(*atlas));
}

template <class Map>
const typename Map::mapped_type& lookup(const Map& m, const YAML::Node& n) {
    const std::string key = as_string(n);
    auto it = m.find(key);
    if (it == m.end()) throw UnresolvedReference(key);
    return it->second;
}

SmoothMap parse_map(const YAML::Node& n, const Scenario& sc) {
    const std::string name = as_string(require(n, "name"));
    AtlasPtr src = lookup(sc.atlases, require(n, "source"));
    AtlasPtr dst = lookup(sc.atlases, require(n, "target"));
    const auto vars = coord_names(*src);
    const YAML::Node value = require(n, "value");
    check_count(sequence(value), static_cast<std::size_t>(dst->dim()), "value of map '" + name + "'");
    auto f = compile_list(value, vars, sc.parameters);
    std::optional<int> chart;
    if (n["chart"]) {
        chart = as_int(n["chart"]);
        if (*chart < 0 || *chart >= dst->chart_count()) throw ParseError(line_of(n["chart"]), "target chart out of range");
    }
    SmoothMap::ValueFn vf = [f, chart](const Point& p) { return Point{chart.value_or(p.chart), eval(f, p.coords.data())}; };
    SmoothMap::JacobianFn jf;
    if (n["jacobian"]) {
        const int rows = dst->dim();
        const int cols = src->dim();
        auto jac = compile_matrix(n["jacobian"], rows, cols, vars, sc.parameters, "jacobian of map '" + name + "'");
        jf = [jac, rows, cols](const Point& p) { return eval_matrix(jac, rows, cols, p.coords.data()); };
    }
    if (!chart && src->chart_count() > dst->chart_count())
        throw ParseError(line_of(n), "map '" + name + "' needs a target chart");
    return SmoothMap(src, dst, vf, jf, name);
}

VectorField parse_field(const YAML::Node& n, const Scenario& sc) {
    const std::string name = as_string(require(n, "name"));
    AtlasPtr atlas = lookup(sc.atlases, require(n, "atlas"));
    const auto vars = coord_names(*atlas);
    const auto dim = static_cast<std::size_t>(atlas->dim());
    if (n["charts"]) {
        std::vector<std::vector<Expr>> per_chart;
        check_count(sequence(n["charts"]), static_cast<std::size_t>(atlas->chart_count()), "charts of field '" + name + "'");
        for (const auto& c : n["charts"]) {
            check_count(sequence(c), dim, "components of field '" + name + "'");
            per_chart.push_back(compile_list(c, vars, sc.parameters));
        }
        return VectorField(
            atlas, [per_chart](int chart, const Vec& x) { return eval(per_chart[static_cast<std::size_t>(chart)], x.data()); },
            name);
    }
    const YAML::Node comps = require(n, "components");
    check_count(sequence(comps), dim, "components of field '" + name + "'");
    auto f = compile_list(comps, vars, sc.parameters);
    return VectorField(atlas, [f](int, const Vec& x) { return eval(f, x.data()); }, name);
}

VectorField field_ref(const YAML::Node& n, const Scenario& sc, const AtlasPtr& atlas) {
    const std::string key = as_string(n);
    if (key == "zero") return VectorField::zero(atlas);
    const VectorField& f = lookup(sc.fields, n);
    if (f.atlas_ptr() != atlas)
        throw DimensionMismatch("field '" + key + "' lives on '" + f.atlas().name() + "', expected '" + atlas->name() + "'");
    return f;
}

GeneratedSystem parse_system(const YAML::Node& n, const Scenario& sc) {
    const std::string name = as_string(require(n, "name"));
    AtlasPtr atlas = lookup(sc.atlases, require(n, "atlas"));
    std::vector<VectorField> gens;
    for (const auto& g : sequence(require(n, "generators"))) gens.push_back(field_ref(g, sc, atlas));
    return GeneratedSystem(atlas, gens, name);
}

ControlSystem parse_control_system(const YAML::Node& n, const Scenario& sc) {
    const std::string name = as_string(require(n, "name"));
    AtlasPtr atlas = lookup(sc.atlases, require(n, "atlas"));
    std::vector<Vec> points;
    std::optional<ControlBox> box;
    if (n["controls"]) {
        for (const auto& u : sequence(n["controls"])) points.push_back(vec_of(u, sc.parameters));
        if (points.empty()) throw ParseError(line_of(n["controls"]), "empty control set");
    } else {
        const YAML::Node b = require(n, "box");
        box = ControlBox{vec_of(require(b, "lo"), sc.parameters), vec_of(require(b, "hi"), sc.parameters)};
        if (box->lo.size() != box->hi.size()) throw DimensionMismatch("control box of '" + name + "'");
    }
    const Eigen::Index m = box ? box->lo.size() : points.front().size();
    for (const auto& u : points)
        if (u.size() != m) throw DimensionMismatch("controls of '" + name + "' differ in length");

    if (n["value"]) {
        auto vars = coord_names(*atlas);
        const int dim = atlas->dim();
        for (Eigen::Index a = 0; a < m; ++a) vars.push_back("u" + std::to_string(a));
        check_count(sequence(n["value"]), static_cast<std::size_t>(dim), "value of control system '" + name + "'");
        auto f = compile_list(n["value"], vars, sc.parameters);
        ControlSystem::FieldMap fm = [f, dim](int, const Vec& x, const Vec& u) {
            double buf[2 * kMaxDim];
            for (int i = 0; i < dim; ++i) buf[i] = x(i);
            for (Eigen::Index a = 0; a < u.size(); ++a) buf[dim + a] = u(a);
            return eval(f, buf);
        };
        return box ? ControlSystem(atlas, *box, fm, name) : ControlSystem(atlas, points, fm, name);
    }
    VectorField drift = n["drift"] ? field_ref(n["drift"], sc, atlas) : VectorField::zero(atlas);
    std::vector<VectorField> fields;
    for (const auto& f : sequence(require(n, "fields"))) fields.push_back(field_ref(f, sc, atlas));
    if (static_cast<Eigen::Index>(fields.size()) != m)
        throw DimensionMismatch("control system '" + name + "' has " + std::to_string(fields.size()) +
                                " control fields for controls of length " + std::to_string(m));
    return box ? ControlSystem::affine(drift, fields, *box, name) : ControlSystem::affine(drift, fields, points, name);
}

SecondOrderSystem parse_second_order(const YAML::Node& n, const Scenario& sc) {
    const std::string name = as_string(require(n, "name"));
    AtlasPtr base = lookup(sc.atlases, require(n, "base"));
    const double bound = n["velocity_bound"] ? as_double(n["velocity_bound"], sc.parameters) : 10.0;
    const int dim = base->dim();
    auto vars = coord_names(*base);
    for (int i = 0; i < dim; ++i) vars.push_back("v_" + vars[static_cast<std::size_t>(i)]);
    auto local_fn = [dim](std::vector<Expr> e) -> LocalFn {
        return [e, dim](int, const Vec& x, const Vec& y) {
            double buf[2 * kMaxDim];
            for (int i = 0; i < dim; ++i) {
                buf[i] = x(i);
                buf[dim + i] = y(i);
            }
            return eval(e, buf);
        };
    };
    LocalData data;
    if (n["gamma"]) {
        check_count(sequence(n["gamma"]), static_cast<std::size_t>(dim), "gamma of '" + name + "'");
        data.gamma = local_fn(compile_list(n["gamma"], vars, sc.parameters));
    } else {
        data.gamma = [dim](int, const Vec&, const Vec&) { return Vec(Vec::Zero(dim)); };
    }
    if (n["controls"])
        for (const auto& g : sequence(n["controls"])) {
            check_count(sequence(g), static_cast<std::size_t>(dim), "control of '" + name + "'");
            data.g.push_back(local_fn(compile_list(g, vars, sc.parameters)));
        }
    return SecondOrderSystem::from_local(tangent_atlas(base, bound), data, name);
}

SecondOrderSystem parse_connection(const YAML::Node& n, const Scenario& sc) {
    const std::string name = as_string(require(n, "name"));
    AtlasPtr base = lookup(sc.atlases, require(n, "base"));
    const double bound = n["velocity_bound"] ? as_double(n["velocity_bound"], sc.parameters) : 10.0;
    ConnectionSystem cs{base, {}, {}};
    if (n["christoffel"]) {
        const auto dim = static_cast<std::size_t>(base->dim());
        check_count(sequence(n["christoffel"]), dim * dim * dim, "christoffel symbols of '" + name + "'");
        auto g = compile_list(n["christoffel"], coord_names(*base), sc.parameters);
        cs.christoffel = [g](int, const Vec& x) {
            std::vector<double> out;
            out.reserve(g.size());
            for (const auto& e : g) out.push_back(e(x.data()));
            return out;
        };
    }
    if (n["controls"])
        for (const auto& f : sequence(n["controls"])) cs.controls.push_back(field_ref(f, sc, base));
    try {
        return geodesic_spray(cs, bound, name);
    } catch (const Error& e) {
        throw ParseError(line_of(n), "connection '" + name + "': " + e.what());
    }
}

template <class Map, class Value>
void insert_unique(Map& m, const std::string& name, Value v, const YAML::Node& n) {
    if (m.count(name)) throw ParseError(line_of(n), "duplicate name '" + name + "'");
    m.emplace(name, std::move(v));
}

} // namespace

Scenario parse_scenario_text(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ParseError(e.mark.line + 1, e.msg);
    }
    if (!root.IsMap()) throw ParseError(1, "scenario must be a mapping");
    Scenario sc;
    try {
        sc.name = as_string(require(root, "name"));
        if (root["description"]) sc.description = as_string(root["description"]);
        if (root["parameters"]) {
            if (!root["parameters"].IsMap()) throw ParseError(line_of(root["parameters"]), "parameters must be a mapping");
            for (const auto& kv : root["parameters"]) sc.parameters[as_string(kv.first)] = as_double(kv.second, sc.parameters);
        }
        if (root["atlases"])
            for (const auto& n : sequence(root["atlases"])) {
                AtlasPtr a = parse_atlas(n, sc.parameters);
                insert_unique(sc.atlases, a->name(), a, n);
            }
        if (root["maps"])
            for (const auto& n : sequence(root["maps"])) insert_unique(sc.maps, as_string(require(n, "name")), parse_map(n, sc), n);
        if (root["fields"])
            for (const auto& n : sequence(root["fields"])) {
                const std::string name = as_string(require(n, "name"));
                if (name == "zero") throw ParseError(line_of(n), "'zero' is reserved");
                insert_unique(sc.fields, name, parse_field(n, sc), n);
            }
        if (root["systems"])
            for (const auto& n : sequence(root["systems"]))
                insert_unique(sc.systems, as_string(require(n, "name")), parse_system(n, sc), n);
        if (root["control_systems"])
            for (const auto& n : sequence(root["control_systems"]))
                insert_unique(sc.control_systems, as_string(require(n, "name")), parse_control_system(n, sc), n);
        if (root["second_order"])
            for (const auto& n : sequence(root["second_order"]))
                insert_unique(sc.second_order, as_string(require(n, "name")), parse_second_order(n, sc), n);
        if (root["connections"])
            for (const auto& n : sequence(root["connections"]))
                insert_unique(sc.second_order, as_string(require(n, "name")), parse_connection(n, sc), n);
        if (root["experiments"] && !root["experiments"].IsNull()) {
            std::set<std::string> names;
            for (const auto& n : sequence(root["experiments"])) {
                Experiment e{as_string(require(n, "name")), as_string(require(n, "kind")), line_of(n), n};
                if (!names.insert(e.name).second) throw ParseError(e.line, "duplicate experiment '" + e.name + "'");
                sc.experiments.push_back(std::move(e));
            }
        }
    } catch (const YAML::Exception& e) {
        throw ParseError(e.mark.line + 1, e.msg);
    }
    validate_experiments(sc);
    return sc;
}

Scenario parse_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scenario file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario_text(ss.str());
}

Scenario load_scenario(const std::string& name_or_path) {
    if (auto text = builtin_scenario_text(name_or_path)) return parse_scenario_text(*text);
    return parse_scenario(name_or_path);
}

} // namespace tcs
