#include "tcs/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tcs {

Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
    if (m.rows() == 0 || m.cols() == 0) return Eigen::VectorXd();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues();
}

int numerical_rank(const Eigen::MatrixXd& m, double rel_tol, double abs_tol) {
    Eigen::VectorXd s = singular_values(m);
    if (s.size() == 0 || s(0) == 0.0) return 0;
    const double cut = std::max(rel_tol * s(0), abs_tol);
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cut) ++rank;
    return rank;
}

std::string format_vec(const Vec& v) {
    std::ostringstream out;
    out.precision(10);
    out << '(';
    for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v(i);
    out << ')';
    return out.str();
}

Mat finite_difference_jacobian(const CoordMap& f, const Vec& x) {
    const Vec f0 = f(x);
    Mat jac(f0.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double step = 1e-6 * std::max(1.0, std::abs(x(i)));
        Vec xp = x, xm = x;
        xp(i) += step;
        xm(i) -= step;
        jac.col(i) = (f(xp) - f(xm)) / (2.0 * step);
    }
    return jac;
}

Atlas::Atlas(std::string name, int dim, std::vector<Chart> charts)
    : name_(std::move(name)), dim_(dim), charts_(std::move(charts)) {
    if (dim_ < 0 || dim_ > kMaxDim) throw DimensionMismatch("atlas dimension " + std::to_string(dim_));
    if (charts_.empty()) throw DimensionMismatch("atlas '" + name_ + "' has no charts");
    for (auto& c : charts_) {
        if (c.lo.size() != dim_ || c.hi.size() != dim_)
            throw DimensionMismatch("chart box of atlas '" + name_ + "'");
        if (c.axes.empty()) c.axes.resize(static_cast<std::size_t>(dim_));
        if (static_cast<int>(c.axes.size()) != dim_) throw DimensionMismatch("chart gluing of atlas '" + name_ + "'");
        for (int a = 0; a < dim_; ++a) {
            if (!(c.lo(a) < c.hi(a)) || !std::isfinite(c.lo(a)) || !std::isfinite(c.hi(a)))
                throw DimensionMismatch("chart axis " + std::to_string(a) + " of atlas '" + name_ + "' is not a bounded interval");
            for (int f : c.axes[static_cast<std::size_t>(a)].flips)
                if (f < 0 || f >= dim_ || f == a) throw DimensionMismatch("flip axis " + std::to_string(f));
        }
    }
    for (int a = 0; a < dim_; ++a) coord_names_.push_back("x" + std::to_string(a));
}

Atlas Atlas::box(std::string name, const Vec& lo, const Vec& hi) {
    return Atlas(std::move(name), static_cast<int>(lo.size()), {Chart{lo, hi, {}}});
}

Atlas Atlas::circle(std::string name, double period) {
    Chart c{make_vec({0.0}), make_vec({period}), {AxisGluing{true, {}}}};
    Atlas a(std::move(name), 1, {c});
    a.set_coord_names({"theta"});
    return a;
}

Atlas Atlas::mobius(std::string name) {
    Chart c{make_vec({0.0, 0.0}), make_vec({1.0, 1.0}), {AxisGluing{true, {1}}, AxisGluing{}}};
    Atlas a(std::move(name), 2, {c});
    a.set_coord_names({"x", "y"});
    return a;
}

Atlas Atlas::torus(std::string name, double period) {
    Chart c{make_vec({0.0, 0.0}), make_vec({period, period}), {AxisGluing{true, {}}, AxisGluing{true, {}}}};
    Atlas a(std::move(name), 2, {c});
    a.set_coord_names({"theta", "phi"});
    return a;
}

Atlas& Atlas::set_metric(MetricFn metric) {
    metric_ = std::move(metric);
    return *this;
}

Atlas& Atlas::set_transitions(std::vector<Transition> transitions, bool shared_coordinates) {
    transitions_ = std::move(transitions);
    shared_ = shared_coordinates;
    transition_index_.clear();
    for (std::size_t i = 0; i < transitions_.size(); ++i) {
        const auto& t = transitions_[i];
        if (t.from < 0 || t.from >= chart_count() || t.to < 0 || t.to >= chart_count())
            throw DimensionMismatch("transition between unknown charts");
        transition_index_[{t.from, t.to}] = i;
    }
    return *this;
}

Atlas& Atlas::set_coord_names(std::vector<std::string> names) {
    if (static_cast<int>(names.size()) != dim_) throw DimensionMismatch("coordinate names of atlas '" + name_ + "'");
    coord_names_ = std::move(names);
    return *this;
}

const Chart& Atlas::chart(int id) const {
    if (id < 0 || id >= chart_count()) throw OutOfAtlas("chart id " + std::to_string(id) + " in atlas '" + name_ + "'");
    return charts_[static_cast<std::size_t>(id)];
}

Atlas::Glued Atlas::glue_self(int chart_id, const Vec& raw) const {
    const Chart& c = chart(chart_id);
    Glued g{raw, Vec::Ones(dim_)};
    for (int a = 0; a < dim_; ++a) {
        const AxisGluing& ax = c.axes[static_cast<std::size_t>(a)];
        if (!ax.periodic) continue;
        const double period = c.hi(a) - c.lo(a);
        double k = std::floor((g.coords(a) - c.lo(a)) / period);
        double r = g.coords(a) - k * period;
        // rounding can leave r == hi
        if (r >= c.hi(a)) {
            r -= period;
            k += 1.0;
        }
        if (r < c.lo(a)) {
            r += period;
            k -= 1.0;
        }
        g.coords(a) = r;
        if (std::fmod(std::abs(k), 2.0) == 1.0) {
            for (int f : ax.flips) {
                g.coords(f) = c.lo(f) + c.hi(f) - g.coords(f);
                g.signs(f) = -g.signs(f);
            }
        }
    }
    return g;
}

bool Atlas::inside_box(int chart_id, const Vec& coords) const {
    const Chart& c = chart(chart_id);
    for (int a = 0; a < dim_; ++a) {
        if (c.axes[static_cast<std::size_t>(a)].periodic) {
            if (coords(a) < c.lo(a) || coords(a) >= c.hi(a)) return false;
        } else if (!(coords(a) > c.lo(a) && coords(a) < c.hi(a))) {
            return false;
        }
    }
    return true;
}

double Atlas::margin(int chart_id, const Vec& coords) const {
    const Chart& c = chart(chart_id);
    double m = std::numeric_limits<double>::infinity();
    for (int a = 0; a < dim_; ++a) {
        if (c.axes[static_cast<std::size_t>(a)].periodic) continue;
        m = std::min({m, coords(a) - c.lo(a), c.hi(a) - coords(a)});
    }
    return m;
}

const Transition* Atlas::find_transition(int from, int to) const {
    auto it = transition_index_.find({from, to});
    return it == transition_index_.end() ? nullptr : &transitions_[it->second];
}

std::optional<std::pair<Vec, Mat>> Atlas::apply_transition(int from, int to, const Vec& coords) const {
    if (from == to) return std::make_pair(coords, Mat(Mat::Identity(dim_, dim_)));
    if (const Transition* t = find_transition(from, to)) {
        Vec y = t->map(coords);
        Mat j = t->jacobian ? t->jacobian(coords) : finite_difference_jacobian(t->map, coords);
        return std::make_pair(y, j);
    }
    if (shared_) return std::make_pair(coords, Mat(Mat::Identity(dim_, dim_)));
    return std::nullopt;
}

std::optional<Located> Atlas::locate(int chart_id, const Vec& raw) const {
    if (raw.size() != dim_) throw DimensionMismatch("raw point of size " + std::to_string(raw.size()) + " in atlas '" + name_ + "'");
    if (!raw.allFinite()) return std::nullopt;
    Glued own = glue_self(chart_id, raw);
    if (!inside_box(chart_id, own.coords)) return std::nullopt;
    const bool own_identity = (own.signs.array() == 1.0).all();
    for (int j = 0; j < chart_count(); ++j) {
        if (j == chart_id) {
            Located out{Point{chart_id, own.coords}, Mat(own.signs.asDiagonal()), own_identity};
            return out;
        }
        auto moved = apply_transition(chart_id, j, own.coords);
        if (!moved) continue;
        Glued g = glue_self(j, moved->first);
        if (!inside_box(j, g.coords)) continue;
        Mat jac = g.signs.asDiagonal() * moved->second * own.signs.asDiagonal();
        const bool identity = own_identity && (g.signs.array() == 1.0).all() && find_transition(chart_id, j) == nullptr;
        return Located{Point{j, g.coords}, jac, identity};
    }
    return std::nullopt;
}

Point Atlas::normalize(int chart_id, const Vec& raw) const {
    auto loc = locate(chart_id, raw);
    if (!loc) throw OutOfAtlas(format_vec(raw) + " in chart " + std::to_string(chart_id) + " of '" + name_ + "'");
    return loc->point;
}

std::optional<Located> Atlas::express_in(const Point& p, int chart_id) const {
    if (p.chart == chart_id) return Located{p, Mat(Mat::Identity(dim_, dim_)), true};
    auto moved = apply_transition(p.chart, chart_id, p.coords);
    if (!moved) return std::nullopt;
    Glued g = glue_self(chart_id, moved->first);
    if (!inside_box(chart_id, g.coords)) return std::nullopt;
    return Located{Point{chart_id, g.coords}, Mat(g.signs.asDiagonal() * moved->second), false};
}

int Atlas::working_chart(const Point& p) const {
    if (chart_count() == 1) return p.chart;
    int best = p.chart;
    double best_margin = margin(p.chart, p.coords);
    for (int j = 0; j < chart_count(); ++j) {
        if (j == p.chart) continue;
        auto loc = express_in(p, j);
        if (!loc) continue;
        double m = margin(j, loc->point.coords);
        if (m > best_margin || (m == best_margin && j < best)) {
            best = j;
            best_margin = m;
        }
    }
    return best;
}

Mat Atlas::metric(int chart_id, const Vec& coords) const {
    if (!metric_) return Mat::Identity(dim_, dim_);
    return metric_(chart_id, coords);
}

Vec Atlas::difference(const Point& a, const Point& b) const {
    Vec bc;
    if (auto loc = express_in(b, a.chart)) {
        bc = loc->point.coords;
    } else if (auto back = express_in(a, b.chart)) {
        // compare in b's chart and pull the displacement back
        Point a2 = back->point;
        Vec d = difference(a2, b);
        return back->jacobian.partialPivLu().solve(d);
    } else {
        return Vec::Constant(dim_, std::numeric_limits<double>::infinity());
    }
    const Chart& c = chart(a.chart);
    std::vector<int> periodic;
    for (int ax = 0; ax < dim_; ++ax)
        if (c.axes[static_cast<std::size_t>(ax)].periodic) periodic.push_back(ax);
    Vec best = bc - a.coords;
    double best_norm = best.norm();
    const int combos = static_cast<int>(std::pow(3, periodic.size()));
    for (int code = 0; code < combos; ++code) {
        Vec img = bc;
        int rest = code;
        for (int ax : periodic) {
            int shift = rest % 3 - 1;
            rest /= 3;
            if (shift == 0) continue;
            img(ax) += shift * (c.hi(ax) - c.lo(ax));
            for (int f : c.axes[static_cast<std::size_t>(ax)].flips) img(f) = c.lo(f) + c.hi(f) - img(f);
        }
        Vec d = img - a.coords;
        if (d.norm() < best_norm) {
            best = d;
            best_norm = d.norm();
        }
    }
    return best;
}

Tangent Atlas::transport(const Tangent& v, int chart_id) const {
    if (v.components.size() != dim_) throw DimensionMismatch("tangent components");
    auto loc = express_in(v.base, chart_id);
    if (!loc) throw OutOfAtlas(format_vec(v.base.coords) + " is not in chart " + std::to_string(chart_id));
    return Tangent{loc->point, loc->jacobian * v.components};
}

Vec Atlas::sample_raw(int chart_id, Rng& rng, int wraps) const {
    const Chart& c = chart(chart_id);
    Vec r(dim_);
    for (int a = 0; a < dim_; ++a) {
        if (c.axes[static_cast<std::size_t>(a)].periodic) {
            const double period = c.hi(a) - c.lo(a);
            r(a) = rng.uniform(c.lo(a) - wraps * period, c.hi(a) + wraps * period);
        } else {
            r(a) = rng.open(c.lo(a), c.hi(a));
        }
    }
    return r;
}

Point Atlas::sample(Rng& rng) const {
    for (;;) {
        const int c = static_cast<int>(rng.index(charts_.size()));
        if (auto loc = locate(c, sample_raw(c, rng, 0))) return loc->point;
    }
}

double transition_jacobian_error(const Atlas& atlas, Rng& rng, int samples) {
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const int c = static_cast<int>(rng.index(static_cast<std::size_t>(atlas.chart_count())));
        Vec raw = atlas.sample_raw(c, rng);
        auto loc = atlas.locate(c, raw);
        if (!loc) continue;
        bool stable = true;
        CoordMap f = [&](const Vec& x) -> Vec {
            auto l = atlas.locate(c, x);
            if (!l || l->point.chart != loc->point.chart) {
                stable = false;
                return loc->point.coords;
            }
            // unwrap periodic jumps relative to the centre image
            return loc->point.coords + atlas.difference(loc->point, l->point);
        };
        Mat fd = finite_difference_jacobian(f, raw);
        if (!stable) continue;
        const double scale = std::max(1.0, loc->jacobian.cwiseAbs().maxCoeff());
        worst = std::max(worst, (fd - loc->jacobian).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

double metric_compatibility_residual(const Atlas& atlas, Rng& rng, int samples) {
    if (!atlas.has_metric()) return 0.0;
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const int c = static_cast<int>(rng.index(static_cast<std::size_t>(atlas.chart_count())));
        Vec raw = atlas.sample_raw(c, rng);
        auto loc = atlas.locate(c, raw);
        if (!loc) continue;
        Mat pulled = loc->jacobian.transpose() * atlas.metric(loc->point.chart, loc->point.coords) * loc->jacobian;
        worst = std::max(worst, (pulled - atlas.metric(c, raw)).cwiseAbs().maxCoeff());
    }
    return worst;
}

double metric_min_eigenvalue(const Atlas& atlas, Rng& rng, int samples) {
    double lowest = std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
        Point p = atlas.sample(rng);
        Eigen::MatrixXd g = atlas.metric(p.chart, p.coords);
        if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12) return -std::numeric_limits<double>::infinity();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
        lowest = std::min(lowest, es.eigenvalues().minCoeff());
    }
    return lowest;
}

} // namespace tcs
