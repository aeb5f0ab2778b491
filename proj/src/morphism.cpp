#include "tcs/morphism.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tcs {

std::string to_string(MorphismKind kind) {
    switch (kind) {
    case MorphismKind::MetricRightInverse: return "metric-right-inverse";
    case MorphismKind::HorizontalConnection: return "horizontal-connection";
    case MorphismKind::UserSupplied: return "user-supplied";
    }
    return "unknown";
}

std::string to_string(KernelMode mode) { return mode == KernelMode::Global ? "global" : "chartwise"; }

Morphism::Morphism(SmoothMap phi, LiftRule rule, MorphismKind kind, bool proper)
    : phi_(std::move(phi)), rule_(std::move(rule)), kind_(kind), proper_(proper) {}

VectorField Morphism::lift(const VectorField& y) const {
    if (y.atlas().dim() != phi_.target().dim()) throw DimensionMismatch("lifting a field of another manifold");
    VectorField out = rule_(y);
    if (!y.domain()) return out;
    SmoothMap phi = phi_;
    return out.restricted([phi, y](const Point& p) { return y.defined_at(phi(p)); });
}

namespace {

Mat full_jacobian(const SmoothMap& phi, const Point& raw, Located& img) {
    img = phi.image(raw);
    Mat j = phi.raw_jacobian(raw);
    return img.identity ? j : Mat(img.jacobian * j);
}

Mat right_inverse_of(const Mat& j, const Mat& g, const Point& raw) {
    const Mat ginv_jt = g.ldlt().solve(j.transpose());
    const Mat gram = j * ginv_jt;
    Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
    const double lo = eig.eigenvalues().size() ? eig.eigenvalues().minCoeff() : 1.0;
    const double hi = eig.eigenvalues().size() ? eig.eigenvalues().maxCoeff() : 1.0;
    if (!(lo > 1e-14 * std::max(1.0, hi))) throw SingularGram(raw.coords);
    return ginv_jt * gram.ldlt().solve(Mat::Identity(gram.rows(), gram.cols()));
}

Vec in_raw_frame(const Located& img, const Vec& canonical) {
    return img.identity ? canonical : Vec(img.jacobian.partialPivLu().solve(canonical));
}

std::vector<Point> sample_points(const Atlas& atlas, Rng& rng, int n) {
    std::vector<Point> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(atlas.sample(rng));
    return out;
}

void check_submersion(const SmoothMap& phi, int samples, std::uint64_t seed) {
    if (phi.target().dim() > phi.source().dim()) throw NotSubmersion(Vec());
    Rng rng(seed);
    for (int s = 0; s < samples; ++s) {
        Point p = phi.source().sample(rng);
        if (differential_rank(phi, p) < phi.target().dim()) throw NotSubmersion(p.coords);
    }
}

double independence_of(const GeneratedSystem& target) {
    Rng rng(3);
    return min_pointwise_singular_value(target.generators(), rng, 100);
}

} // namespace

Mat metric_right_inverse(const SmoothMap& phi, const Point& raw) {
    Located img;
    Mat j = full_jacobian(phi, raw, img);
    return right_inverse_of(j, phi.source().metric(raw.chart, raw.coords), raw);
}

Mat kernel_projector(const SmoothMap& phi, const Point& raw) {
    Located img;
    Mat j = full_jacobian(phi, raw, img);
    Mat r = right_inverse_of(j, phi.source().metric(raw.chart, raw.coords), raw);
    const int n = phi.source().dim();
    return Mat::Identity(n, n) - r * j;
}

LiftResult lift_system(const GeneratedSystem& target, const SmoothMap& phi, bool proper, int check_samples,
                       std::uint64_t seed) {
    if (&target.atlas() != &phi.target() && target.atlas().dim() != phi.target().dim())
        throw DimensionMismatch("target system does not live on the map's target");
    check_submersion(phi, check_samples, seed);
    Morphism::LiftRule rule = [phi](const VectorField& y) {
        return VectorField(
            phi.source_ptr(),
            [phi, y](int chart, const Vec& x) {
                const Point raw{chart, x};
                Located img;
                Mat j = full_jacobian(phi, raw, img);
                Mat r = right_inverse_of(j, phi.source().metric(chart, x), raw);
                return Vec(r * y(img.point));
            },
            "lift(" + y.label() + ")");
    };
    Morphism m(phi, rule, MorphismKind::MetricRightInverse, proper);
    std::vector<VectorField> lifted;
    for (const auto& y : target.generators()) lifted.push_back(m.lift(y));
    const double sv = independence_of(target);
    return LiftResult{m, GeneratedSystem(phi.source_ptr(), std::move(lifted), "lift[" + target.label() + "]"), sv,
                      sv >= 1e-6};
}

LiftResult horizontal_lift(const GeneratedSystem& target, const SmoothMap& bundle, ConnectionFn connection, bool proper,
                           int check_samples, std::uint64_t seed) {
    const int n = bundle.target().dim();
    const int k = bundle.source().dim() - n;
    if (k < 0) throw NotAdapted("bundle of negative fiber dimension");
    Rng rng(seed);
    for (int s = 0; s < check_samples; ++s) {
        Point p = bundle.source().sample(rng);
        Point b = bundle.raw_value(p);
        if (b.chart != p.chart || max_abs(b.coords - p.coords.head(n)) > 1e-12)
            throw NotAdapted("projection does not read the base coordinates at " + format_vec(p.coords));
    }
    Morphism::LiftRule rule = [bundle, connection, n, k](const VectorField& y) {
        return VectorField(
            bundle.source_ptr(),
            [bundle, connection, y, n, k](int chart, const Vec& x) {
                Located img = bundle.image(Point{chart, x});
                const Vec base = in_raw_frame(img, y(img.point));
                Vec out(n + k);
                out.head(n) = base;
                if (k > 0) out.tail(k) = connection ? Vec(-connection(chart, x.head(n), base, x.tail(k))) : Vec(Vec::Zero(k));
                return out;
            },
            "hlift(" + y.label() + ")");
    };
    Morphism m(bundle, rule, MorphismKind::HorizontalConnection, proper);
    std::vector<VectorField> lifted;
    for (const auto& y : target.generators()) lifted.push_back(m.lift(y));
    const double sv = independence_of(target);
    return LiftResult{m, GeneratedSystem(bundle.source_ptr(), std::move(lifted), "hlift[" + target.label() + "]"), sv,
                      sv >= 1e-6};
}

nlohmann::json VerificationReport::to_json() const {
    nlohmann::json j{{"check", check},
                     {"pass", pass},
                     {"worst_residual", worst_residual},
                     {"worst_point", nullptr},
                     {"tolerance", tolerance},
                     {"samples", samples}};
    if (worst_point) j["worst_point"] = {{"chart", worst_point->chart}, {"coords", to_std(worst_point->coords)}};
    if (!details.empty()) j["details"] = details;
    return j;
}

VerificationReport verify_trajectory_preserving(const Morphism& m, const GeneratedSystem& target,
                                                const TrajectoryCheckOptions& opts) {
    const SmoothMap& phi = m.phi();
    VerificationReport rep;
    rep.check = "trajectory_preserving";
    rep.samples = opts.samples;
    rep.tolerance = opts.tolerance > 0.0 ? opts.tolerance : (phi.analytic() ? 1e-9 : 1e-6);

    std::vector<VectorField> lifted;
    for (const auto& y : target.generators()) lifted.push_back(m.lift(y));

    Rng rng(opts.seed);
    const std::vector<Point> pts = sample_points(phi.source(), rng, opts.samples);
    for (std::size_t i = 0; i < lifted.size(); ++i) {
        const VectorField& y = target.generators()[i];
        for (const auto& p : pts) {
            if (!lifted[i].defined_at(p)) continue;
            Located img;
            Mat j = full_jacobian(phi, p, img);
            if (!y.defined_at(img.point)) continue;
            const double r = (j * lifted[i](p) - y(img.point)).norm();
            if (r > rep.worst_residual || !rep.worst_point) {
                rep.worst_residual = std::max(rep.worst_residual, r);
                rep.worst_point = p;
            }
        }
    }
    const bool pointwise = rep.worst_residual <= rep.tolerance;

    // trajectory level: Phi(upstairs) against downstairs for random schedules
    const GeneratedSystem up(phi.source_ptr(), lifted, "lifted");
    const double h = opts.step;
    const double rate = 10.0 * std::pow(h, 4);
    double worst_ratio = 0.0;
    double worst_error = 0.0;
    int compared = 0;
    if (!target.generators().empty()) {
        for (int s = 0; s < opts.schedules; ++s) {
            Schedule sched;
            for (int k = 0; k < opts.segments; ++k)
                sched.generator(rng.index(target.generators().size()), rng.uniform(0.0, opts.max_segment));
            const Point x = phi.source().sample(rng);
            PartialTrajectory a = integrate_until_escape(up, x, sched, h);
            PartialTrajectory b = integrate_until_escape(target, phi(x), sched, h);
            const std::size_t n = std::min(a.trajectory.points.size(), b.trajectory.points.size());
            for (std::size_t i = 0; i < n; ++i) {
                const double t = a.trajectory.times[i];
                const double err = phi.target().distance(phi(a.trajectory.points[i]), b.trajectory.points[i]);
                worst_error = std::max(worst_error, err);
                worst_ratio = std::max(worst_ratio, err / (rate * t + 1e-12));
            }
            ++compared;
        }
    }
    const bool trajectories = worst_ratio <= 1.0;
    rep.pass = pointwise && trajectories;
    rep.details = {{"pointwise_pass", pointwise},
                   {"trajectory_pass", trajectories},
                   {"trajectory_worst_error", worst_error},
                   {"trajectory_tolerance_per_unit_time", rate},
                   {"schedules", compared},
                   {"step", h}};
    return rep;
}

std::shared_ptr<const KernelSections> KernelFrame::sections() const {
    return std::make_shared<KernelSections>(KernelSections{generators, global, "ker[" + to_string(mode) + "]"});
}

KernelFrame kernel_frame(const Morphism& m, KernelMode mode, std::vector<VectorField> user, int samples,
                         std::uint64_t seed) {
    const SmoothMap& phi = m.phi();
    check_submersion(phi, std::min(samples, 50), seed);
    KernelFrame frame;
    frame.mode = mode;
    frame.rank = phi.source().dim() - phi.target().dim();
    Rng rng(seed);
    if (mode == KernelMode::Chartwise) {
        if (frame.rank > 0) {
            for (int j = 0; j < phi.source().dim(); ++j) {
                frame.generators.emplace_back(
                    phi.source_ptr(),
                    [phi, j](int chart, const Vec& x) { return Vec(kernel_projector(phi, Point{chart, x}).col(j)); },
                    "P e" + std::to_string(j));
            }
        }
    } else {
        for (const auto& g : user)
            if (g.atlas().dim() != phi.source().dim()) throw DimensionMismatch("kernel generator '" + g.label() + "'");
        for (int s = 0; s < samples; ++s) {
            const Point p = phi.source().sample(rng);
            if (frame.rank == 0 && user.empty()) break;
            const Mat j = phi.jacobian(p);
            Eigen::MatrixXd cols(phi.source().dim(), static_cast<Eigen::Index>(user.size()));
            for (std::size_t i = 0; i < user.size(); ++i) {
                const Vec v = user[i](p);
                if ((j * v).norm() > 1e-8) throw NotInKernel(static_cast<int>(i), p.coords);
                cols.col(static_cast<Eigen::Index>(i)) = v;
            }
            const Eigen::VectorXd sv = singular_values(cols);
            const auto retained = (sv.array() >= 1e-6).count();
            if (retained < frame.rank) throw RankDeficient(p.coords);
        }
        frame.generators = std::move(user);
    }
    frame.global = true;
    for (const auto& g : frame.generators)
        if (overlap_compatibility_residual(g, rng, samples) > 1e-8) frame.global = false;
    return frame;
}

GeneratedSystem augment_with_kernel(const GeneratedSystem& sys, const KernelFrame& frame) {
    if (frame.generators.empty()) return sys;
    if (frame.mode == KernelMode::Global) {
        std::vector<VectorField> gens = sys.generators();
        gens.insert(gens.end(), frame.generators.begin(), frame.generators.end());
        return sys.with_generators(std::move(gens), sys.label() + "+ker").with_kernel(frame.sections());
    }
    return sys.with_kernel(frame.sections());
}

nlohmann::json GlobalInTimeReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    double worst = 0.0;
    for (const auto& e : entries) {
        worst = std::max(worst, std::abs(e.upstairs - e.downstairs));
        rows.push_back({{"generator", e.generator},
                        {"start", to_std(e.start.coords)},
                        {"upstairs_time", e.upstairs},
                        {"downstairs_time", e.downstairs}});
    }
    return {{"check", "global_in_time"}, {"pass", pass},  {"worst_residual", worst}, {"tolerance", tolerance},
            {"horizon", horizon},        {"step", step},  {"samples", entries.size()}, {"entries", rows}};
}

GlobalInTimeReport verify_global_in_time(const Morphism& m, const GeneratedSystem& target,
                                         const std::vector<Point>& starts, double horizon, double h) {
    const SmoothMap& phi = m.phi();
    GlobalInTimeReport rep;
    rep.horizon = horizon;
    rep.step = h;
    rep.tolerance = 2.0 * h;
    Schedule sched;
    sched.generator(0, horizon);
    for (std::size_t i = 0; i < target.generators().size(); ++i) {
        const VectorField& y = target.generators()[i];
        const GeneratedSystem down(target.atlas_ptr(), {y});
        const GeneratedSystem up(phi.source_ptr(), {m.lift(y)});
        for (const auto& x : starts) {
            const Point p = phi.source().normalize(x);
            PartialTrajectory a = integrate_until_escape(up, p, sched, h);
            PartialTrajectory b = integrate_until_escape(down, phi(p), sched, h);
            GlobalInTimeEntry e{i, p, a.escape_time.value_or(horizon), b.escape_time.value_or(horizon)};
            if (std::abs(e.upstairs - e.downstairs) > rep.tolerance) rep.pass = false;
            rep.entries.push_back(e);
        }
    }
    return rep;
}

Liftability check_liftable(const ControlSystem& sigma1, const ControlSystem& sigma2, const SmoothMap& phi, int samples,
                           std::uint64_t seed) {
    if (!sigma1.finite() || !sigma2.finite()) throw ControlOutOfSet("liftability needs finite control sets");
    Rng rng(seed);
    const auto& c1 = sigma1.control_points();
    const auto& c2 = sigma2.control_points();
    std::vector<VectorField> f1, f2;
    for (const auto& u : c1) f1.push_back(sigma1.slice(u));
    for (const auto& u : c2) f2.push_back(sigma2.slice(u));

    // independence of the target slices as functions on N
    const int n = phi.target().dim();
    const std::vector<Point> down = sample_points(phi.target(), rng, samples);
    Eigen::MatrixXd stacked(static_cast<Eigen::Index>(down.size()) * n, static_cast<Eigen::Index>(f2.size()));
    for (std::size_t s = 0; s < down.size(); ++s)
        for (std::size_t i = 0; i < f2.size(); ++i)
            stacked.block(static_cast<Eigen::Index>(s) * n, static_cast<Eigen::Index>(i), n, 1) = f2[i](down[s]);
    const Eigen::VectorXd sv = singular_values(stacked);
    if (sv.size() < static_cast<Eigen::Index>(f2.size()) || !(sv(sv.size() - 1) > 1e-6 * std::max(1.0, sv(0))))
        throw IndependenceViolated("slices of " + sigma2.label() + " are linearly dependent");

    const std::vector<Point> up = sample_points(phi.source(), rng, samples);
    std::vector<Mat> jac;
    std::vector<Point> img;
    for (const auto& p : up) {
        Located l;
        jac.push_back(full_jacobian(phi, p, l));
        img.push_back(l.point);
    }
    Liftability out;
    out.liftable = true;
    for (std::size_t i = 0; i < f2.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::optional<std::size_t> match;
        for (std::size_t j = 0; j < f1.size() && !match; ++j) {
            double worst = 0.0;
            for (std::size_t s = 0; s < up.size(); ++s) {
                worst = std::max(worst, max_abs(jac[s] * f1[j](up[s]) - f2[i](img[s])));
                if (worst > 1e-6 && worst >= best) break;
            }
            best = std::min(best, worst);
            if (worst <= 1e-6) match = j;
        }
        out.residuals.push_back(best);
        if (match)
            out.lifting.emplace_back(c2[i], c1[*match]);
        else
            out.liftable = false;
    }
    return out;
}

Morphism morphism_from_lifting(const std::vector<std::pair<Vec, Vec>>& lifting, const ControlSystem& sigma1,
                               const ControlSystem& sigma2, const SmoothMap& phi, int samples, std::uint64_t seed) {
    if (!sigma2.finite()) throw ControlOutOfSet("lifting map over a control box");
    struct Data {
        std::vector<VectorField> down;
        std::vector<VectorField> up;
        std::vector<Point> points;
    };
    auto data = std::make_shared<Data>();
    for (const auto& u : sigma2.control_points()) {
        auto it = std::find_if(lifting.begin(), lifting.end(),
                               [&](const auto& kv) { return kv.first.size() == u.size() && max_abs(kv.first - u) <= 1e-12; });
        if (it == lifting.end()) throw UnmappedControl(format_vec(u));
        data->down.push_back(sigma2.slice(u));
        data->up.push_back(sigma1.slice(it->second));
    }
    Rng rng(seed);
    data->points = sample_points(phi.target(), rng, samples);
    Morphism::LiftRule rule = [data](const VectorField& y) -> VectorField {
        for (std::size_t i = 0; i < data->down.size(); ++i)
            if (data->down[i].same_as(y)) return data->up[i];
        const int n = y.atlas().dim();
        std::vector<Point> used;
        for (const auto& p : data->points)
            if (y.defined_at(p)) used.push_back(p);
        Eigen::MatrixXd a(static_cast<Eigen::Index>(used.size()) * n, static_cast<Eigen::Index>(data->down.size()));
        Eigen::VectorXd b(a.rows());
        for (std::size_t s = 0; s < used.size(); ++s) {
            const auto row = static_cast<Eigen::Index>(s) * n;
            b.segment(row, n) = y(used[s]);
            for (std::size_t i = 0; i < data->down.size(); ++i)
                a.block(row, static_cast<Eigen::Index>(i), n, 1) = data->down[i](used[s]);
        }
        const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
        const double scale = std::max(1.0, b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
        if (b.size() == 0 || (a * c - b).cwiseAbs().maxCoeff() > 1e-9 * scale)
            throw UnmappedControl("field '" + y.label() + "' outside the span of the mapped slices");
        Vec coeffs(static_cast<Eigen::Index>(data->up.size()));
        for (Eigen::Index i = 0; i < coeffs.size(); ++i) coeffs(i) = c(i);
        return combine(data->up, coeffs, "l(" + y.label() + ")");
    };
    return Morphism(phi, rule, MorphismKind::UserSupplied);
}

double lift_linearity_residual(const Morphism& m, const VectorField& y, const VectorField& z, double a, double b,
                               Rng& rng, int samples) {
    const VectorField both = m.lift(y.scaled(a) + z.scaled(b));
    const VectorField ly = m.lift(y);
    const VectorField lz = m.lift(z);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Point p = m.phi().source().sample(rng);
        worst = std::max(worst, max_abs(both(p) - a * ly(p) - b * lz(p)));
    }
    return worst;
}

double restriction_compatibility_residual(const Morphism& m, const VectorField& y, const Region& box, Rng& rng,
                                          int samples) {
    const VectorField restricted_first = m.lift(y.restricted(box));
    const VectorField lifted = m.lift(y);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Point p = m.phi().source().sample(rng);
        const bool in_box = box.contains(m.phi().target(), m.phi()(p));
        if (restricted_first.defined_at(p) != in_box) return std::numeric_limits<double>::infinity();
        if (in_box) worst = std::max(worst, max_abs(restricted_first(p) - lifted(p)));
    }
    return worst;
}

std::pair<double, double> projector_residuals(const SmoothMap& phi, Rng& rng, int samples) {
    double idem = 0.0;
    double kern = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Point p = phi.source().sample(rng);
        const Mat proj = kernel_projector(phi, p);
        idem = std::max(idem, (proj * proj - proj).cwiseAbs().maxCoeff());
        kern = std::max(kern, (phi.jacobian(p) * proj).cwiseAbs().maxCoeff());
    }
    return {idem, kern};
}

double affine_lifting_residual(const Morphism& m, const ControlSystem& sigma1, const ControlSystem& sigma2, Rng& rng,
                               int samples) {
    const auto& a1 = sigma1.affine_decomposition();
    const auto& a2 = sigma2.affine_decomposition();
    if (!a1 || !a2) throw DimensionMismatch("affine lifting residual needs affine systems");
    if (a1->controls.size() != a2->controls.size()) return std::numeric_limits<double>::infinity();
    std::vector<std::pair<VectorField, VectorField>> pairs{{m.lift(a2->drift), a1->drift}};
    for (std::size_t i = 0; i < a2->controls.size(); ++i) pairs.emplace_back(m.lift(a2->controls[i]), a1->controls[i]);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Point p = m.phi().source().sample(rng);
        for (const auto& [lifted, expect] : pairs) worst = std::max(worst, max_abs(lifted(p) - expect(p)));
    }
    return worst;
}

} // namespace tcs
