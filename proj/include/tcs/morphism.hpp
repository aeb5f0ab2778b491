#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tcs/control.hpp"
#include "tcs/smooth_map.hpp"
#include "tcs/system.hpp"

namespace tcs {

enum class MorphismKind { MetricRightInverse, HorizontalConnection, UserSupplied };

std::string to_string(MorphismKind kind);

/// A map Phi: M -> N with a rule carrying fields on N to fields on M.
class Morphism {
public:
    using LiftRule = std::function<VectorField(const VectorField&)>;

    Morphism(SmoothMap phi, LiftRule rule, MorphismKind kind, bool proper = false);

    const SmoothMap& phi() const { return phi_; }
    MorphismKind kind() const { return kind_; }
    /// Declared properness; nothing checks it beyond verify_global_in_time.
    bool proper() const { return proper_; }
    Morphism& set_proper(bool p) {
        proper_ = p;
        return *this;
    }

    VectorField lift(const VectorField& y) const;

private:
    SmoothMap phi_;
    LiftRule rule_;
    MorphismKind kind_;
    bool proper_;
};

/// G^-1 J^T (J G^-1 J^T)^-1 at a raw source point. Throws SingularGram.
Mat metric_right_inverse(const SmoothMap& phi, const Point& raw);
/// Metric projection I - R J onto ker dPhi.
Mat kernel_projector(const SmoothMap& phi, const Point& raw);

struct LiftResult {
    Morphism morphism;
    GeneratedSystem system;
    /// Smallest pointwise singular value of the target generators; the
    /// construction assumes they are independent but does not require it.
    double min_singular_value = 0.0;
    bool generators_independent = false;
};

/// Metric-orthogonal lift of every target generator through a submersion.
/// Throws NotSubmersion at the first sampled point of deficient rank.
LiftResult lift_system(const GeneratedSystem& target, const SmoothMap& phi, bool proper = false, int check_samples = 200,
                       std::uint64_t seed = 7);

/// Connection term A(x)(y, v) of a linear connection in adapted charts.
using ConnectionFn = std::function<Vec(int chart, const Vec& base, const Vec& y, const Vec& fiber)>;

/// Horizontal lift on a vector bundle whose charts are (base, fiber) with phi
/// the projection onto the base coordinates. An empty connection is flat.
LiftResult horizontal_lift(const GeneratedSystem& target, const SmoothMap& bundle, ConnectionFn connection = {},
                           bool proper = false, int check_samples = 200, std::uint64_t seed = 7);

struct VerificationReport {
    std::string check;
    bool pass = false;
    double worst_residual = 0.0;
    std::optional<Point> worst_point;
    double tolerance = 0.0;
    int samples = 0;
    nlohmann::json details = nlohmann::json::object();

    nlohmann::json to_json() const;
};

struct TrajectoryCheckOptions {
    int samples = 1000;
    int schedules = 10;
    int segments = 3;
    double max_segment = 0.5;
    double step = 1e-2;
    std::uint64_t seed = 11;
    /// Pointwise tolerance; zero picks 1e-9 for analytic maps and 1e-6 otherwise.
    double tolerance = 0.0;
};

/// Pushforward residual |dPhi(lift Y)(x) - Y(Phi x)| at sampled points plus
/// agreement of Phi(upstairs trajectory) with the downstairs one for random
/// generator schedules, within 10 h^4 per unit time.
VerificationReport verify_trajectory_preserving(const Morphism& m, const GeneratedSystem& target,
                                                const TrajectoryCheckOptions& opts = {});

enum class KernelMode { Global, Chartwise };

std::string to_string(KernelMode mode);

struct KernelFrame {
    KernelMode mode = KernelMode::Chartwise;
    std::vector<VectorField> generators;
    int rank = 0;
    /// Every generator glues across the atlas (overlap residual <= 1e-8).
    bool global = false;

    std::shared_ptr<const KernelSections> sections() const;
};

/// Chartwise mode: P e_j for each coordinate direction. Global mode: checks
/// the user generators lie in and span ker dPhi at sampled points.
KernelFrame kernel_frame(const Morphism& m, KernelMode mode, std::vector<VectorField> user = {}, int samples = 200,
                         std::uint64_t seed = 13);

/// Global frames join the generator list and the kernel selectors; chartwise
/// frames only become kernel selectors.
GeneratedSystem augment_with_kernel(const GeneratedSystem& sys, const KernelFrame& frame);

struct GlobalInTimeEntry {
    std::size_t generator = 0;
    Point start;
    double upstairs = 0.0;
    double downstairs = 0.0;
};

struct GlobalInTimeReport {
    bool pass = true;
    double horizon = 0.0;
    double step = 0.0;
    double tolerance = 0.0;
    std::vector<GlobalInTimeEntry> entries;

    nlohmann::json to_json() const;
};

/// Escape time of Y from Phi(x) against that of lift(Y) from x, for each
/// generator and start; pass when every pair agrees within 2h.
GlobalInTimeReport verify_global_in_time(const Morphism& m, const GeneratedSystem& target,
                                         const std::vector<Point>& starts, double horizon, double h);

struct Liftability {
    bool liftable = false;
    /// (u, l(u)) for every matched control of the target.
    std::vector<std::pair<Vec, Vec>> lifting;
    /// Best residual per target control, in control order.
    std::vector<double> residuals;
};

/// Searches, for each control u of sigma2, the first control of sigma1 whose
/// slice is Phi-related to sigma2's slice at u. Throws IndependenceViolated
/// when sigma2's slices are linearly dependent as functions.
Liftability check_liftable(const ControlSystem& sigma1, const ControlSystem& sigma2, const SmoothMap& phi,
                           int samples = 200, std::uint64_t seed = 17);

/// Rule sending each slice of sigma2 (and their linear combinations) to the
/// image slice of sigma1. Throws UnmappedControl.
Morphism morphism_from_lifting(const std::vector<std::pair<Vec, Vec>>& lifting, const ControlSystem& sigma1,
                               const ControlSystem& sigma2, const SmoothMap& phi, int samples = 60,
                               std::uint64_t seed = 19);

/// max |lift(aY + bZ) - a lift(Y) - b lift(Z)| at sampled source points.
double lift_linearity_residual(const Morphism& m, const VectorField& y, const VectorField& z, double a, double b,
                               Rng& rng, int samples);

/// Lifting Y restricted to `box` against restricting lift(Y) to Phi^-1(box):
/// both must be defined at the same sampled points and agree there.
double restriction_compatibility_residual(const Morphism& m, const VectorField& y, const Region& box, Rng& rng,
                                          int samples);

/// max |P^2 - P| and max |J P| over sampled points.
std::pair<double, double> projector_residuals(const SmoothMap& phi, Rng& rng, int samples);

/// For affine sigma1, sigma2: max residual between lift(drift2) and drift1 and
/// between lift(f2_a) and f1_a.
double affine_lifting_residual(const Morphism& m, const ControlSystem& sigma1, const ControlSystem& sigma2, Rng& rng,
                               int samples);

} // namespace tcs
