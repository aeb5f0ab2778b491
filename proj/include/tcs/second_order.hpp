#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tcs/morphism.hpp"

namespace tcs {

/// TM with induced charts (x, y). Velocity axes are the open interval
/// (-bound, bound); a flipped base axis also flips its velocity axis.
struct TangentAtlas {
    AtlasPtr base;
    AtlasPtr atlas;
    SmoothMap projection;

    int base_dim() const { return base->dim(); }
};

TangentAtlas tangent_atlas(AtlasPtr base, double velocity_bound = 10.0);

/// Largest deviation of the induced gluing Jacobians from [[J, 0], [dJ y, J]]
/// with J the base Jacobian: checks the zero block and both diagonal blocks.
double tangent_block_residual(const TangentAtlas& ta, Rng& rng, int samples);

/// Acceleration terms of the local form x' = y, y' = gamma(x, y) + sum u^j g_j(x, y).
using LocalFn = std::function<Vec(int chart, const Vec& x, const Vec& y)>;
struct LocalData {
    LocalFn gamma;
    std::vector<LocalFn> g;
};

class SecondOrderSystem {
public:
    SecondOrderSystem(TangentAtlas ta, VectorField drift, std::vector<VectorField> controls, std::string label = {});
    static SecondOrderSystem from_local(TangentAtlas ta, LocalData local, std::string label = {});

    const TangentAtlas& tangent() const { return ta_; }
    const VectorField& drift() const { return drift_; }
    const std::vector<VectorField>& controls() const { return controls_; }
    const std::optional<LocalData>& local() const { return local_; }
    const std::string& label() const { return label_; }

    /// f0 + sum u^j f_j as an affine control system over the given points.
    ControlSystem control_system(std::vector<Vec> control_points) const;
    /// Slices f0, f0 +- a f_j.
    GeneratedSystem slices(double magnitude) const;

private:
    TangentAtlas ta_;
    VectorField drift_;
    std::vector<VectorField> controls_;
    std::optional<LocalData> local_;
    std::string label_;
};

struct PredicateResult {
    bool holds = false;
    double residual = 0.0;
};

/// |dpi(f0) - y| and |dpi(f_j)| at sampled points, both <= 1e-9.
PredicateResult is_second_order(const SecondOrderSystem& sys, int samples = 1000, std::uint64_t seed = 23);

/// Tangent map T phi: TP -> TQ of an adapted projection phi: P -> Q.
SmoothMap tangent_map(const SmoothMap& phi, const TangentAtlas& tp, const TangentAtlas& tq);

struct SecondOrderLift {
    TangentAtlas tp;
    SecondOrderSystem system;
    Morphism morphism;
};

/// Minimal lift through an adapted projection (x, z) -> x: fiber
/// accelerations are zero. Throws NotAdapted.
SecondOrderLift second_order_lift(const SecondOrderSystem& sys2, const SmoothMap& phi, double velocity_bound,
                                  int check_samples = 200, std::uint64_t seed = 29);

/// max |dT phi (lifted f) - f(T phi)| over drift and controls at sampled points.
double second_order_relatedness_residual(const SecondOrderLift& lift, const SecondOrderSystem& sys2, int samples = 1000,
                                         std::uint64_t seed = 31);

/// (0, X(x)) in induced coordinates.
VectorField vertical_lift(const VectorField& x, const TangentAtlas& ta);

/// Generators f0, f0 +- a f_i and f0 +- b X_j^vlft. Throws FrameNotKernel when
/// a frame field is not annihilated by dphi at sampled points.
GeneratedSystem augment_second_order(const SecondOrderSystem& lifted, const KernelFrame& frame, const SmoothMap& phi,
                                     double control_magnitude, double kernel_magnitude, int samples = 200,
                                     std::uint64_t seed = 37);

/// Christoffel symbols Gamma^i_jk at x, index i * n * n + j * n + k.
using ChristoffelFn = std::function<std::vector<double>(int chart, const Vec& x)>;

struct ConnectionSystem {
    AtlasPtr base;
    ChristoffelFn christoffel;
    std::vector<VectorField> controls;
};

double christoffel_symmetry_residual(const ConnectionSystem& cs, Rng& rng, int samples);

/// x' = y, y'^i = -Gamma^i_jk y^j y^k, controls the vertical lifts of g_r.
/// Throws Error when the symbols are not symmetric in the lower indices.
SecondOrderSystem geodesic_spray(const ConnectionSystem& cs, double velocity_bound = 10.0, std::string label = "spray");

/// max |a(x, l y) - l^2 a(x, y)| over sampled points and scales l.
double spray_homogeneity_residual(const SecondOrderSystem& spray, Rng& rng, int samples);

} // namespace tcs
