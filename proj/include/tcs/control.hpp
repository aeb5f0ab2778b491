#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tcs/system.hpp"

namespace tcs {

struct ControlBox {
    Vec lo;
    Vec hi;
};

/// Ordinary control system x' = F(x, u), u in a finite set or a box.
class ControlSystem {
public:
    using FieldMap = std::function<Vec(int chart, const Vec& coords, const Vec& u)>;

    struct Affine {
        VectorField drift;
        std::vector<VectorField> controls;
    };

    ControlSystem(AtlasPtr atlas, std::vector<Vec> controls, FieldMap field, std::string label = {});
    ControlSystem(AtlasPtr atlas, ControlBox box, FieldMap field, std::string label = {});

    /// F(x, u) = f0(x) + sum_a u^a f_a(x) over a finite control list.
    static ControlSystem affine(VectorField drift, std::vector<VectorField> controls, std::vector<Vec> control_points,
                                std::string label = {});
    static ControlSystem affine(VectorField drift, std::vector<VectorField> controls, ControlBox box,
                                std::string label = {});

    const Atlas& atlas() const { return *atlas_; }
    const AtlasPtr& atlas_ptr() const { return atlas_; }
    const std::string& label() const { return label_; }
    bool finite() const { return !box_.has_value(); }
    const std::vector<Vec>& control_points() const { return points_; }
    const std::optional<ControlBox>& box() const { return box_; }
    int control_dim() const;
    const std::optional<Affine>& affine_decomposition() const { return affine_; }

    bool contains(const Vec& u) const;
    Vec operator()(const Point& p, const Vec& u) const;
    /// The frozen field F^u; throws ControlOutOfSet.
    VectorField slice(const Vec& u) const;

private:
    friend ControlSystem control_system_from_tcs(const GeneratedSystem& sys);

    AtlasPtr atlas_;
    std::vector<Vec> points_;
    std::optional<ControlBox> box_;
    FieldMap field_;
    std::optional<Affine> affine_;
    // set when the controls index a generator list; slices return those fields
    std::vector<VectorField> generator_slices_;
    std::string label_;
};

/// Per-segment frozen fields of a piecewise-constant control signal. Every
/// segment selector must be a ControlValue.
std::vector<std::pair<VectorField, double>> slice(const ControlSystem& cs, const Schedule& mu);

Trajectory integrate(const ControlSystem& cs, const Point& start, const Schedule& mu, double h);

/// Generators F^u for each control in `controls` (all finite controls when empty).
GeneratedSystem tcs_from_control_system(const ControlSystem& cs, const std::vector<Vec>& controls = {});

/// Control set = generator indices (as 1-vectors); slices are the generators themselves.
ControlSystem control_system_from_tcs(const GeneratedSystem& sys);

/// Same length and each pair either shares its definition or agrees bitwise at sampled points.
bool same_generators(const std::vector<VectorField>& a, const std::vector<VectorField>& b, Rng& rng, int samples = 100);

/// max |F(x,u) - f0(x) - sum u f(x)| over sampled points and controls; 0 without a decomposition.
double affine_decomposition_residual(const ControlSystem& cs, Rng& rng, int samples);

} // namespace tcs
