#pragma once

#include <cmath>
#include <memory>

#include "tcs/atlas.hpp"
#include "tcs/smooth_map.hpp"
#include "tcs/vector_field.hpp"

namespace fx {

using namespace tcs;

inline constexpr double kTwoPi = 6.283185307179586;

inline AtlasPtr circle() { return std::make_shared<Atlas>(Atlas::circle("S1")); }
inline AtlasPtr mobius() { return std::make_shared<Atlas>(Atlas::mobius("M")); }
inline AtlasPtr interval(double lo = -1.0, double hi = 1.0) {
    return std::make_shared<Atlas>(Atlas::box("I", make_vec({lo}), make_vec({hi})));
}
inline AtlasPtr square(double lo = -1.0, double hi = 1.0) {
    return std::make_shared<Atlas>(Atlas::box("Q", make_vec({lo, lo}), make_vec({hi, hi})));
}

inline SmoothMap mobius_quotient(AtlasPtr m, AtlasPtr s1) {
    return SmoothMap(
        m, s1, [](const Point& p) { return Point{0, make_vec({kTwoPi * p.coords(0)})}; },
        [](const Point&) {
            Mat j(1, 2);
            j << kTwoPi, 0.0;
            return j;
        },
        "quotient");
}

inline VectorField constant(AtlasPtr a, std::initializer_list<double> v) { return VectorField::constant(a, make_vec(v)); }

} // namespace fx
