#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace tcs {

/// Largest manifold dimension handled by the chart numerics. Tangent atlases
/// double the dimension, so a base of dimension 4 is the practical limit.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

inline Vec make_vec(std::initializer_list<double> values) {
    Vec v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

inline Vec to_vec(const std::vector<double>& values) {
    Vec v(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = values[i];
    return v;
}

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

/// Singular values of an arbitrary (possibly empty) matrix, descending.
Eigen::VectorXd singular_values(const Eigen::MatrixXd& m);

/// Rank with threshold max(rel_tol * sigma_max, abs_tol).
int numerical_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-8, double abs_tol = 0.0);

/// Max-abs norm, 0 for empty vectors.
inline double max_abs(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

std::string format_vec(const Vec& v);

} // namespace tcs
