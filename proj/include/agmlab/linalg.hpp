#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>

namespace agmlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline double sq(double v) { return v * v; }

inline bool all_finite(const Vec& v) { return v.allFinite(); }

/// Scale used by relative tolerances: max(1, |a|).
inline double unit_floor(double a) { return std::max(1.0, std::abs(a)); }

}  // namespace agmlab
