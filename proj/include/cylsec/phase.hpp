#pragma once

#include <array>
#include <cmath>

namespace cylsec {

/// A point z = (u, v, x, y) of R^4 with the symplectic form du^dv + dx^dy.
struct PhasePoint {
    double u = 0.0, v = 0.0, x = 0.0, y = 0.0;

    friend bool operator==(const PhasePoint&, const PhasePoint&) = default;
};

using Vec4 = std::array<double, 4>;

inline Vec4 to_vec(const PhasePoint& z) { return {z.u, z.v, z.x, z.y}; }
inline PhasePoint to_point(const Vec4& w) { return {w[0], w[1], w[2], w[3]}; }

inline bool all_finite(const PhasePoint& z) {
    return std::isfinite(z.u) && std::isfinite(z.v) &&
           std::isfinite(z.x) && std::isfinite(z.y);
}

}  // namespace cylsec
