#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cylsec/phase.hpp"

namespace cylsec {

/// The three scale constants derived from the single integer parameter k:
/// eps = pi/k, delta = eps/(4k), nu = delta/(4k).
struct ScaleParams {
    int k = 0;
    double eps = 0.0;
    double delta = 0.0;
    double nu = 0.0;
};

inline ScaleParams derive_scales(int k) {
    if (k < 2) throw std::invalid_argument("derive_scales: k must be >= 2");
    ScaleParams p;
    p.k = k;
    p.eps = std::numbers::pi / k;
    p.delta = p.eps / (4.0 * k);
    p.nu = p.delta / (4.0 * k);
    return p;
}

struct Interval {
    double lo = 0.0, hi = 0.0;

    double length() const { return hi - lo; }
    bool contains(double t) const { return t >= lo && t <= hi; }
    bool contains_interior(double t) const { return t > lo && t < hi; }
    Interval shifted(double s) const { return {lo + s, hi + s}; }
};

/// Closed axis-aligned rectangle in the (u,v)-plane.
struct Rect2 {
    double umin = 0.0, umax = 0.0, vmin = 0.0, vmax = 0.0;

    double area() const { return (umax - umin) * (vmax - vmin); }
    bool contains(double u, double v) const {
        return u >= umin && u <= umax && v >= vmin && v <= vmax;
    }
    bool contains_interior(double u, double v) const {
        return u > umin && u < umax && v > vmin && v < vmax;
    }
    Rect2 shifted_u(double s) const { return {umin + s, umax + s, vmin, vmax}; }
};

/// Closed rectangular annulus: the closure of outer \ inner.
struct RectAnnulus {
    Rect2 outer, inner;

    bool contains(double u, double v) const {
        return outer.contains(u, v) && !inner.contains_interior(u, v);
    }
    double area() const { return outer.area() - inner.area(); }
};

/// All rectangle, interval and marker data derived from ScaleParams.
///
/// Block i occupies the u-range [(i-1)eps, i*eps]; the x-axis is tiled per
/// block with period eps, cell (i,j) sitting at offset 4(i-1)delta + j*eps.
/// Base shapes are stored once; translates are produced on demand.
class RegionFamily {
public:
    explicit RegionFamily(const ScaleParams& p) : p_(p) {
        const double e = p.eps, d = p.delta, n = p.nu;
        const double pi = std::numbers::pi;
        P_ = {0.0, pi, 0.0, 1.0};
        Pp_ = {d, pi - d, d, 1.0 - d};
        Pnu_ = {n, pi - n, n, 1.0 - n};
        Q_ = {3.0 * d, pi - 3.0 * d, 3.0 * d, 1.0 - 3.0 * d};
        R_ = {0.0, e, 0.0, 1.0};
        Rp_ = {d, e - d, d, 1.0 - d};
        Rpp_ = {2.0 * d, e - 2.0 * d, 2.0 * d, 1.0 - 2.0 * d};
        Rnu_ = {n, e - n, n, 1.0 - n};
        I_ = {0.0, e};
        Ip_ = {d, e - d};
        Ipp_ = {2.0 * d, e - 2.0 * d};
        J_ = {{0.0, d}, {e - d, e}};
        Jp_ = {{d, 2.0 * d}, {e - 2.0 * d, e - d}};
        y_check_.resize(static_cast<std::size_t>(p.k) + 1);
        y_hat_.resize(static_cast<std::size_t>(p.k) + 1);
        for (int i = 1; i <= p.k; ++i) {
            y_check_[i] = 1.0 + (2 * i - 1) * d;
            y_hat_[i] = 2.0 * i - e + 2.0 * i * d;
        }
    }

    const ScaleParams& scales() const { return p_; }

    double u_shift(int i) const { return (i - 1) * p_.eps; }
    double x_shift(int i, int j) const { return 4.0 * (i - 1) * p_.delta + j * p_.eps; }

    const Rect2& P() const { return P_; }
    const Rect2& P_prime() const { return Pp_; }
    const Rect2& P_nu() const { return Pnu_; }
    const Rect2& Q() const { return Q_; }

    Rect2 R(int i = 1) const { return R_.shifted_u(u_shift(i)); }
    Rect2 R_prime(int i = 1) const { return Rp_.shifted_u(u_shift(i)); }
    Rect2 R_pprime(int i = 1) const { return Rpp_.shifted_u(u_shift(i)); }
    Rect2 R_nu(int i = 1) const { return Rnu_.shifted_u(u_shift(i)); }
    RectAnnulus A(int i = 1) const { return {R(i), R_prime(i)}; }
    RectAnnulus A_prime(int i = 1) const { return {R_prime(i), R_pprime(i)}; }

    Interval I(int i = 1, int j = 0) const { return I_.shifted(x_shift(i, j)); }
    Interval I_prime(int i = 1, int j = 0) const { return Ip_.shifted(x_shift(i, j)); }
    Interval I_pprime(int i = 1, int j = 0) const { return Ipp_.shifted(x_shift(i, j)); }
    std::pair<Interval, Interval> J(int i = 1, int j = 0) const {
        const double s = x_shift(i, j);
        return {J_.first.shifted(s), J_.second.shifted(s)};
    }
    std::pair<Interval, Interval> J_prime(int i = 1, int j = 0) const {
        const double s = x_shift(i, j);
        return {Jp_.first.shifted(s), Jp_.second.shifted(s)};
    }

    double y_check(int i) const { return y_check_[static_cast<std::size_t>(i)]; }
    double y_hat(int i) const { return y_hat_[static_cast<std::size_t>(i)]; }

    /// Block index i with (u,v) in R_nu(i), if any.
    std::optional<int> locate_block(double u, double v) const {
        if (u < 0.0) return std::nullopt;
        int i = static_cast<int>(std::floor(u / p_.eps)) + 1;
        if (i < 1 || i > p_.k) return std::nullopt;
        if (!R_nu(i).contains(u, v)) return std::nullopt;
        return i;
    }

    /// The unique support cell (i, j) with (u,v) in R_nu(i) and x in I(i,j),
    /// or none. The x-cells of a fixed block tile the x-axis with period
    /// eps; dispatch uses the half-open convention x in [lo, lo + eps), and
    /// both Hamiltonian families vanish on cell edges so ties are harmless.
    std::optional<std::pair<int, int>> locate_support_cell(const PhasePoint& z) const {
        auto i = locate_block(z.u, z.v);
        if (!i) return std::nullopt;
        const int j = static_cast<int>(std::floor((z.x - 4.0 * (*i - 1) * p_.delta) / p_.eps));
        return std::make_pair(*i, j);
    }

    /// The unique cell (i, j) of the x-axis tiling by [-2delta, 2delta)_{ij}
    /// (all of R(x) is covered, every x lies in exactly one cell).
    std::pair<int, int> x_cell(double x) const {
        // cell (i,j) covers [-2d + 4(i-1)d + j*eps, 2d + 4(i-1)d + j*eps);
        // the k cells of width 4*delta make up one eps-period: 4*k*delta = eps.
        const double d = p_.delta;
        const double t = std::floor((x + 2.0 * d) / (4.0 * d));
        const double j = std::floor(t / p_.k);
        const int q = static_cast<int>(t - j * p_.k);
        return {q + 1, static_cast<int>(j)};
    }

private:
    ScaleParams p_;
    Rect2 P_, Pp_, Pnu_, Q_;
    Rect2 R_, Rp_, Rpp_, Rnu_;
    Interval I_, Ip_, Ipp_;
    std::pair<Interval, Interval> J_, Jp_;
    std::vector<double> y_check_, y_hat_;
};

inline RegionFamily region_family(const ScaleParams& p) { return RegionFamily(p); }

}  // namespace cylsec
