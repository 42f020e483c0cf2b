#pragma once

#include <cmath>
#include <stdexcept>

namespace cylsec {

/// Canonical C-infinity transition h: h(t) = 0 for t <= 0, h(t) = 1 for
/// t >= 1, strictly increasing in between, flat to all orders at both ends.
/// Built from sigma(t) = exp(-1/t) as h = sigma(t) / (sigma(t) + sigma(1-t)).
struct SmoothTransition {
    static double sigma(double t) {
        return t > 0.0 ? std::exp(-1.0 / t) : 0.0;
    }
    static double sigma_deriv(double t) {
        return t > 0.0 ? std::exp(-1.0 / t) / (t * t) : 0.0;
    }
    static double value(double t) {
        if (t <= 0.0) return 0.0;
        if (t >= 1.0) return 1.0;
        const double a = sigma(t);
        const double b = sigma(1.0 - t);
        return a / (a + b);
    }
    static double deriv(double t) {
        if (t <= 0.0 || t >= 1.0) return 0.0;
        const double a = sigma(t);
        const double b = sigma(1.0 - t);
        const double da = sigma_deriv(t);
        const double db = sigma_deriv(1.0 - t);  // derivative of sigma at 1-t
        const double s = a + b;
        // d/dt [a/(a+b)] with b(t) = sigma(1-t), b'(t) = -db
        return (da * b + a * db) / (s * s);
    }
};

/// Smooth cutoff with an exact plateau: 0 outside [t0,t3], 1 on [t1,t2],
/// monotone transitions on the two ramps. Evaluation branches on interval
/// membership so zeros and the plateau are exact.
class PlateauCutoff {
public:
    PlateauCutoff(double t0, double t1, double t2, double t3)
        : t0_(t0), t1_(t1), t2_(t2), t3_(t3) {
        if (!(t0 < t1 && t1 <= t2 && t2 < t3))
            throw std::invalid_argument("PlateauCutoff: breakpoints must satisfy t0 < t1 <= t2 < t3");
    }

    double operator()(double t) const {
        if (t <= t0_ || t >= t3_) return 0.0;
        if (t >= t1_ && t <= t2_) return 1.0;
        if (t < t1_) return SmoothTransition::value((t - t0_) / (t1_ - t0_));
        return SmoothTransition::value((t3_ - t) / (t3_ - t2_));
    }

    double deriv(double t) const {
        if (t <= t0_ || t >= t3_) return 0.0;
        if (t >= t1_ && t <= t2_) return 0.0;
        if (t < t1_) return SmoothTransition::deriv((t - t0_) / (t1_ - t0_)) / (t1_ - t0_);
        return -SmoothTransition::deriv((t3_ - t) / (t3_ - t2_)) / (t3_ - t2_);
    }

    double t0() const { return t0_; }
    double t1() const { return t1_; }
    double t2() const { return t2_; }
    double t3() const { return t3_; }

private:
    double t0_, t1_, t2_, t3_;
};

/// Monotone ramp cutoff: 0 for t <= y_check, 1 for t >= y_check + delta,
/// and exactly (t - y_check)/delta on [y_check+nu, y_check+delta-nu].
/// The two margin strips of width nu blend the linear segment into the
/// constants via the canonical transition; the result is C^infinity with
/// nonnegative derivative everywhere.
class RampCutoff {
public:
    RampCutoff(double y_check, double delta, double nu)
        : yc_(y_check), delta_(delta), nu_(nu) {
        if (!(nu > 0.0 && 2.0 * nu < delta))
            throw std::invalid_argument("RampCutoff: need 0 < 2*nu < delta");
    }

    double operator()(double t) const {
        if (t <= yc_) return 0.0;
        if (t >= yc_ + delta_) return 1.0;
        const double s = t - yc_;
        if (s >= nu_ && s <= delta_ - nu_) return s / delta_;
        if (s < nu_) return (s / delta_) * SmoothTransition::value(s / nu_);
        const double r = delta_ - s;  // in (0, nu)
        return 1.0 - (r / delta_) * SmoothTransition::value(r / nu_);
    }

    double deriv(double t) const {
        if (t <= yc_ || t >= yc_ + delta_) return 0.0;
        const double s = t - yc_;
        if (s >= nu_ && s <= delta_ - nu_) return 1.0 / delta_;
        if (s < nu_) {
            return SmoothTransition::value(s / nu_) / delta_
                 + (s / delta_) * SmoothTransition::deriv(s / nu_) / nu_;
        }
        const double r = delta_ - s;
        return SmoothTransition::value(r / nu_) / delta_
             + (r / delta_) * SmoothTransition::deriv(r / nu_) / nu_;
    }

    double y_check() const { return yc_; }
    double delta() const { return delta_; }
    double nu() const { return nu_; }

private:
    double yc_, delta_, nu_;
};

inline PlateauCutoff make_plateau_cutoff(double t0, double t1, double t2, double t3) {
    return PlateauCutoff(t0, t1, t2, t3);
}

inline RampCutoff make_ramp_cutoff(double y_check, double delta, double nu) {
    return RampCutoff(y_check, delta, nu);
}

}  // namespace cylsec
