#pragma once

#include <cfenv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

namespace hopfval {

using cplx = std::complex<double>;

struct IntervalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Directed rounding for single operations.  Results are computed in
// round-to-nearest; an error-free transformation tells whether the exact
// value lies above or below the rounded one, and only then the endpoint is
// stepped one ulp outward.  Tiny magnitudes (where the error term itself may
// be inexact) are always stepped.
namespace rnd {

constexpr double kTiny = 1e-290;
constexpr double kInf = std::numeric_limits<double>::infinity();

inline double next_up(double x) { return std::nextafter(x, kInf); }
inline double next_down(double x) { return std::nextafter(x, -kInf); }

inline double two_sum_err(double a, double b, double s) {
    double bb = s - a;
    return (a - (s - bb)) + (b - bb);
}

inline double add_up(double a, double b) {
    // TwoSum is error-free even for subnormal results
    double s = a + b;
    return two_sum_err(a, b, s) > 0 ? next_up(s) : s;
}
inline double add_down(double a, double b) {
    double s = a + b;
    return two_sum_err(a, b, s) < 0 ? next_down(s) : s;
}
inline double sub_up(double a, double b) { return add_up(a, -b); }
inline double sub_down(double a, double b) { return add_down(a, -b); }

inline double mul_up(double a, double b) {
    double p = a * b;
    if (p == 0.0) return (a == 0.0 || b == 0.0) ? 0.0 : next_up(p);
    if (std::fabs(p) < kTiny) return next_up(p);
    return std::fma(a, b, -p) > 0 ? next_up(p) : p;
}
inline double mul_down(double a, double b) {
    double p = a * b;
    if (p == 0.0) return (a == 0.0 || b == 0.0) ? 0.0 : next_down(p);
    if (std::fabs(p) < kTiny) return next_down(p);
    return std::fma(a, b, -p) < 0 ? next_down(p) : p;
}

// sign of (a/b - q) equals sign of (a - q b)/b
inline double div_up(double a, double b) {
    double q = a / b;
    if (std::fabs(q) < kTiny) return next_up(q);
    double r = std::fma(-q, b, a);
    if (b < 0) r = -r;
    return r > 0 ? next_up(q) : q;
}
inline double div_down(double a, double b) {
    double q = a / b;
    if (std::fabs(q) < kTiny) return next_down(q);
    double r = std::fma(-q, b, a);
    if (b < 0) r = -r;
    return r < 0 ? next_down(q) : q;
}

inline double sqrt_up(double x) {
    double s = std::sqrt(x);
    if (s == 0.0) return 0.0;
    return std::fma(-s, s, x) > 0 ? next_up(s) : s;
}
inline double sqrt_down(double x) {
    if (x <= 0.0) return 0.0;
    double s = std::sqrt(x);
    if (s == 0.0) return 0.0;
    return std::fma(-s, s, x) < 0 ? next_down(s) : s;
}

// Switches the hardware rounding direction for the lifetime of the guard.
// fesetround acts on the calling thread only.
class RoundingGuard {
public:
    explicit RoundingGuard(int mode) : saved_(std::fegetround()) { std::fesetround(mode); }
    ~RoundingGuard() { std::fesetround(saved_); }
    RoundingGuard(const RoundingGuard&) = delete;
    RoundingGuard& operator=(const RoundingGuard&) = delete;

private:
    int saved_;
};

}  // namespace rnd

class Interval {
public:
    constexpr Interval() = default;
    Interval(double x) : lo_(x), hi_(x) { check(); }  // NOLINT: implicit point intervals are convenient
    Interval(double lo, double hi) : lo_(lo), hi_(hi) { check(); }

    double lo() const { return lo_; }
    double hi() const { return hi_; }

    double mid() const {
        double m = 0.5 * lo_ + 0.5 * hi_;
        return std::isfinite(m) ? m : 0.0;
    }
    // mid() +- rad() contains the interval
    double rad() const {
        double m = mid();
        return std::max(rnd::sub_up(hi_, m), rnd::sub_up(m, lo_));
    }
    double mag() const { return std::max(std::fabs(lo_), std::fabs(hi_)); }
    double mig() const {
        if (lo_ <= 0.0 && hi_ >= 0.0) return 0.0;
        return std::min(std::fabs(lo_), std::fabs(hi_));
    }
    double width() const { return rnd::sub_up(hi_, lo_); }

    bool contains(double x) const { return lo_ <= x && x <= hi_; }
    bool contains_zero() const { return lo_ <= 0.0 && 0.0 <= hi_; }
    bool subset_of(const Interval& o) const { return o.lo_ <= lo_ && hi_ <= o.hi_; }
    bool intersects(const Interval& o) const { return lo_ <= o.hi_ && o.lo_ <= hi_; }

    Interval operator-() const { return {-hi_, -lo_}; }

    Interval& operator+=(const Interval& b) { return *this = *this + b; }
    Interval& operator-=(const Interval& b) { return *this = *this - b; }
    Interval& operator*=(const Interval& b) { return *this = *this * b; }

    friend Interval operator+(const Interval& a, const Interval& b) {
        return {rnd::add_down(a.lo_, b.lo_), rnd::add_up(a.hi_, b.hi_)};
    }
    friend Interval operator-(const Interval& a, const Interval& b) {
        return {rnd::sub_down(a.lo_, b.hi_), rnd::sub_up(a.hi_, b.lo_)};
    }
    friend Interval operator*(const Interval& a, const Interval& b) {
        if (a.lo_ == a.hi_ && b.lo_ == b.hi_)
            return {rnd::mul_down(a.lo_, b.lo_), rnd::mul_up(a.lo_, b.lo_)};
        double c[4][2] = {{a.lo_, b.lo_}, {a.lo_, b.hi_}, {a.hi_, b.lo_}, {a.hi_, b.hi_}};
        double lo = rnd::kInf, hi = -rnd::kInf;
        for (auto& p : c) {
            lo = std::min(lo, rnd::mul_down(p[0], p[1]));
            hi = std::max(hi, rnd::mul_up(p[0], p[1]));
        }
        return {lo, hi};
    }
    friend std::optional<Interval> try_div(const Interval& a, const Interval& b) {
        if (b.contains_zero()) return std::nullopt;
        double c[4][2] = {{a.lo_, b.lo_}, {a.lo_, b.hi_}, {a.hi_, b.lo_}, {a.hi_, b.hi_}};
        double lo = rnd::kInf, hi = -rnd::kInf;
        for (auto& p : c) {
            lo = std::min(lo, rnd::div_down(p[0], p[1]));
            hi = std::max(hi, rnd::div_up(p[0], p[1]));
        }
        return Interval(lo, hi);
    }
    friend Interval operator/(const Interval& a, const Interval& b) {
        auto q = try_div(a, b);
        if (!q) throw IntervalError("interval division: divisor contains zero");
        return *q;
    }

    friend bool operator==(const Interval& a, const Interval& b) { return a.lo_ == b.lo_ && a.hi_ == b.hi_; }

    friend std::ostream& operator<<(std::ostream& os, const Interval& a) {
        return os << '[' << a.lo_ << ", " << a.hi_ << ']';
    }

private:
    void check() const {
        if (!std::isfinite(lo_) || !std::isfinite(hi_)) throw IntervalError("interval endpoint is not finite");
        if (lo_ > hi_) throw IntervalError("interval with lo > hi");
    }

    double lo_ = 0.0;
    double hi_ = 0.0;
};

enum class Sign { strictly_positive, strictly_negative, contains_zero };

inline Sign sign_check(const Interval& a) {
    if (a.lo() > 0) return Sign::strictly_positive;
    if (a.hi() < 0) return Sign::strictly_negative;
    return Sign::contains_zero;
}

struct Bounds {
    double mid, rad, mag, mig;
};
inline Bounds bounds(const Interval& a) { return {a.mid(), a.rad(), a.mag(), a.mig()}; }

inline Interval hull(const Interval& a, const Interval& b) {
    return {std::min(a.lo(), b.lo()), std::max(a.hi(), b.hi())};
}
inline Interval abs(const Interval& a) {
    if (a.lo() >= 0) return a;
    if (a.hi() <= 0) return -a;
    return {0.0, a.mag()};
}
inline Interval sqr(const Interval& a) {
    Interval m = abs(a);
    return {rnd::mul_down(m.lo(), m.lo()), rnd::mul_up(m.hi(), m.hi())};
}
inline Interval sqrt(const Interval& a) {
    if (a.lo() < 0) throw IntervalError("sqrt of interval with negative part");
    return {rnd::sqrt_down(a.lo()), rnd::sqrt_up(a.hi())};
}
inline Interval pow(const Interval& a, int e) {
    Interval r(1.0);
    Interval b = a;
    if (e < 0) throw IntervalError("negative interval power");
    if (e % 2 == 0 && e > 0) b = abs(a);
    for (int i = 0; i < e; ++i) r = r * b;
    return r;
}
// [x, x] widened to contain the real number that x was rounded from
inline Interval widen_ulp(double x) { return {rnd::next_down(x), rnd::next_up(x)}; }

// Decimal output that is guaranteed to enclose the binary endpoint.
inline std::string format_down(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x == 0.0 ? 0.0 : rnd::next_down(x));
    if (x == 0.0) std::snprintf(buf, sizeof buf, "0");
    return buf;
}
inline std::string format_up(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x == 0.0 ? 0.0 : rnd::next_up(x));
    if (x == 0.0) std::snprintf(buf, sizeof buf, "0");
    return buf;
}
inline double parse_down(const std::string& s) {
    double x = std::strtod(s.c_str(), nullptr);
    return x == 0.0 && s == "0" ? 0.0 : rnd::next_down(x);
}
inline double parse_up(const std::string& s) {
    double x = std::strtod(s.c_str(), nullptr);
    return x == 0.0 && s == "0" ? 0.0 : rnd::next_up(x);
}

// Rectangular complex interval.
struct CInterval {
    Interval re, im;

    CInterval() = default;
    CInterval(double r) : re(r), im(0.0) {}  // NOLINT
    CInterval(const Interval& r) : re(r), im(0.0) {}  // NOLINT
    CInterval(const Interval& r, const Interval& i) : re(r), im(i) {}
    CInterval(std::complex<double> z) : re(z.real()), im(z.imag()) {}  // NOLINT

    std::complex<double> mid() const { return {re.mid(), im.mid()}; }
    bool contains(std::complex<double> z) const { return re.contains(z.real()) && im.contains(z.imag()); }
    bool contains_zero() const { return re.contains_zero() && im.contains_zero(); }
    bool intersects(const CInterval& o) const { return re.intersects(o.re) && im.intersects(o.im); }
    // upper bound of |z| over the rectangle
    double mag() const {
        double a = re.mag(), b = im.mag();
        if (b == 0.0) return a;
        if (a == 0.0) return b;
        return rnd::sqrt_up(rnd::add_up(rnd::mul_up(a, a), rnd::mul_up(b, b)));
    }
    double mig() const {
        double a = re.mig(), b = im.mig();
        return rnd::sqrt_down(rnd::add_down(rnd::mul_down(a, a), rnd::mul_down(b, b)));
    }

    CInterval operator-() const { return {-re, -im}; }
    CInterval& operator+=(const CInterval& b) { re += b.re; im += b.im; return *this; }
    CInterval& operator-=(const CInterval& b) { re -= b.re; im -= b.im; return *this; }
    CInterval& operator*=(const CInterval& b) { return *this = *this * b; }

    friend CInterval operator+(const CInterval& a, const CInterval& b) { return {a.re + b.re, a.im + b.im}; }
    friend CInterval operator-(const CInterval& a, const CInterval& b) { return {a.re - b.re, a.im - b.im}; }
    friend CInterval operator*(const CInterval& a, const CInterval& b) {
        if (b.im.lo() == 0.0 && b.im.hi() == 0.0) return {a.re * b.re, a.im * b.re};
        if (a.im.lo() == 0.0 && a.im.hi() == 0.0) return {a.re * b.re, a.re * b.im};
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    friend CInterval operator*(const CInterval& a, const Interval& b) { return {a.re * b, a.im * b}; }
    friend CInterval operator*(const Interval& b, const CInterval& a) { return {a.re * b, a.im * b}; }
    friend CInterval operator/(const CInterval& a, const Interval& b) { return {a.re / b, a.im / b}; }
    friend CInterval operator/(const CInterval& a, const CInterval& b) {
        Interval d = sqr(b.re) + sqr(b.im);
        CInterval n = a * CInterval(b.re, -b.im);
        return {n.re / d, n.im / d};
    }
    friend bool operator==(const CInterval& a, const CInterval& b) { return a.re == b.re && a.im == b.im; }
    friend std::ostream& operator<<(std::ostream& os, const CInterval& a) {
        return os << a.re << "+i" << a.im;
    }
};

inline CInterval conj(const CInterval& a) { return {a.re, -a.im}; }
inline CInterval hull(const CInterval& a, const CInterval& b) { return {hull(a.re, b.re), hull(a.im, b.im)}; }
inline Interval abs(const CInterval& a) { return {a.mig(), a.mag()}; }
// multiply by i
inline CInterval times_i(const CInterval& a) { return {-a.im, a.re}; }

}  // namespace hopfval
