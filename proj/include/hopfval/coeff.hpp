#pragma once

#include <charconv>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>

#include "interval.hpp"

namespace hopfval {

// int64 rational; operations return nullopt on overflow.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static std::optional<Rational> make(__int128 n, __int128 d) {
        if (d == 0) throw std::invalid_argument("rational with zero denominator");
        if (d < 0) n = -n, d = -d;
        __int128 a = n < 0 ? -n : n, b = d;
        while (b != 0) {
            __int128 t = a % b;
            a = b;
            b = t;
        }
        if (a > 1) n /= a, d /= a;
        constexpr __int128 lim = INT64_MAX;
        if (n > lim || n < -lim || d > lim) return std::nullopt;
        return Rational{static_cast<std::int64_t>(n), static_cast<std::int64_t>(d)};
    }
    friend std::optional<Rational> add(const Rational& a, const Rational& b) {
        return make(static_cast<__int128>(a.num) * b.den + static_cast<__int128>(b.num) * a.den,
                    static_cast<__int128>(a.den) * b.den);
    }
    friend std::optional<Rational> mul(const Rational& a, const Rational& b) {
        return make(static_cast<__int128>(a.num) * b.num, static_cast<__int128>(a.den) * b.den);
    }
    Interval enclosure() const { return Interval(static_cast<double>(num)) / Interval(static_cast<double>(den)); }
    bool is_zero() const { return num == 0; }
    std::string str() const { return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den); }
    friend bool operator==(const Rational&, const Rational&) = default;
};

// Polynomial coefficient: exact when possible, always carries an enclosure.
class Coeff {
public:
    Coeff() : exact_(Rational{0, 1}), enc_(0.0) {}
    Coeff(std::int64_t v) : exact_(Rational{v, 1}), enc_(Rational{v, 1}.enclosure()) {}  // NOLINT
    explicit Coeff(const Rational& r) : exact_(r), enc_(r.enclosure()) {}
    explicit Coeff(const Interval& i) : enc_(i) {}

    // Accepts "3", "-1/3", "0.987", "2.5e-3".  Decimal text is converted
    // exactly to a rational when it fits, else to an outward enclosure.
    static Coeff parse(const std::string& text) {
        std::string s;
        for (char c : text)
            if (c != ' ' && c != '_') s += c;
        if (s.empty()) throw std::invalid_argument("empty coefficient");
        auto slash = s.find('/');
        if (slash != std::string::npos) {
            auto p = parse_decimal(s.substr(0, slash));
            auto q = parse_decimal(s.substr(slash + 1));
            if (!p || !q) throw std::invalid_argument("bad rational coefficient '" + text + "'");
            if (q->is_zero()) throw std::invalid_argument("zero denominator in '" + text + "'");
            auto r = mul(*p, Rational{q->den, q->num < 0 ? -q->num : q->num});
            if (r && q->num < 0) r->num = -r->num;
            if (!r) throw std::invalid_argument("rational coefficient overflows: '" + text + "'");
            return Coeff(*r);
        }
        if (auto r = parse_decimal(s)) return Coeff(*r);
        char* end = nullptr;
        double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0' || !std::isfinite(v))
            throw std::invalid_argument("bad coefficient '" + text + "'");
        return Coeff(widen_ulp(v));
    }
    // A binary double from a config file: interpreted as its shortest
    // round-trip decimal representation, i.e. the text the user wrote.
    static Coeff from_double(double v) {
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof buf, v);
        return parse(std::string(buf, res.ptr));
    }

    bool is_exact() const { return exact_.has_value(); }
    const std::optional<Rational>& exact() const { return exact_; }
    const Interval& enclosure() const { return enc_; }
    double approx() const { return exact_ ? static_cast<double>(exact_->num) / static_cast<double>(exact_->den) : enc_.mid(); }
    bool is_zero() const { return exact_ ? exact_->is_zero() : (enc_.lo() == 0.0 && enc_.hi() == 0.0); }
    std::string str() const {
        if (exact_) return exact_->str();
        return "[" + format_down(enc_.lo()) + "," + format_up(enc_.hi()) + "]";
    }

    friend Coeff operator+(const Coeff& a, const Coeff& b) {
        if (a.exact_ && b.exact_)
            if (auto r = add(*a.exact_, *b.exact_)) return Coeff(*r);
        return Coeff(a.enc_ + b.enc_);
    }
    friend Coeff operator*(const Coeff& a, const Coeff& b) {
        if (a.exact_ && b.exact_)
            if (auto r = mul(*a.exact_, *b.exact_)) return Coeff(*r);
        return Coeff(a.enc_ * b.enc_);
    }
    Coeff operator-() const {
        if (exact_) return Coeff(Rational{-exact_->num, exact_->den});
        return Coeff(-enc_);
    }
    friend Coeff operator-(const Coeff& a, const Coeff& b) { return a + (-b); }
    friend bool operator==(const Coeff& a, const Coeff& b) {
        if (a.exact_ && b.exact_) return *a.exact_ == *b.exact_;
        return a.enc_ == b.enc_ && !a.exact_ && !b.exact_;
    }

private:
    static std::optional<Rational> parse_decimal(const std::string& s) {
        size_t i = 0;
        bool neg = false;
        if (i < s.size() && (s[i] == '+' || s[i] == '-')) neg = s[i++] == '-';
        __int128 mant = 0;
        int frac_digits = 0, ndig = 0;
        bool seen_dot = false;
        for (; i < s.size(); ++i) {
            char c = s[i];
            if (c == '.') {
                if (seen_dot) return std::nullopt;
                seen_dot = true;
            } else if (c >= '0' && c <= '9') {
                if (mant > static_cast<__int128>(1) << 100) return std::nullopt;
                mant = mant * 10 + (c - '0');
                ++ndig;
                if (seen_dot) ++frac_digits;
            } else {
                break;
            }
        }
        if (ndig == 0) return std::nullopt;
        int ex = 0;
        if (i < s.size()) {
            if (s[i] != 'e' && s[i] != 'E') return std::nullopt;
            ++i;
            std::string e = s.substr(i);
            if (e.empty()) return std::nullopt;
            size_t pos = 0;
            try {
                ex = std::stoi(e, &pos);
            } catch (...) {
                return std::nullopt;
            }
            if (pos != e.size()) return std::nullopt;
        }
        ex -= frac_digits;
        if (ex > 30 || ex < -30 || ndig + (ex > 0 ? ex : 0) > 36) return std::nullopt;
        __int128 p10 = 1;
        for (int k = 0; k < (ex < 0 ? -ex : ex); ++k) p10 *= 10;
        __int128 n = neg ? -mant : mant;
        return ex >= 0 ? Rational::make(n * p10, 1) : Rational::make(n, p10);
    }

    std::optional<Rational> exact_;
    Interval enc_;
};

template <class T>
T coeff_as(const Coeff& c);
template <>
inline cplx coeff_as<cplx>(const Coeff& c) {
    return {c.approx(), 0.0};
}
template <>
inline CInterval coeff_as<CInterval>(const Coeff& c) {
    return CInterval(c.enclosure());
}

}  // namespace hopfval
