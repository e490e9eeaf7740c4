#pragma once

#include <algorithm>
#include <complex>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "interval.hpp"

namespace hopfval {

inline cplx conj(const cplx& z) { return std::conj(z); }
inline cplx times_i(const cplx& z) { return {-z.imag(), z.real()}; }
inline double mag(const cplx& z) { return std::abs(z); }
inline double mag(const CInterval& z) { return z.mag(); }

template <class T>
inline constexpr bool is_rigorous_v = std::is_same_v<T, CInterval>;

// Two-sided coefficient sequence supported on |k| <= K.
template <class T>
class FourierSeq {
public:
    FourierSeq() : K_(0), c_(1, T(0.0)) {}
    explicit FourierSeq(int K) : K_(K), c_(2 * K + 1, T(0.0)) {
        if (K < 0) throw std::invalid_argument("negative halfwidth");
    }
    static FourierSeq constant(const T& v) {
        FourierSeq s(0);
        s.c_[0] = v;
        return s;
    }

    int K() const { return K_; }
    T& operator[](int k) { return c_[k + K_]; }
    const T& operator[](int k) const { return c_[k + K_]; }
    T at(int k) const { return (k < -K_ || k > K_) ? T(0.0) : c_[k + K_]; }
    std::vector<T>& data() { return c_; }
    const std::vector<T>& data() const { return c_; }

    // zero-pad or truncate to halfwidth K
    FourierSeq resized(int K) const {
        FourierSeq r(K);
        int m = std::min(K, K_);
        for (int k = -m; k <= m; ++k) r[k] = (*this)[k];
        return r;
    }

    FourierSeq& operator+=(const FourierSeq& b) {
        if (b.K_ > K_) *this = resized(b.K_);
        for (int k = -b.K_; k <= b.K_; ++k) (*this)[k] += b[k];
        return *this;
    }
    FourierSeq& operator-=(const FourierSeq& b) {
        if (b.K_ > K_) *this = resized(b.K_);
        for (int k = -b.K_; k <= b.K_; ++k) (*this)[k] -= b[k];
        return *this;
    }
    friend FourierSeq operator+(FourierSeq a, const FourierSeq& b) { return a += b; }
    friend FourierSeq operator-(FourierSeq a, const FourierSeq& b) { return a -= b; }
    FourierSeq operator-() const {
        FourierSeq r(K_);
        for (size_t i = 0; i < c_.size(); ++i) r.c_[i] = -c_[i];
        return r;
    }
    template <class S>
    FourierSeq scaled(const S& a) const {
        FourierSeq r(K_);
        for (size_t i = 0; i < c_.size(); ++i) r.c_[i] = c_[i] * a;
        return r;
    }
    friend FourierSeq operator*(const FourierSeq& a, const FourierSeq& b) { return convolve(a, b); }

    friend FourierSeq convolve(const FourierSeq& a, const FourierSeq& b) {
        if (a.K_ == 0) return b.scaled(a.c_[0]);
        if (b.K_ == 0) return a.scaled(b.c_[0]);
        FourierSeq r(a.K_ + b.K_);
        for (int i = -a.K_; i <= a.K_; ++i) {
            const T& ai = a[i];
            for (int j = -b.K_; j <= b.K_; ++j) r[i + j] += ai * b[j];
        }
        return r;
    }

private:
    int K_;
    std::vector<T> c_;
};

// Table of nu^|k| as enclosing intervals.
class NuWeights {
public:
    explicit NuWeights(double nu, int kmax = 0) : nu_(nu) {
        if (!(nu >= 1.0)) throw std::invalid_argument("nu must be >= 1");
        w_.push_back(Interval(1.0));
        grow(kmax);
    }
    double nu() const { return nu_; }
    const Interval& operator()(int k) const {
        k = std::abs(k);
        if (k >= static_cast<int>(w_.size())) grow(k);
        return w_[k];
    }
    double up(int k) const { return (*this)(k).hi(); }
    // upper bound of nu^-|k|
    double inv_up(int k) const { return rnd::div_up(1.0, (*this)(k).lo()); }

private:
    void grow(int kmax) const {
        while (static_cast<int>(w_.size()) <= kmax) w_.push_back(w_.back() * Interval(nu_));
    }
    double nu_;
    mutable std::vector<Interval> w_;
};

// sum |v_k| nu^|k|
inline Interval nu_norm(const FourierSeq<CInterval>& v, const NuWeights& w) {
    double lo = 0.0, hi = 0.0;
    for (int k = -v.K(); k <= v.K(); ++k) {
        hi = rnd::add_up(hi, rnd::mul_up(v[k].mag(), w(k).hi()));
        lo = rnd::add_down(lo, rnd::mul_down(v[k].mig(), w(k).lo()));
    }
    return {lo, hi};
}
inline Interval nu_norm(const FourierSeq<CInterval>& v, double nu) { return nu_norm(v, NuWeights(nu, v.K())); }

inline double nu_norm(const FourierSeq<cplx>& v, double nu) {
    if (!(nu >= 1.0)) throw std::invalid_argument("nu must be >= 1");
    double s = 0.0, w = 1.0;
    for (int k = 0; k <= v.K(); ++k) {
        s += (k == 0 ? std::abs(v[0]) : std::abs(v[k]) + std::abs(v[-k])) * w;
        w *= nu;
    }
    return s;
}

// power 1: ik, power 2: k^2, power -1: 1/k (mode 0 must vanish)
template <class T>
FourierSeq<T> apply_K(const FourierSeq<T>& v, int power) {
    FourierSeq<T> r(v.K());
    if (power == -1 && !(mag(v[0]) == 0.0)) throw std::invalid_argument("K^-1 applied to sequence with nonzero mode 0");
    for (int k = -v.K(); k <= v.K(); ++k) {
        if (power == 1) {
            r[k] = times_i(v[k] * T(static_cast<double>(k)));
        } else if (power == 2) {
            r[k] = v[k] * T(static_cast<double>(k) * k);
        } else if (power == -1) {
            if (k != 0) {
                if constexpr (is_rigorous_v<T>)
                    r[k] = v[k] / Interval(static_cast<double>(k));
                else
                    r[k] = v[k] / static_cast<double>(k);
            }
        } else {
            throw std::invalid_argument("apply_K power must be 1, 2 or -1");
        }
    }
    return r;
}

// x = (v, lambda): n sequences of common halfwidth K and m scalars.
template <class T>
struct StatePoint {
    std::vector<FourierSeq<T>> seqs;
    std::vector<T> params;
    std::vector<std::string> labels;
    bool conj_symmetric = false;

    StatePoint() = default;
    StatePoint(int n, int m, int K) : seqs(n, FourierSeq<T>(K)), params(m, T(0.0)) {}

    int n() const { return static_cast<int>(seqs.size()); }
    int m() const { return static_cast<int>(params.size()); }
    int K() const { return seqs.empty() ? 0 : seqs[0].K(); }

    StatePoint resized(int K) const {
        StatePoint r = *this;
        for (auto& s : r.seqs) s = s.resized(K);
        return r;
    }
    StatePoint& operator+=(const StatePoint& b) {
        check_dims(b);
        for (int i = 0; i < n(); ++i) seqs[i] += b.seqs[i];
        for (int j = 0; j < m(); ++j) params[j] += b.params[j];
        return *this;
    }
    StatePoint& operator-=(const StatePoint& b) {
        check_dims(b);
        for (int i = 0; i < n(); ++i) seqs[i] -= b.seqs[i];
        for (int j = 0; j < m(); ++j) params[j] -= b.params[j];
        return *this;
    }
    friend StatePoint operator+(StatePoint a, const StatePoint& b) { return a += b; }
    friend StatePoint operator-(StatePoint a, const StatePoint& b) { return a -= b; }
    template <class S>
    StatePoint scaled(const S& a) const {
        StatePoint r = *this;
        for (auto& s : r.seqs) s = s.scaled(a);
        for (auto& p : r.params) p = p * a;
        return r;
    }
    void check_dims(const StatePoint& b) const {
        if (b.n() != n() || b.m() != m()) throw std::invalid_argument("state point dimension mismatch");
    }
};

using PointState = StatePoint<cplx>;
using IState = StatePoint<CInterval>;

inline IState to_interval(const PointState& x) {
    IState r;
    r.labels = x.labels;
    r.conj_symmetric = x.conj_symmetric;
    for (const auto& s : x.seqs) {
        FourierSeq<CInterval> t(s.K());
        for (int k = -s.K(); k <= s.K(); ++k) t[k] = CInterval(s[k]);
        r.seqs.push_back(std::move(t));
    }
    for (const auto& p : x.params) r.params.push_back(CInterval(p));
    return r;
}
inline PointState to_mid(const IState& x) {
    PointState r;
    r.labels = x.labels;
    r.conj_symmetric = x.conj_symmetric;
    for (const auto& s : x.seqs) {
        FourierSeq<cplx> t(s.K());
        for (int k = -s.K(); k <= s.K(); ++k) t[k] = s[k].mid();
        r.seqs.push_back(std::move(t));
    }
    for (const auto& p : x.params) r.params.push_back(p.mid());
    return r;
}

// Bilinear form sum q_k x_k over |k| <= min(K_q, K_x), no conjugation.
template <class T>
T pairing(const StatePoint<T>& q, const StatePoint<T>& x) {
    q.check_dims(x);
    T s(0.0);
    for (int i = 0; i < q.n(); ++i) {
        int K = std::min(q.seqs[i].K(), x.seqs[i].K());
        for (int k = -K; k <= K; ++k) s += q.seqs[i][k] * x.seqs[i][k];
    }
    for (int j = 0; j < q.m(); ++j) s += q.params[j] * x.params[j];
    return s;
}

template <class T>
StatePoint<T> conjugate(const StatePoint<T>& x) {
    StatePoint<T> r = x;
    for (int i = 0; i < x.n(); ++i)
        for (int k = -x.K(); k <= x.K(); ++k) r.seqs[i][k] = conj(x.seqs[i][-k]);
    for (int j = 0; j < x.m(); ++j) r.params[j] = conj(x.params[j]);
    return r;
}

// coefficient-wise complex conjugate (not the involution x*); for a real
// tangent t, <conj_coeffs(t), t> = sum |t_k|^2
template <class T>
StatePoint<T> conj_coeffs(const StatePoint<T>& x) {
    StatePoint<T> r = x;
    for (auto& s : r.seqs)
        for (auto& c : s.data()) c = conj(c);
    for (auto& p : r.params) p = conj(p);
    return r;
}

// Whether x* = x holds: exactly for point data, as enclosure overlap for intervals.
template <class T>
bool conj_sym_check(const StatePoint<T>& x) {
    auto same = [](const T& a, const T& b) {
        if constexpr (is_rigorous_v<T>)
            return a.intersects(b);
        else
            return a == b;
    };
    for (int i = 0; i < x.n(); ++i)
        for (int k = 0; k <= x.seqs[i].K(); ++k)
            if (!same(x.seqs[i][-k], conj(x.seqs[i][k]))) return false;
    for (int j = 0; j < x.m(); ++j)
        if (!same(x.params[j], conj(x.params[j]))) return false;
    return true;
}

// (x + x*)/2; for point data the result satisfies x* = x bitwise.
template <class T>
StatePoint<T> conj_sym_project(const StatePoint<T>& x) {
    StatePoint<T> r = x;
    for (int i = 0; i < x.n(); ++i) {
        auto& s = r.seqs[i];
        for (int k = 0; k <= s.K(); ++k) {
            T avg = (x.seqs[i][k] + conj(x.seqs[i][-k])) * T(0.5);
            if (k == 0) {
                if constexpr (is_rigorous_v<T>)
                    avg = CInterval(avg.re, Interval(0.0));
                else
                    avg = cplx(avg.real(), 0.0);
            }
            s[k] = avg;
            s[-k] = conj(avg);
        }
    }
    for (auto& p : r.params) {
        if constexpr (is_rigorous_v<T>)
            p = CInterval(p.re, Interval(0.0));
        else
            p = cplx(p.real(), 0.0);
    }
    r.conj_symmetric = true;
    return r;
}

// Per-component norms: nu-norm for sequences, modulus for parameters.
inline std::vector<double> component_norms(const PointState& x, double nu) {
    std::vector<double> r;
    for (const auto& s : x.seqs) r.push_back(nu_norm(s, nu));
    for (const auto& p : x.params) r.push_back(std::abs(p));
    return r;
}
inline std::vector<double> component_norms_up(const IState& x, const NuWeights& w) {
    std::vector<double> r;
    for (const auto& s : x.seqs) r.push_back(nu_norm(s, w).hi());
    for (const auto& p : x.params) r.push_back(p.mag());
    return r;
}
// ||x||_X = max_j ||x_j|| / weight_j
inline double x_norm(const PointState& x, double nu, const std::vector<double>& weights = {}) {
    auto c = component_norms(x, nu);
    double r = 0.0;
    for (size_t j = 0; j < c.size(); ++j) r = std::max(r, c[j] / (weights.empty() ? 1.0 : weights[j]));
    return r;
}

// Operator norm bound for a finite matrix acting on X_K (columns and rows are
// indexed by a component id and a mode).  Column-wise: nu^-|k'| times the
// weighted l1 norm of the column restricted to each output component.
struct BlockIndex {
    int comp;  // component id
    int k;     // Fourier mode (0 for parameters)
};

template <class AbsEntry>
std::vector<std::vector<double>> op_norm(int rows, int cols, const std::vector<BlockIndex>& row_idx,
                                         const std::vector<BlockIndex>& col_idx, int ncomp, const NuWeights& w,
                                         AbsEntry&& abs_entry) {
    std::vector<std::vector<double>> r(ncomp, std::vector<double>(ncomp, 0.0));
    std::vector<double> colsum(ncomp);
    for (int c = 0; c < cols; ++c) {
        std::fill(colsum.begin(), colsum.end(), 0.0);
        for (int i = 0; i < rows; ++i) {
            double a = abs_entry(i, c);
            if (a == 0.0) continue;
            colsum[row_idx[i].comp] = rnd::add_up(colsum[row_idx[i].comp], rnd::mul_up(a, w.up(row_idx[i].k)));
        }
        int cc = col_idx[c].comp;
        double f = w.inv_up(col_idx[c].k);
        for (int j = 0; j < ncomp; ++j) r[j][cc] = std::max(r[j][cc], rnd::mul_up(colsum[j], f));
    }
    return r;
}

}  // namespace hopfval
