#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "coeff.hpp"
#include "seqspace.hpp"

namespace hopfval {

struct Monomial {
    Coeff coeff;
    std::vector<int> u;  // exponents of state variables
    std::vector<int> p;  // exponents of parameters

    int state_degree() const {
        int d = 0;
        for (int e : u) d += e;
        return d;
    }
    int total_degree() const {
        int d = state_degree();
        for (int e : p) d += e;
        return d;
    }
};

// Polynomial map R^n_state x R^n_param -> R^n_out with real coefficients.
class PolyField {
public:
    PolyField() = default;
    PolyField(int n_out, int n_state, int n_param) : n_out_(n_out), n_state_(n_state), n_param_(n_param), comps_(n_out) {}

    int n_out() const { return n_out_; }
    int n_state() const { return n_state_; }
    int n_param() const { return n_param_; }
    int n_vars() const { return n_state_ + n_param_; }
    const std::vector<Monomial>& component(int i) const { return comps_.at(i); }
    const std::vector<std::vector<Monomial>>& components() const { return comps_; }

    void add_term(int out, const Coeff& c, std::vector<int> u, std::vector<int> p) {
        if (out < 0 || out >= n_out_) throw std::invalid_argument("monomial output index out of range");
        if (static_cast<int>(u.size()) != n_state_ || static_cast<int>(p.size()) != n_param_)
            throw std::invalid_argument("monomial exponent vector has wrong length");
        for (int e : u)
            if (e < 0) throw std::invalid_argument("negative exponent");
        for (int e : p)
            if (e < 0) throw std::invalid_argument("negative exponent");
        if (c.is_zero()) return;
        auto& comp = comps_[out];
        for (auto& m : comp) {
            if (m.u == u && m.p == p) {
                m.coeff = m.coeff + c;
                if (m.coeff.is_zero()) comp.erase(comp.begin() + (&m - comp.data()));
                return;
            }
        }
        comp.push_back({c, std::move(u), std::move(p)});
        std::sort(comp.begin(), comp.end(), [](const Monomial& a, const Monomial& b) {
            return a.u != b.u ? a.u < b.u : a.p < b.p;
        });
    }
    void add_field(const PolyField& f, const Coeff& scale = Coeff(1)) {
        check_same_shape(f);
        for (int i = 0; i < n_out_; ++i)
            for (const auto& m : f.comps_[i]) add_term(i, m.coeff * scale, m.u, m.p);
    }

    int max_state_degree() const {
        int d = 0;
        for (const auto& c : comps_)
            for (const auto& m : c) d = std::max(d, m.state_degree());
        return d;
    }
    int max_total_degree() const {
        int d = 0;
        for (const auto& c : comps_)
            for (const auto& m : c) d = std::max(d, m.total_degree());
        return d;
    }
    bool empty() const {
        for (const auto& c : comps_)
            if (!c.empty()) return false;
        return true;
    }

    friend bool operator==(const PolyField& a, const PolyField& b) {
        if (a.n_out_ != b.n_out_ || a.n_state_ != b.n_state_ || a.n_param_ != b.n_param_) return false;
        for (int i = 0; i < a.n_out_; ++i) {
            if (a.comps_[i].size() != b.comps_[i].size()) return false;
            for (size_t j = 0; j < a.comps_[i].size(); ++j) {
                const auto &x = a.comps_[i][j], &y = b.comps_[i][j];
                if (x.u != y.u || x.p != y.p || !(x.coeff == y.coeff)) return false;
            }
        }
        return true;
    }

    void check_same_shape(const PolyField& f) const {
        if (f.n_out_ != n_out_ || f.n_state_ != n_state_ || f.n_param_ != n_param_)
            throw std::invalid_argument("polynomial field shape mismatch");
    }

private:
    int n_out_ = 0, n_state_ = 0, n_param_ = 0;
    std::vector<std::vector<Monomial>> comps_;
};

// Partial derivative with respect to variable `var` (state variables first,
// then parameters).
inline PolyField differentiate(const PolyField& f, int var) {
    if (var < 0 || var >= f.n_vars()) throw std::invalid_argument("differentiation variable out of range");
    PolyField r(f.n_out(), f.n_state(), f.n_param());
    for (int i = 0; i < f.n_out(); ++i) {
        for (const auto& m : f.component(i)) {
            auto u = m.u;
            auto p = m.p;
            int& e = var < f.n_state() ? u[var] : p[var - f.n_state()];
            if (e == 0) continue;
            Coeff c = m.coeff * Coeff(static_cast<std::int64_t>(e));
            --e;
            r.add_term(i, c, u, p);
        }
    }
    return r;
}

// Evaluation over any commutative ring-like value type V (point sequences,
// interval sequences, polynomials in s of those).  Parameters are passed as
// values of V too.  `one` is the unit of V and `scale(v, coeff)` multiplies
// by a polynomial coefficient.
template <class V>
class FieldEvaluator {
public:
    template <class Scale>
    FieldEvaluator(std::vector<V> vars, V one, Scale scale) : vars_(std::move(vars)), one_(std::move(one)), scale_(scale), pows_(vars_.size()) {}

    const V& power(int var, int e) {
        auto& pw = pows_[var];
        if (pw.empty()) pw.push_back(one_);
        while (static_cast<int>(pw.size()) <= e) pw.push_back(pw.back() * vars_[var]);
        return pw[e];
    }

    V eval_monomial(const Monomial& m, int n_state) {
        V acc = one_;
        bool first = true;
        auto mulin = [&](int var, int e) {
            if (e == 0) return;
            if (first) {
                acc = power(var, e);
                first = false;
            } else {
                acc = acc * power(var, e);
            }
        };
        // parameters first: they are cheap (scalars) in the sequence algebra
        for (size_t j = 0; j < m.p.size(); ++j) mulin(n_state + static_cast<int>(j), m.p[j]);
        for (size_t j = 0; j < m.u.size(); ++j) mulin(static_cast<int>(j), m.u[j]);
        return scale_(acc, m.coeff);
    }

    std::vector<V> eval(const PolyField& f) {
        if (static_cast<int>(vars_.size()) != f.n_vars()) throw std::invalid_argument("field evaluated with wrong number of variables");
        std::vector<V> out;
        out.reserve(f.n_out());
        for (int i = 0; i < f.n_out(); ++i) {
            V acc = scale_(one_, Coeff(0));
            bool first = true;
            for (const auto& m : f.component(i)) {
                V t = eval_monomial(m, f.n_state());
                if (first) {
                    acc = std::move(t);
                    first = false;
                } else {
                    acc = acc + t;
                }
            }
            out.push_back(std::move(acc));
        }
        return out;
    }

private:
    std::vector<V> vars_;
    V one_;
    std::function<V(const V&, const Coeff&)> scale_;
    std::vector<std::vector<V>> pows_;
};

// Plain scalar evaluation (real or interval), e.g. for equilibrium problems.
template <class T>
std::vector<T> eval_point(const PolyField& f, const std::vector<T>& state, const std::vector<T>& params) {
    std::vector<T> vars = state;
    vars.insert(vars.end(), params.begin(), params.end());
    FieldEvaluator<T> ev(vars, T(1.0), [](const T& v, const Coeff& c) {
        if constexpr (std::is_same_v<T, Interval>)
            return v * c.enclosure();
        else if constexpr (std::is_same_v<T, CInterval>)
            return v * c.enclosure();
        else
            return v * static_cast<T>(c.approx());
    });
    return ev.eval(f);
}

// h-hat(v, lambda): state factors via convolution, parameter factors as scalars.
template <class T>
std::vector<FourierSeq<T>> eval_fourier(const PolyField& f, const StatePoint<T>& x) {
    if (x.n() != f.n_state() || x.m() != f.n_param()) throw std::invalid_argument("eval_fourier: dimension mismatch");
    std::vector<FourierSeq<T>> vars(x.seqs.begin(), x.seqs.end());
    for (const auto& p : x.params) vars.push_back(FourierSeq<T>::constant(p));
    FieldEvaluator<FourierSeq<T>> ev(vars, FourierSeq<T>::constant(T(1.0)),
                                     [](const FourierSeq<T>& v, const Coeff& c) { return v.scaled(coeff_as<T>(c)); });
    auto out = ev.eval(f);
    // canonical support: deg * K
    int Kout = f.max_state_degree() * x.K();
    for (auto& o : out) o = o.resized(Kout);
    return out;
}

// f~ = tau * f: prepends tau as parameter 0.
inline PolyField tilde(const PolyField& f) {
    PolyField r(f.n_out(), f.n_state(), f.n_param() + 1);
    for (int i = 0; i < f.n_out(); ++i)
        for (const auto& m : f.component(i)) {
            std::vector<int> p{1};
            p.insert(p.end(), m.p.begin(), m.p.end());
            r.add_term(i, m.coeff, m.u, p);
        }
    return r;
}

inline std::int64_t binomial(int n, int k) {
    std::int64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// Hopf blow-up.  Input f~ over (u; tau, rest...), output over
// (ubar; tau, a, y_1..y_n, rest...):  [f~(y + a ubar) - f~(y)] / a.
inline PolyField desingularize(const PolyField& ft) {
    const int n = ft.n_state();
    if (ft.n_param() < 1) throw std::invalid_argument("desingularize expects tau as parameter 0");
    const int rest = ft.n_param() - 1;
    const int np = 2 + n + rest;
    auto lift_params = [&](const Monomial& m, int a_exp, const std::vector<int>& y_exp) {
        std::vector<int> p(np, 0);
        p[0] = m.p[0];
        p[1] = a_exp;
        for (int i = 0; i < n; ++i) p[2 + i] = y_exp[i];
        for (int j = 0; j < rest; ++j) p[2 + n + j] = m.p[1 + j];
        return p;
    };
    // numerator f~(y + a ubar) - f~(y), fully expanded
    PolyField num(ft.n_out(), n, np);
    for (int out = 0; out < ft.n_out(); ++out) {
        for (const auto& m : ft.component(out)) {
            std::vector<int> j(n, 0);
            while (true) {
                Coeff c = m.coeff;
                int aexp = 0;
                std::vector<int> yexp(n);
                for (int i = 0; i < n; ++i) {
                    c = c * Coeff(binomial(m.u[i], j[i]));
                    aexp += j[i];
                    yexp[i] = m.u[i] - j[i];
                }
                num.add_term(out, c, j, lift_params(m, aexp, yexp));
                int i = 0;
                while (i < n && ++j[i] > m.u[i]) j[i++] = 0;
                if (i == n) break;
            }
            num.add_term(out, -m.coeff, std::vector<int>(n, 0), lift_params(m, 0, m.u));
        }
    }
    PolyField r(ft.n_out(), n, np);
    for (int out = 0; out < ft.n_out(); ++out)
        for (const auto& m : num.component(out)) {
            if (m.p[1] < 1) throw std::logic_error("desingularize: expanded term lacks a factor a");
            auto p = m.p;
            --p[1];
            r.add_term(out, m.coeff, m.u, p);
        }
    return r;
}

// g(lambda-bar) = f(y, mu...) for the blown-up parameter layout
// (tau, a, y_1..y_n, rest...).  f is the raw field over (u; rest...).
inline PolyField equilibrium_map(const PolyField& f) {
    const int n = f.n_state();
    PolyField g(f.n_out(), 0, 2 + n + f.n_param());
    for (int i = 0; i < f.n_out(); ++i)
        for (const auto& m : f.component(i)) {
            std::vector<int> p(2 + n + f.n_param(), 0);
            for (int k = 0; k < n; ++k) p[2 + k] = m.u[k];
            for (int k = 0; k < f.n_param(); ++k) p[2 + n + k] = m.p[k];
            g.add_term(i, m.coeff, {}, p);
        }
    return g;
}

namespace detail {

// Copy field f (over x = (u; lambda)) into the tripled variable layout
// (u0,u1,u2; l0,l1,l2), as a function of the block-0 variables, multiplied
// by the listed block-1/2 variables (indices into the original x).
inline void add_lifted(PolyField& out, int out_row, const PolyField& f, int comp, const Coeff& scale,
                       const std::vector<std::pair<int, int>>& extra_vars) {
    const int n = f.n_state(), m = f.n_param();
    for (const auto& mono : f.component(comp)) {
        std::vector<int> u(3 * n, 0), p(3 * m, 0);
        for (int i = 0; i < n; ++i) u[i] = mono.u[i];
        for (int j = 0; j < m; ++j) p[j] = mono.p[j];
        for (auto [block, var] : extra_vars) {
            if (var < n)
                ++u[block * n + var];
            else
                ++p[block * m + var - n];
        }
        out.add_term(out_row, mono.coeff * scale, u, p);
    }
}

inline PolyField extend_one(const PolyField& h) {
    const int n = h.n_state(), m = h.n_param(), nv = h.n_vars();
    PolyField r(3 * h.n_out(), 3 * n, 3 * m);
    std::vector<PolyField> d1(nv);
    for (int j = 0; j < nv; ++j) d1[j] = differentiate(h, j);
    for (int i = 0; i < h.n_out(); ++i) {
        add_lifted(r, i, h, i, Coeff(1), {});
        for (int j = 0; j < nv; ++j) {
            add_lifted(r, h.n_out() + i, d1[j], i, Coeff(1), {{1, j}});
            add_lifted(r, 2 * h.n_out() + i, d1[j], i, Coeff(1), {{2, j}});
            for (int l = 0; l < nv; ++l) {
                PolyField d2 = differentiate(d1[j], l);
                add_lifted(r, 2 * h.n_out() + i, d2, i, Coeff(1), {{1, j}, {1, l}});
            }
        }
    }
    return r;
}

// g has no state variables; its extension lives on parameters only.
inline PolyField extend_params_only(const PolyField& g, int m_total) {
    PolyField gg(g.n_out(), 0, m_total);
    for (int i = 0; i < g.n_out(); ++i)
        for (const auto& mono : g.component(i)) gg.add_term(i, mono.coeff, {}, mono.p);
    return extend_one(gg);
}

}  // namespace detail

struct ExtendedFields {
    PolyField h;  // over (u0,u1,u2; l0,l1,l2)
    PolyField g;  // over (; l0,l1,l2)
};

// Second-order extension: blocks (h, Dh x', Dh x'' + D^2h[x',x']).
inline ExtendedFields extend_second_order(const PolyField& h, const PolyField& g) {
    ExtendedFields e;
    e.h = detail::extend_one(h);
    if (g.n_out() > 0) {
        if (g.n_state() != 0 || g.n_param() != h.n_param())
            throw std::invalid_argument("algebraic map must depend on the parameters only");
        e.g = detail::extend_params_only(g, h.n_param());
    } else {
        e.g = PolyField(0, 0, 3 * h.n_param());
    }
    return e;
}

}  // namespace hopfval
