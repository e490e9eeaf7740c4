#pragma once

// Randomized property suites shared by the unit tests and the acceptance
// binary.  Every suite is seeded, so failures are reproducible.

#include <random>
#include <sstream>

#include "hopfval/gluing.hpp"

namespace hopfval::props {

struct Outcome {
    bool ok = true;
    int cases = 0;
    std::string detail;
    void fail(const std::string& s) {
        if (ok) detail = s;
        ok = false;
    }
};

// ---------------------------------------------------------------------------
// Fixtures.

// Hopf normal form  u' = mu u - v - u (u^2 + v^2),  v' = u + mu v - v (u^2 + v^2)
inline PolyField normal_form() {
    PolyField f(2, 2, 1);
    f.add_term(0, Coeff(1), {1, 0}, {1});
    f.add_term(0, Coeff(-1), {0, 1}, {0});
    f.add_term(0, Coeff(-1), {3, 0}, {0});
    f.add_term(0, Coeff(-1), {1, 2}, {0});
    f.add_term(1, Coeff(1), {0, 1}, {1});
    f.add_term(1, Coeff(1), {1, 0}, {0});
    f.add_term(1, Coeff(-1), {0, 3}, {0});
    f.add_term(1, Coeff(-1), {2, 1}, {0});
    return f;
}

inline PolyField lorenz84() {
    PolyField f(4, 4, 1);
    auto C = [](const char* s) { return Coeff::parse(s); };
    f.add_term(0, C("-1"), {0, 2, 0, 0}, {0});
    f.add_term(0, C("-1"), {0, 0, 2, 0}, {0});
    f.add_term(0, C("-0.25"), {1, 0, 0, 0}, {0});
    f.add_term(0, C("0.5"), {0, 0, 0, 0}, {0});
    f.add_term(0, C("-0.987"), {0, 0, 0, 2}, {0});
    f.add_term(1, C("1"), {1, 1, 0, 0}, {0});
    f.add_term(1, C("-1"), {1, 0, 1, 0}, {0});
    f.add_term(1, C("-1"), {0, 1, 0, 0}, {0});
    f.add_term(1, C("0.25"), {0, 0, 0, 0}, {0});
    f.add_term(2, C("1"), {1, 1, 0, 0}, {0});
    f.add_term(2, C("1"), {1, 0, 1, 0}, {0});
    f.add_term(2, C("-1"), {0, 0, 1, 0}, {0});
    f.add_term(3, C("-1.04"), {0, 0, 0, 1}, {0});
    f.add_term(3, C("0.987"), {1, 0, 0, 1}, {0});
    f.add_term(3, C("1"), {0, 0, 0, 0}, {1});
    return f;
}

// random sequence with geometric decay
inline FourierSeq<cplx> random_seq(std::mt19937_64& g, int K, double decay = 0.5) {
    std::normal_distribution<double> N(0.0, 1.0);
    FourierSeq<cplx> s(K);
    for (int k = -K; k <= K; ++k) s[k] = cplx(N(g), N(g)) * std::pow(decay, std::abs(k));
    return s;
}

inline PointState random_state(std::mt19937_64& g, int n, int m, int K, bool symmetric) {
    std::normal_distribution<double> N(0.0, 1.0);
    PointState x(n, m, K);
    for (int i = 0; i < n; ++i) x.seqs[i] = random_seq(g, K);
    for (int j = 0; j < m; ++j) x.params[j] = cplx(N(g), symmetric ? 0.0 : N(g));
    return symmetric ? conj_sym_project(x) : x;
}

// One problem of each kind built around random conjugate-symmetric data.
struct KindProblems {
    ProblemDef plain, hopf, ext_plain, ext_hopf;
};

inline KindProblems make_kind_problems(std::mt19937_64& g, int K) {
    PolyField f = normal_form();
    KindProblems r;
    PointState xp = random_state(g, 2, 2, K, true);
    PointState qp = random_state(g, 2, 2, K, true);
    r.plain = make_plain(tilde(f), build_phase(xp), build_continuation(qp, random_state(g, 2, 2, K, true), xp, xp), K, 1.1);
    PointState xh = random_state(g, 2, 5, K, true);
    PointState qh = random_state(g, 2, 5, K, true);
    r.hopf = make_hopf(desingularize(tilde(f)), equilibrium_map(f), build_phase(xh), build_amplitude(xh),
                       build_continuation(qh, random_state(g, 2, 5, K, true), xh, xh), K, 1.1);
    r.ext_plain = make_extended(r.plain);
    r.ext_hopf = make_extended(r.hopf);
    return r;
}

// ---------------------------------------------------------------------------
// Interval arithmetic: the exact real result of an operation on points lies
// in the interval result, and shrinking the arguments shrinks the result.

namespace detail {

// exact value p + e (e the rounding error of p) lies in I
inline bool holds(const Interval& I, double p, double e) {
    bool lo_ok = I.lo() < p || (I.lo() == p && e >= 0.0);
    bool hi_ok = p < I.hi() || (p == I.hi() && e <= 0.0);
    return lo_ok && hi_ok;
}

inline double two_sum_err(double a, double b, double s) {
    double bb = s - a;
    return (a - (s - bb)) + (b - bb);
}

}  // namespace detail

inline Outcome interval_properties(std::uint64_t seed = 1, int cases = 10000) {
    Outcome out;
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0), W(0.0, 1.0);
    std::uniform_int_distribution<int> E(-30, 30);
    auto rnd_interval = [&] {
        double scale = std::ldexp(1.0, E(g));
        double a = U(g) * scale, b = a + W(g) * scale * (W(g) < 0.2 ? 0.0 : 1.0);
        return Interval(a, b);
    };
    auto inside = [&](const Interval& I) { return I.lo() + W(g) * (I.hi() - I.lo()); };
    auto sub = [&](const Interval& I) {
        double a = inside(I), b = inside(I);
        return Interval(std::min(a, b), std::max(a, b));
    };
    for (int c = 0; c < cases; ++c, ++out.cases) {
        Interval a = rnd_interval(), b = rnd_interval();
        double x = std::clamp(inside(a), a.lo(), a.hi()), y = std::clamp(inside(b), b.lo(), b.hi());
        std::ostringstream where;
        where.precision(17);
        where << "case " << c << ": a=" << a << " b=" << b << " x=" << x << " y=" << y;

        double s = x + y, d = x - y, p = x * y;
        if (!detail::holds(a + b, s, detail::two_sum_err(x, y, s))) out.fail("sum " + where.str());
        if (!detail::holds(a - b, d, detail::two_sum_err(x, -y, d))) out.fail("difference " + where.str());
        if (!detail::holds(a * b, p, std::fma(x, y, -p))) out.fail("product " + where.str());
        if (!b.contains_zero() && y != 0.0) {
            double q = x / y;
            double r = std::fma(-q, y, x);  // x - q y exactly
            double e = (r == 0.0) ? 0.0 : ((r > 0.0) == (y > 0.0) ? 1.0 : -1.0);
            if (!detail::holds(a / b, q, e)) out.fail("quotient " + where.str());
        }
        Interval aa = abs(a);
        if (!detail::holds(sqr(a), x * x, std::fma(x, x, -x * x))) out.fail("square " + where.str());
        if (!detail::holds(sqrt(aa), std::sqrt(std::fabs(x)), -std::fma(std::sqrt(std::fabs(x)), std::sqrt(std::fabs(x)), -std::fabs(x))))
            out.fail("sqrt " + where.str());
        if (!aa.contains(std::fabs(x))) out.fail("abs " + where.str());

        // inclusion monotonicity
        Interval a2 = sub(a), b2 = sub(b);
        if (!(a2 + b2).subset_of(a + b) || !(a2 - b2).subset_of(a - b) || !(a2 * b2).subset_of(a * b))
            out.fail("monotonicity " + where.str());
        if (!b.contains_zero() && !(a2 / b2).subset_of(a / b)) out.fail("monotonicity of division " + where.str());
        if (!sqr(a2).subset_of(sqr(a)) || !pow(a2, 3).subset_of(pow(a, 3))) out.fail("monotonicity of powers " + where.str());
    }
    return out;
}

// ---------------------------------------------------------------------------
// ||a * b||_nu <= ||a||_nu ||b||_nu on enclosures.

inline Outcome banach_algebra(std::uint64_t seed = 2, int cases = 1000) {
    Outcome out;
    std::mt19937_64 g(seed);
    std::uniform_int_distribution<int> Kd(0, 12);
    std::uniform_real_distribution<double> nud(1.0, 2.0), dec(0.1, 1.0);
    for (int c = 0; c < cases; ++c, ++out.cases) {
        double nu = c % 10 == 0 ? 1.0 : nud(g);
        int Ka = Kd(g), Kb = Kd(g);
        FourierSeq<CInterval> a(Ka), b(Kb);
        auto pa = random_seq(g, Ka, dec(g)), pb = random_seq(g, Kb, dec(g));
        for (int k = -Ka; k <= Ka; ++k) a[k] = CInterval(pa[k]);
        for (int k = -Kb; k <= Kb; ++k) b[k] = CInterval(pb[k]);
        Interval lhs = nu_norm(convolve(a, b), nu);
        Interval rhs = nu_norm(a, nu) * nu_norm(b, nu);
        if (lhs.lo() > rhs.hi()) out.fail("case " + std::to_string(c) + ": Banach algebra inequality violated");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Convolution against two oracles: the defining sum c_k = sum_j a_j b_{k-j}
// and pointwise multiplication of the trigonometric polynomials.

inline Outcome convolution_oracle(std::uint64_t seed = 3, int cases = 200) {
    Outcome out;
    std::mt19937_64 g(seed);
    std::uniform_int_distribution<int> Kd(0, 15);
    std::uniform_real_distribution<double> T(0.0, 2.0 * M_PI);
    for (int c = 0; c < cases; ++c, ++out.cases) {
        int Ka = Kd(g), Kb = Kd(g);
        auto a = random_seq(g, Ka), b = random_seq(g, Kb);
        auto r = convolve(a, b);
        if (r.K() != Ka + Kb) out.fail("case " + std::to_string(c) + ": product support");
        double scale = 1.0;
        for (int k = -(Ka + Kb); k <= Ka + Kb; ++k) {
            cplx s = 0.0;
            for (int j = -Ka; j <= Ka; ++j) s += a.at(j) * b.at(k - j);
            scale = std::max(scale, std::abs(s));
            if (std::abs(s - r.at(k)) > 1e-13 * scale) out.fail("case " + std::to_string(c) + ": coefficient " + std::to_string(k));
        }
        for (int t = 0; t < 3; ++t) {
            double th = T(g);
            auto ev = [&](const FourierSeq<cplx>& s) {
                cplx v = 0.0;
                for (int k = -s.K(); k <= s.K(); ++k) v += s[k] * std::polar(1.0, k * th);
                return v;
            };
            if (std::abs(ev(a) * ev(b) - ev(r)) > 1e-11 * (1.0 + std::abs(ev(r))))
                out.fail("case " + std::to_string(c) + ": pointwise product");
        }
        // rigorous convolution encloses the point one
        FourierSeq<CInterval> ai(Ka), bi(Kb);
        for (int k = -Ka; k <= Ka; ++k) ai[k] = CInterval(a[k]);
        for (int k = -Kb; k <= Kb; ++k) bi[k] = CInterval(b[k]);
        auto ri = convolve(ai, bi);
        for (int k = -(Ka + Kb); k <= Ka + Kb; ++k)
            if (!ri[k].re.contains(r[k].real()) || !ri[k].im.contains(r[k].imag()))
                out.fail("case " + std::to_string(c) + ": interval convolution misses point value");
    }
    return out;
}

// ---------------------------------------------------------------------------
// H(x*) = H(x)* for all four problem kinds, checked on enclosures.

inline Outcome conj_equivariance(std::uint64_t seed = 4, int cases = 10) {
    Outcome out;
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> S(0.0, 1.0);
    for (int c = 0; c < cases; ++c) {
        const int K = 3 + c % 3;
        auto P = make_kind_problems(g, K);
        for (const ProblemDef* p : {&P.plain, &P.hopf, &P.ext_plain, &P.ext_hopf}) {
            ++out.cases;
            PointState x = random_state(g, p->n(), p->m(), K, false);
            double s = S(g);
            auto r = eval_H<CInterval>(*p, to_interval(x), s);
            auto rc = eval_H<CInterval>(*p, to_interval(conjugate(x)), s);
            std::string tag = std::string(kind_name(p->kind())) + " case " + std::to_string(c);
            for (int i = 0; i < p->n(); ++i) {
                const auto &F = r.F[i], &Fc = rc.F[i];
                for (int k = -F.K(); k <= F.K(); ++k)
                    if (!Fc.at(k).intersects(conj(F.at(-k)))) {
                        out.fail(tag + ": sequence equation " + std::to_string(i) + " mode " + std::to_string(k));
                        break;
                    }
            }
            for (size_t e = 0; e < r.scalars.size(); ++e)
                if (!rc.scalars[e].intersects(conj(r.scalars[e]))) out.fail(tag + ": scalar equation " + std::to_string(e));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// The extended system evaluated at (x(s), x'(s), x''(s)) equals the first two
// s-derivatives of the base system along the path, by finite differences.

inline Outcome extended_fd_oracle(std::uint64_t seed = 5, int cases = 6) {
    Outcome out;
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> S(0.2, 0.8);
    for (int c = 0; c < cases; ++c) {
        const int K = 3;
        auto P = make_kind_problems(g, K);
        for (auto [base, ext] : {std::pair{&P.plain, &P.ext_plain}, std::pair{&P.hopf, &P.ext_hopf}}) {
            ++out.cases;
            const int n = base->n(), m = base->m();
            PointState x0 = random_state(g, n, m, K, true), v = random_state(g, n, m, K, true), w = random_state(g, n, m, K, true);
            auto path = [&](double s) { return x0 + v.scaled(cplx(s)) + w.scaled(cplx(s * s)); };
            double s = S(g), h = 1e-3;
            PointState xs = path(s), d1 = v + w.scaled(cplx(2.0 * s)), d2 = w.scaled(cplx(2.0));
            auto R = [&](double t) { return eval_H<cplx>(*base, path(t), t); };
            auto rp = R(s + h), rm = R(s - h), r0 = R(s), rpp = R(s + 2 * h), rmm = R(s - 2 * h);
            // five-point stencils, truncation error O(h^4)
            auto d1f = [&](cplx a2, cplx a1, cplx b1, cplx b2) { return (8.0 * (a1 - b1) - (a2 - b2)) / (12.0 * h); };
            auto d2f = [&](cplx a2, cplx a1, cplx z, cplx b1, cplx b2) {
                return (-a2 + 16.0 * a1 - 30.0 * z + 16.0 * b1 - b2) / (12.0 * h * h);
            };
            auto re = eval_H<cplx>(*ext, hopfval::detail::stack_state(xs, d1, d2), s);
            std::string tag = std::string(kind_name(base->kind())) + " case " + std::to_string(c);
            auto cmp = [&](cplx fd, cplx an, const std::string& what) {
                if (std::abs(fd - an) > 1e-5 * std::max(1.0, std::abs(an))) out.fail(tag + ": " + what + " (difference " + std::to_string(std::abs(fd - an)) + ")");
            };
            for (int i = 0; i < n; ++i)
                for (int k = -r0.F[i].K(); k <= r0.F[i].K(); ++k) {
                    cplx fd1 = d1f(rpp.F[i].at(k), rp.F[i].at(k), rm.F[i].at(k), rmm.F[i].at(k));
                    cplx fd2 = d2f(rpp.F[i].at(k), rp.F[i].at(k), r0.F[i].at(k), rm.F[i].at(k), rmm.F[i].at(k));
                    cmp(r0.F[i].at(k), re.F[i].at(k), "block 0");
                    cmp(fd1, re.F[n + i].at(k), "first derivative, sequence equation");
                    cmp(fd2, re.F[2 * n + i].at(k), "second derivative, sequence equation");
                }
            for (int e = 0; e < m; ++e) {
                cplx fd1 = d1f(rpp.scalars[e], rp.scalars[e], rm.scalars[e], rmm.scalars[e]);
                cplx fd2 = d2f(rpp.scalars[e], rp.scalars[e], r0.scalars[e], rm.scalars[e], rmm.scalars[e]);
                cmp(r0.scalars[e], re.scalars[e], "scalar block 0");
                cmp(fd1, re.scalars[m + e], "first derivative, scalar equation " + std::to_string(e));
                cmp(fd2, re.scalars[2 * m + e], "second derivative, scalar equation " + std::to_string(e));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Extended Jacobians are block lower triangular.

inline Outcome block_triangularity(std::uint64_t seed = 6, int cases = 4) {
    Outcome out;
    std::mt19937_64 g(seed);
    for (int c = 0; c < cases; ++c) {
        auto P = make_kind_problems(g, 3);
        for (const ProblemDef* p : {&P.ext_plain, &P.ext_hopf}) {
            ++out.cases;
            PointState x = random_state(g, p->n(), p->m(), 3, true);
            CMat J = galerkin_jacobian(*p, x, 0.37);
            if (!is_block_lower_triangular(J, p->layout())) out.fail(std::string(kind_name(p->kind())) + " Jacobian has upper blocks");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gluing: random points of the hopf-side ball, transformed by
// u = y + a ubar, land in the plain-side ball.

inline Outcome glue_monte_carlo(const Certificate& hopf, const Certificate& plain, bool hopf_end, bool plain_start,
                                std::uint64_t seed = 7, int samples = 2000) {
    Outcome out;
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const PointState& xb = hopf_end ? hopf.x1 : hopf.x0;
    const PointState& xp = plain_start ? plain.x0 : plain.x1;
    const int n = xb.n(), K = xb.K();
    const double nu = hopf.problem.nu();
    NuWeights w(nu, K);
    for (int c = 0; c < samples; ++c, ++out.cases) {
        // perturbation with X-norm r_hat (weighted) pushed to the boundary
        PointState d = xb.scaled(cplx(0.0));
        for (int i = 0; i < n; ++i) {
            double budget = hopf.r_hat * hopf.weights[i];
            FourierSeq<cplx> s(K);
            double tot = 0.0;
            for (int k = -K; k <= K; ++k) {
                s[k] = cplx(U(g), U(g)) * std::pow(nu, -std::abs(k));
                tot += std::abs(s[k]) * std::pow(nu, std::abs(k));
            }
            d.seqs[i] = s.scaled(cplx(0.999 * budget / tot));
        }
        for (int j = 0; j < xb.m(); ++j) d.params[j] = 0.999 * hopf.r_hat * hopf.weights[n + j] * (U(g) > 0 ? 1.0 : -1.0);
        d = conj_sym_project(d);
        PointState xs = xb + d;
        // T(xs) - xp in interval arithmetic
        CInterval a(Interval(xs.params[glue_idx::a].real()));
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            FourierSeq<CInterval> diff(K);
            for (int k = -K; k <= K; ++k) {
                CInterval t = CInterval(xs.seqs[i][k]) * a - CInterval(xp.seqs[i].at(k));
                if (k == 0) t += CInterval(xs.params[glue_idx::y0 + i]);
                diff[k] = t;
            }
            worst = std::max(worst, rnd::div_up(nu_norm(diff, w).hi(), plain.weights[i]));
        }
        worst = std::max(worst, rnd::div_up((CInterval(xs.params[glue_idx::tau]) - CInterval(xp.params[0])).mag(), plain.weights[n]));
        worst = std::max(worst,
                         rnd::div_up((CInterval(xs.params[glue_idx::mu(n)]) - CInterval(xp.params[1])).mag(), plain.weights[n + 1]));
        if (!(worst < plain.r_max)) {
            std::ostringstream s;
            s << "sample " << c << " maps to distance " << worst << " >= r_max " << plain.r_max;
            out.fail(s.str());
        }
    }
    return out;
}

}  // namespace hopfval::props
