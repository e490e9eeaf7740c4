#include <gtest/gtest.h>

#include "properties.hpp"

using namespace hopfval;

namespace {

// harmonic oscillator u1' = u2, u2' = -u1 as a plain problem with tau and a
// dummy parameter entering linearly: f~ = tau (u2 + mu u1, -u1 + mu u2)
PolyField oscillator() {
    PolyField f(2, 2, 1);
    f.add_term(0, Coeff(1), {0, 1}, {0});
    f.add_term(0, Coeff(1), {1, 0}, {1});
    f.add_term(1, Coeff(-1), {1, 0}, {0});
    f.add_term(1, Coeff(1), {0, 1}, {1});
    return f;
}

// circle of radius rho: u1 = rho cos t, u2 = -rho sin t, tau = 1, mu = 0
PointState circle(double rho, int K) {
    PointState x(2, 2, K);
    x.seqs[0][1] = x.seqs[0][-1] = rho / 2;
    x.seqs[1][1] = cplx(0, rho / 2);
    x.seqs[1][-1] = cplx(0, -rho / 2);
    x.params[0] = 1.0;
    x.params[1] = 0.0;
    return x;
}

// continuation in the amplitude along the family of circles
ProblemDef oscillator_problem(const PointState& x0, const PointState& x1, int K) {
    PointState d = x1 - x0;
    return make_plain(tilde(oscillator()), build_phase((x0 + x1).scaled(cplx(0.5))),
                      build_continuation(conj_coeffs(d), conj_coeffs(d), x0, x1), K, 1.1);
}

}  // namespace

TEST(Properties, ConjugateEquivarianceAllKinds) {
    auto r = props::conj_equivariance(4, 10);
    EXPECT_EQ(r.cases, 40);
    EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Properties, ExtendedFieldFiniteDifferencePath) {
    auto r = props::extended_fd_oracle(5, 6);
    EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Properties, BlockTriangularity) {
    auto r = props::block_triangularity(6, 4);
    EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Phase, BuildPhaseFormula) {
    PointState x(1, 1, 2);
    x.seqs[0][1] = x.seqs[0][-1] = 0.5;
    GenPhase p = build_phase(x);
    // conj(i * 1 * 1/2) = -i/2
    EXPECT_TRUE(p.phi0.seqs[0][1].re.contains(0.0));
    EXPECT_TRUE(p.phi0.seqs[0][1].im.contains(-0.5));
    PointState c(1, 1, 2);
    c.seqs[0][0] = 3.0;
    EXPECT_THROW(build_phase(c), std::invalid_argument);
}

TEST(Phase, AmplitudeFormula) {
    PointState x(1, 1, 2);
    x.seqs[0][1] = x.seqs[0][-1] = 0.5;
    GenPhase a = build_amplitude(x);
    EXPECT_TRUE(a.phi0.seqs[0][1].re.contains(0.5));
    auto v = a.eval<CInterval>(to_interval(x), 0.0);
    EXPECT_TRUE(v.re.contains(-0.5));
    PointState m(1, 1, 2);
    m.seqs[0][0] = 2.0;
    EXPECT_TRUE(a.eval<CInterval>(to_interval(m), 0.0).re.contains(-1.0));
}

TEST(Phase, ContinuationAnchors) {
    std::mt19937_64 g(21);
    auto x0 = props::random_state(g, 2, 2, 3, true), x1 = props::random_state(g, 2, 2, 3, true);
    auto q = props::random_state(g, 2, 2, 3, true);
    GenPhase c = build_continuation(q, q, x0, x1);
    EXPECT_TRUE(c.eval<CInterval>(to_interval(x0), 0.0).re.contains_zero());
    EXPECT_TRUE(c.eval<CInterval>(to_interval(x1), 1.0).re.contains_zero());
    EXPECT_TRUE(c.eval<CInterval>(to_interval((x0 + x1).scaled(cplx(0.5))), 0.5).re.contains_zero());
}

TEST(Problem, OscillatorCircleIsExactSolution) {
    const int K = 4;
    auto x = circle(1.0, K);
    auto p = oscillator_problem(circle(0.9, K), circle(1.1, K), K);
    auto r = eval_H<CInterval>(p, to_interval(x), 0.5);
    for (const auto& F : r.F)
        for (const auto& c : F.data()) EXPECT_TRUE(c.re.contains_zero() && c.im.contains_zero());
    for (const auto& s : r.scalars) EXPECT_TRUE(s.re.contains_zero());
}

TEST(Problem, JacobianMatchesFiniteDifference) {
    std::mt19937_64 g(22);
    auto P = props::make_kind_problems(g, 3);
    for (const ProblemDef* p : {&P.plain, &P.hopf, &P.ext_plain}) {
        auto x = props::random_state(g, p->n(), p->m(), 3, true);
        auto d = props::random_state(g, p->n(), p->m(), 3, true);
        CMat J = galerkin_jacobian(*p, x, 0.3);
        const double e = 1e-6;
        CVec fd = (galerkin_residual(*p, x + d.scaled(cplx(e)), 0.3) - galerkin_residual(*p, x - d.scaled(cplx(e)), 0.3)) / (2 * e);
        const Layout& L = p->layout();
        CVec dv(L.size());
        for (int i = 0; i < p->n(); ++i)
            for (int k = -3; k <= 3; ++k) dv(L.seq(i, k)) = d.seqs[i][k];
        for (int j = 0; j < p->m(); ++j) dv(L.param(j)) = d.params[j];
        CVec an = J * dv;
        EXPECT_LT((an - fd).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, an.cwiseAbs().maxCoeff())) << kind_name(p->kind());
    }
}

TEST(Validator, FindRadiusClosedForms) {
    RadiiBounds b;
    b.Y = {0.1};
    b.Z = {{0.0, 0.5}};
    auto r = find_radius(b);
    ASSERT_TRUE(r.ok);
    EXPECT_GT(r.r_hat, 0.2);
    EXPECT_LT(r.r_hat, 0.21);
    EXPECT_TRUE(b.negative_at(r.r_hat));
    RadiiBounds c;
    c.Y = {1.0};
    c.Z = {{0.0, 0.0, 1.0}};
    EXPECT_FALSE(find_radius(c).ok);
}

TEST(Validator, OscillatorSegmentAndRecheck) {
    const int K = 4;
    auto x0 = circle(1.0, K), x1 = circle(1.01, K);
    auto p = oscillator_problem(x0, x1, K);
    auto v = validate_segment(p, x0, x1);
    ASSERT_TRUE(v.ok) << v.failure;
    EXPECT_LT(v.cert.r_hat, 1e-10);
    EXPECT_TRUE(v.cert.checks.smoothness);
    EXPECT_TRUE(v.cert.checks.phase_shift);
    auto rc = recheck(v.cert, true);
    EXPECT_TRUE(rc.ok());
    // corrupted endpoint
    auto bad = x1;
    bad.seqs[0][1] += 0.1;
    bad.seqs[0][-1] += 0.1;
    auto vb = validate_segment(p, x0, bad);
    EXPECT_FALSE(vb.ok && vb.cert.r_hat < 1e-3);
}

TEST(Validator, TamperedCertificateFailsRecheck) {
    const int K = 4;
    auto x0 = circle(1.0, K), x1 = circle(1.01, K);
    auto v = validate_segment(oscillator_problem(x0, x1, K), x0, x1);
    ASSERT_TRUE(v.ok);
    Certificate c = v.cert;
    c.x1.seqs[1][1] += cplx(0, 1e-3);
    c.x1.seqs[1][-1] += cplx(0, -1e-3);
    EXPECT_FALSE(recheck(c, true).ok());
}

TEST(Validator, ParallelCandidatesAgreeWithSequential) {
    std::mt19937_64 g(23);
    const int K = 4;
    auto x0 = circle(1.0, K), x1 = circle(1.05, K);
    auto p = oscillator_problem(x0, x1, K);
    ValidatorOptions seq, par;
    par.jobs = 3;
    auto a = validate_segment(p, x0, x1, seq), b = validate_segment(p, x0, x1, par);
    ASSERT_TRUE(a.ok && b.ok);
    EXPECT_EQ(a.cert.r_hat, b.cert.r_hat);
    EXPECT_EQ(a.cert.weights, b.cert.weights);
}
