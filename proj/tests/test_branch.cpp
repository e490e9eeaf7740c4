#include <gtest/gtest.h>

#include "properties.hpp"

using namespace hopfval;

namespace {

BranchSetup hopf_setup(const PolyField& f, double nu = 1.1) {
    BranchSetup b;
    b.kind = Kind::hopf;
    b.field = desingularize(tilde(f));
    b.algebraic = equilibrium_map(f);
    b.names = hopf_param_names(f.n_state(), {"mu"});
    b.nu = nu;
    return b;
}

// normal form orbit at the Hopf point: ubar = (cos t, sin t)
PointState normal_form_seed(int K) {
    PointState x(2, 5, K);
    x.seqs[0][1] = x.seqs[0][-1] = 0.5;
    x.seqs[1][1] = cplx(0, -0.5);
    x.seqs[1][-1] = cplx(0, 0.5);
    x.params[0] = 1.0;
    return x;
}

// synthetic extended certificate with prescribed parameter data
Certificate synthetic(double d0, double d1, double dd, double r) {
    std::mt19937_64 g(31);
    auto P = props::make_kind_problems(g, 2);
    Certificate c;
    c.problem = P.ext_plain;
    c.x0 = PointState(6, 6, 2);
    c.x1 = PointState(6, 6, 2);
    const int j = 1, mb = 2;
    c.x0.params[j] = 0.30;
    c.x1.params[j] = 0.31;
    c.x0.params[mb + j] = d0;
    c.x1.params[mb + j] = d1;
    c.x0.params[2 * mb + j] = dd;
    c.x1.params[2 * mb + j] = dd;
    c.weights.assign(12, 1.0);
    c.r_hat = c.r_max = r;
    c.checks.smoothness = true;
    return c;
}

}  // namespace

TEST(Continuation, NormalFormHopfBranchChainsEndpoints) {
    PolyField f = props::normal_form();
    BranchSetup b = hopf_setup(f);
    auto st = initialize_branch(b, normal_form_seed(6), "a", "a", 1);
    BranchOptions o;
    o.h_init = 0.05;
    o.max_steps = 10;
    auto br = continue_branch(b, st, o);
    ASSERT_TRUE(br.ok) << br.stop_reason;
    ASSERT_EQ(br.certs.size(), 10u);
    ASSERT_EQ(br.points.size(), 11u);
    for (size_t i = 0; i + 1 < br.certs.size(); ++i) {
        // equal up to exact zero padding when the mode count grows
        int K = std::max(br.certs[i].x1.K(), br.certs[i + 1].x0.K());
        auto a = br.certs[i].x1.resized(K), c = br.certs[i + 1].x0.resized(K);
        for (int q = 0; q < a.n(); ++q) EXPECT_EQ(a.seqs[q].data(), c.seqs[q].data());
        EXPECT_EQ(a.params, c.params);
    }
    for (size_t i = 0; i + 1 < br.points.size(); ++i) {
        int K = std::max(br.points[i].t.K(), br.points[i + 1].t.K());
        auto t0 = br.points[i].t.resized(K), t1 = br.points[i + 1].t.resized(K);
        EXPECT_GT(pairing(conj_coeffs(t0), t1).real(), 0.0);
    }
    // the branch is the parabola mu = a^2 of the normal form
    for (const auto& p : br.points) {
        double a = p.x.params[1].real(), mu = p.x.params[4].real();
        double amp = std::abs(p.x.seqs[0][1]) * 2.0 * a;
        EXPECT_NEAR(mu, amp * amp, 1e-10);
    }
    // stored endpoints satisfy the Galerkin equations
    for (const auto& c : br.certs) {
        CVec r0 = galerkin_residual(c.problem, c.x0, 0.0), r1 = galerkin_residual(c.problem, c.x1, 1.0);
        EXPECT_LT(r0.cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT(r1.cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Continuation, OrientationFollowsDirection) {
    PolyField f = props::normal_form();
    BranchSetup b = hopf_setup(f);
    auto up = initialize_branch(b, normal_form_seed(4), "a", "a", 1);
    auto down = initialize_branch(b, normal_form_seed(4), "a", "a", -1);
    EXPECT_GT(up.t.params[1].real(), 0.0);
    EXPECT_LT(down.t.params[1].real(), 0.0);
}

TEST(Continuation, ModeCountStaysSmallNearHopf) {
    EXPECT_EQ(adapt_modes(normal_form_seed(5), 5, 1.1, 80, 5), 5);
}

TEST(Bifurcation, SyntheticFoldVerdicts) {
    auto right = check_fold(synthetic(-0.1, 0.1, 1.0, 1e-6), 1);
    ASSERT_TRUE(right.certified) << right.reason;
    EXPECT_EQ(right.direction, Direction::right);
    EXPECT_TRUE(right.value.contains(0.30) && right.value.contains(0.31));
    auto left = check_fold(synthetic(0.1, -0.1, -1.0, 1e-6), 1);
    ASSERT_TRUE(left.certified);
    EXPECT_EQ(left.direction, Direction::left);
    EXPECT_FALSE(check_fold(synthetic(-0.1, 0.1, 1.0, 0.2), 1).certified);
    EXPECT_FALSE(check_fold(synthetic(-0.1, 0.1, -1.0, 1e-6), 1).certified);
}

TEST(Bifurcation, NoFoldCheck) {
    EXPECT_TRUE(check_no_fold(synthetic(0.5, 0.5, 0.0, 1e-3), 1));
    EXPECT_FALSE(check_no_fold(synthetic(-0.1, 0.1, 1.0, 1e-3), 1));
}

TEST(Bifurcation, PlanarNormalFormHopfPoint) {
    PolyField f(2, 2, 1);
    f.add_term(0, Coeff(1), {1, 0}, {1});
    f.add_term(0, Coeff(-1), {0, 1}, {0});
    f.add_term(1, Coeff(1), {1, 0}, {0});
    f.add_term(1, Coeff(1), {0, 1}, {1});
    auto seed = scan_hopf(f, Eigen::VectorXd::Zero(2), -0.5, 0.3, 20);
    ASSERT_TRUE(seed);
    auto hp = locate_hopf_point(f, *seed);
    ASSERT_TRUE(hp.validated) << hp.reason;
    EXPECT_TRUE(hp.Imu.contains(0.0));
    EXPECT_TRUE(hp.Ibeta.contains(1.0));
    for (const auto& y : hp.Iy) EXPECT_TRUE(y.contains(0.0));
    auto cd = eigen_crossing_direction(f, hp);
    ASSERT_TRUE(cd.validated) << cd.reason;
    EXPECT_TRUE(cd.gamma_prime.re.contains(1.0));
    EXPECT_TRUE(cd.gamma_prime.im.contains(0.0));
}

TEST(Bifurcation, LorenzHopfPointLocator) {
    PolyField f = props::lorenz84();
    Eigen::VectorXd y0(4);
    y0 << 1.197556, -0.033525, 0.203229, -0.400337;
    y0 = solve_equilibrium(f, y0, 0.04);
    auto seed = scan_hopf(f, y0, 0.04, 0.07, 60, -1);
    ASSERT_TRUE(seed);
    auto hp = locate_hopf_point(f, *seed);
    ASSERT_TRUE(hp.validated) << hp.reason;
    const double ref[4] = {1.197556, -0.033525, 0.203229, -0.400337};
    for (int i = 0; i < 4; ++i) EXPECT_TRUE(hp.Iy[i].intersects(Interval(ref[i] - 1.6e-4, ref[i] + 1.6e-4))) << i;
    EXPECT_TRUE(hp.Ibeta.intersects(Interval(-0.5300219 - 4.6e-5, -0.5300219 + 4.6e-5)));
}

TEST(Bifurcation, NormalFormHopfVerdictAtZero) {
    PolyField f = props::normal_form();
    BranchSetup b = hopf_setup(f);
    auto st = initialize_branch(b, normal_form_seed(5), "a", "a", 1);
    ExtendedSegmentOptions eo;
    eo.delta = 1e-2;
    auto hr = localize_hopf(b, st, eo);
    ASSERT_TRUE(hr.verdict.certified) << hr.verdict.reason;
    EXPECT_TRUE(hr.verdict.mu.contains(0.0));
    EXPECT_TRUE(hr.verdict.tau.contains(1.0));
    EXPECT_EQ(hr.verdict.direction, Direction::right);
    EXPECT_TRUE(recheck(hr.segment.cert, true).ok());
}
