#include <gtest/gtest.h>

#include "properties.hpp"

using namespace hopfval;

namespace {

struct NormalFormGlue {
    BranchSetup hb, pb;
    GlueResult g1, g2;
    BranchResult hopf_leg, plain_leg;
};

// hopf branch of the normal form, glued to the plain system and back
const NormalFormGlue& normal_form_glue() {
    static NormalFormGlue r = [] {
        NormalFormGlue s;
        PolyField f = props::normal_form();
        s.hb.kind = Kind::hopf;
        s.hb.field = desingularize(tilde(f));
        s.hb.algebraic = equilibrium_map(f);
        s.hb.names = hopf_param_names(2, {"mu"});
        s.hb.nu = 1.1;
        s.pb.field = tilde(f);
        s.pb.names = {"tau", "mu"};
        s.pb.nu = 1.1;
        PointState x(2, 5, 6);
        x.seqs[0][1] = x.seqs[0][-1] = 0.5;
        x.seqs[1][1] = cplx(0, -0.5);
        x.seqs[1][-1] = cplx(0, 0.5);
        x.params[0] = 1.0;
        auto st = initialize_branch(s.hb, x, "a", "a", 1);
        BranchOptions o;
        o.h_init = 0.05;
        o.max_steps = 30;
        o.stop_param = "a";
        o.stop_hi = 0.4;
        s.hopf_leg = continue_branch(s.hb, st, o);
        GlueOptions go;
        go.h = 0.01;
        s.g1 = glue_hopf_to_plain(s.hb, s.pb, s.hopf_leg.points.back(), go);
        if (s.g1.ok) {
            BranchOptions o2;
            o2.h_init = 0.05;
            o2.max_steps = 5;
            s.plain_leg = continue_branch(s.pb, s.g1.next, o2);
            s.g2 = glue_plain_to_hopf(s.pb, s.hb, f, s.plain_leg.points.back(), {0.0, 0.0}, go);
        }
        return s;
    }();
    return r;
}

}  // namespace

TEST(Gluing, InclusionArithmetic) {
    auto g = check_inclusion(0.5, 1.0, 1e-8, 1e-6);
    EXPECT_TRUE(g.ok);
    EXPECT_NEAR(1e-6 - g.margin.mid(), 2.5e-8, 1e-12);
    EXPECT_FALSE(check_inclusion(0.0, 0.0, 1e-6, 1e-6).ok);
    EXPECT_FALSE(check_inclusion(0.5, 1.0, 1e-8, 1e-6, 1e-6).ok);
}

TEST(Gluing, TransformExamples) {
    PointState xb(1, 4, 2);
    xb.seqs[0][1] = xb.seqs[0][-1] = 0.5;
    xb.params[glue_idx::a] = 2.0;
    xb.params[glue_idx::y0] = 3.0;
    xb.params[glue_idx::tau] = 1.5;
    xb.params[glue_idx::mu(1)] = 0.25;
    PointState u = build_glue_target(xb);
    EXPECT_EQ(u.seqs[0][0], cplx(3.0));
    EXPECT_EQ(u.seqs[0][1], cplx(1.0));
    EXPECT_EQ(u.seqs[0][-1], cplx(1.0));
    EXPECT_EQ(u.params[0], cplx(1.5));
    EXPECT_EQ(u.params[1], cplx(0.25));
    xb.params[glue_idx::a] = 1.0;
    xb.params[glue_idx::y0] = 0.0;
    PointState id = build_glue_target(xb);
    EXPECT_EQ(id.seqs[0][1], xb.seqs[0][1]);
    EXPECT_EQ(junction_gap(xb, id, 1.1), 0.0);
}

TEST(Gluing, PhaseTransformBilinearity) {
    std::mt19937_64 g(41);
    for (int c = 0; c < 5; ++c) {
        PointState q = props::random_state(g, 2, 2, 4, true);
        PointState xb = props::random_state(g, 2, 5, 4, true);
        double a = xb.params[glue_idx::a].real();
        IState qp = build_phase(q).phi0;
        IState qb = transform_phase(qp, a);
        CInterval lhs = pairing(qb, to_interval(xb));
        CInterval rhs = pairing(qp, to_interval(build_glue_target(xb)));
        EXPECT_TRUE(lhs.intersects(rhs));
    }
}

TEST(Gluing, NormalFormBothDirections) {
    const auto& s = normal_form_glue();
    ASSERT_TRUE(s.g1.ok) << s.g1.failure;
    ASSERT_TRUE(s.g2.ok) << s.g2.failure;
    EXPECT_TRUE(s.g1.record.ok);
    EXPECT_TRUE(s.g2.record.ok);
    EXPECT_GT(s.g1.record.margin.lo(), 0.0);
    EXPECT_TRUE(recheck(s.g1.hopf_cert, true).ok());
    EXPECT_TRUE(recheck(s.g1.plain_cert, true).ok());
    EXPECT_TRUE(recheck(s.g2.hopf_cert, true).ok());
    EXPECT_TRUE(recheck(s.g2.plain_cert, true).ok());
}

TEST(Properties, GlueMonteCarloSubsumption) {
    const auto& s = normal_form_glue();
    ASSERT_TRUE(s.g1.ok && s.g2.ok);
    auto r1 = props::glue_monte_carlo(s.g1.hopf_cert, s.g1.plain_cert, true, true, 7, 2000);
    EXPECT_TRUE(r1.ok) << r1.detail;
    auto r2 = props::glue_monte_carlo(s.g2.hopf_cert, s.g2.plain_cert, false, false, 8, 2000);
    EXPECT_TRUE(r2.ok) << r2.detail;
}
