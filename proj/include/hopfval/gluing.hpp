#pragma once

#include "bifurcation.hpp"

namespace hopfval {

// Index helpers for the hopf parameter layout (tau, a, y_1..y_n, mu).
namespace glue_idx {
constexpr int tau = 0, a = 1, y0 = 2;
inline int mu(int n) { return 2 + n; }
}  // namespace glue_idx

// u = y + a ubar on Fourier coefficients: every mode scaled by a, y added to
// mode 0; (tau, mu) carried over.
inline PointState build_glue_target(const PointState& xbar) {
    const int n = xbar.n();
    if (xbar.m() != 3 + n) throw std::invalid_argument("glue target needs a hopf-kind point");
    double a = xbar.params[glue_idx::a].real();
    if (!(std::fabs(a) > 0.0)) throw std::invalid_argument("cannot glue at zero amplitude");
    PointState x(n, 2, xbar.K());
    for (int i = 0; i < n; ++i) {
        x.seqs[i] = xbar.seqs[i].scaled(cplx(a));
        x.seqs[i][0] += xbar.params[glue_idx::y0 + i];
    }
    x.params[0] = xbar.params[glue_idx::tau];
    x.params[1] = xbar.params[glue_idx::mu(n)];
    x.labels = {"tau", "mu"};
    return conj_sym_project(x);
}

// Inverse transformation given the equilibrium y: ubar = (u - y) / a with a
// chosen so that ubar has unit amplitude; `sign` selects the sign of a.
inline PointState hopf_from_plain(const PointState& x, const std::vector<double>& y, int sign = 1) {
    const int n = x.n();
    PointState xb(n, 3 + n, x.K());
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        for (int k = -x.K(); k <= x.K(); ++k) s += double(k) * k * std::norm(x.seqs[i][k]);
    double a = (sign < 0 ? -1.0 : 1.0) * std::sqrt(s);
    if (!(a != 0.0)) throw std::invalid_argument("cannot glue a constant profile");
    for (int i = 0; i < n; ++i) {
        xb.seqs[i] = x.seqs[i];
        xb.seqs[i][0] -= y.at(i);
        xb.seqs[i] = xb.seqs[i].scaled(cplx(1.0 / a));
        xb.params[glue_idx::y0 + i] = y[i];
    }
    xb.params[glue_idx::tau] = x.params[0];
    xb.params[glue_idx::a] = a;
    xb.params[glue_idx::mu(n)] = x.params[1];
    return conj_sym_project(xb);
}

// Phase vector for the hopf side: qbar_v = a q_v, zero parameter part.
inline IState transform_phase(const IState& q_plain, double a) {
    const int n = q_plain.n();
    for (int i = 0; i < n; ++i)
        if (!q_plain.seqs[i][0].contains_zero() || q_plain.seqs[i][0].mag() != 0.0)
            throw std::invalid_argument("phase vector must vanish on mode 0");
    IState q(n, 3 + n, q_plain.K());
    for (int i = 0; i < n; ++i) q.seqs[i] = q_plain.seqs[i].scaled(CInterval(a));
    return q;
}

// Parameter continuation vectors (0, (q_tau, q_mu)) and (0, (q_tau, 0, 0, q_mu)).
inline std::pair<PointState, PointState> build_param_continuation(double q_tau, double q_mu, int n, int K) {
    if (q_tau == 0.0 && q_mu == 0.0) throw std::invalid_argument("parameter continuation vector is zero");
    PointState qp(n, 2, K), qh(n, 3 + n, K);
    qp.params[0] = q_tau;
    qp.params[1] = q_mu;
    qh.params[glue_idx::tau] = q_tau;
    qh.params[glue_idx::mu(n)] = q_mu;
    return {qp, qh};
}

struct GlueRecord {
    std::string hopf_id, plain_id;
    double a = 0.0, vbar_norm = 0.0;
    double r_hopf = 0.0, r_plain = 0.0;
    double gap = 0.0;  // distance between the transformed hopf centre and the plain centre
    Interval margin{0.0};
    bool ok = false;
};

// (1 + |a| + max_j ||vbar_j|| + r1) r1 + gap < r0
inline GlueRecord check_inclusion(double a, double vbar_norm, double r1, double r0, double gap = 0.0) {
    GlueRecord g;
    g.a = a;
    g.vbar_norm = vbar_norm;
    g.r_hopf = r1;
    g.r_plain = r0;
    g.gap = gap;
    Interval lhs = (Interval(1.0) + abs(Interval(a)) + Interval(vbar_norm) + Interval(r1)) * Interval(r1) + Interval(gap);
    g.margin = Interval(r0) - lhs;
    g.ok = g.margin.lo() > 0.0;
    return g;
}

// Upper bound, in the plain X-norm, on |T(xbar) - x| with T(xbar) = y + a ubar
// evaluated in interval arithmetic; absorbs the rounding of the junction.
inline double junction_gap(const PointState& xbar, const PointState& x, double nu) {
    const int n = xbar.n();
    if (x.n() != n || xbar.m() != 3 + n || x.m() != 2) throw std::invalid_argument("junction_gap: dimension mismatch");
    const int K = std::max(xbar.K(), x.K());
    NuWeights w(nu, K);
    CInterval a(Interval(xbar.params[glue_idx::a].real()));
    double gap = 0.0;
    for (int i = 0; i < n; ++i) {
        FourierSeq<CInterval> d(K);
        for (int k = -K; k <= K; ++k) {
            CInterval t = CInterval(xbar.seqs[i].at(k)) * a - CInterval(x.seqs[i].at(k));
            if (k == 0) t += CInterval(xbar.params[glue_idx::y0 + i]);
            d[k] = t;
        }
        gap = std::max(gap, nu_norm(d, w).hi());
    }
    gap = std::max(gap, (CInterval(xbar.params[glue_idx::tau]) - CInterval(x.params[0])).mag());
    gap = std::max(gap, (CInterval(xbar.params[glue_idx::mu(n)]) - CInterval(x.params[1])).mag());
    return gap;
}

inline double max_seq_norm(const PointState& x, double nu) {
    IState xi = to_interval(x);
    NuWeights w(nu, x.K());
    double m = 0.0;
    for (const auto& s : xi.seqs) m = std::max(m, nu_norm(s, w).hi());
    return m;
}

struct GlueOptions {
    double h = 1e-3;  // step on each side of the junction
    int max_halvings = 10;
    ValidatorOptions validator;
    NewtonOptions newton;
    std::function<void(const std::string&)> log;
};

struct GlueResult {
    bool ok = false;
    Certificate hopf_cert, plain_cert;
    GlueRecord record;
    BranchPoint next;  // where continuation resumes on the far side
    std::string failure;
};

namespace detail {

inline GenPhase interpolated_phase(const IState& q0, const IState& q1) {
    GenPhase g;
    g.phi0 = q0;
    g.phi1 = q1;
    g.psi0 = g.psi1 = Interval(0.0);
    g.phi0_equals_phi1 = false;
    g.role = "phase";
    return g;
}

inline IState phase_vector(const PointState& x) { return build_phase(x).phi0; }

inline IState scaled_like(const IState& q, const IState& ref, double nu) {
    double a = 0.0, b = 0.0;
    for (size_t i = 0; i < q.seqs.size(); ++i) {
        NuWeights w(nu, q.K());
        a = std::max(a, nu_norm(q.seqs[i], w).mid());
        b = std::max(b, nu_norm(ref.seqs[i], w).mid());
    }
    return a > 0.0 ? q.scaled(CInterval(b / a)) : q;
}

// unit parameter-continuation direction from the (tau, mu) part of a tangent
inline std::pair<double, double> param_dir(double t_tau, double t_mu) {
    double nrm = std::hypot(t_tau, t_mu);
    if (!(nrm > 0.0)) throw std::invalid_argument("tangent has no (tau, mu) component at the junction");
    return {t_tau / nrm, t_mu / nrm};
}

inline ProblemDef fixed_problem(const BranchSetup& b, const IState& phase, const GenPhase& cont, const PointState* amp_from, int K) {
    GenPhase ph = make_fixed_phase(phase, Interval(0.0), "phase");
    if (b.kind == Kind::hopf) {
        GenPhase amp = build_amplitude(*amp_from);
        return make_problem(b, ph, &amp, cont, K);
    }
    return make_problem(b, ph, nullptr, cont, K);
}

}  // namespace detail

// Hopf-side branch ending at `P` glued to a new plain branch.
inline GlueResult glue_hopf_to_plain(const BranchSetup& hb, const BranchSetup& pb, const BranchPoint& P, const GlueOptions& opt) {
    GlueResult out;
    auto log = [&](const std::string& s) {
        if (opt.log) opt.log(s);
    };
    const int n = P.x.n(), K = P.x.K();
    auto [qt, qm] = detail::param_dir(P.t.params[glue_idx::tau].real(), P.t.params[glue_idx::mu(n)].real());
    double speed = std::hypot(P.t.params[glue_idx::tau].real(), P.t.params[glue_idx::mu(n)].real());
    auto [qp, qh] = build_param_continuation(qt, qm, n, K);
    double h = opt.h;
    for (int attempt = 0; attempt <= opt.max_halvings; ++attempt, h *= 0.5) {
        try {
            // hopf side: P -> xb1 in parameter continuation
            PointState guess = P.x + P.t.scaled(cplx(h));
            double psi = pairing(qh, P.x).real() + h * speed;
            PointState target = P.x;
            {
                // any point with <qh, target> = psi
                target.params[glue_idx::tau] += qt * (psi - pairing(qh, P.x).real());
                target.params[glue_idx::mu(n)] += qm * (psi - pairing(qh, P.x).real());
            }
            GenPhase ch = build_continuation(qh, qh, target, target);
            ProblemDef pc = detail::fixed_problem(hb, detail::phase_vector(P.x), ch, &P.x, K);
            PointState xb1 = normalize_amplitude(newton_refine(pc, guess, 0.0, opt.newton));
            double a1 = xb1.params[glue_idx::a].real();

            // plain side: x0 = transform(xb1) -> x0p
            PointState x0 = build_glue_target(xb1);
            PointState tgt = x0;
            tgt.params[0] += qt * h * speed;
            tgt.params[1] += qm * h * speed;
            GenPhase cp = build_continuation(qp, qp, tgt, tgt);
            ProblemDef pp = detail::fixed_problem(pb, detail::phase_vector(x0), cp, nullptr, K);
            GenPhase cp0 = build_continuation(qp, qp, x0, x0);
            ProblemDef pp0 = detail::fixed_problem(pb, detail::phase_vector(x0), cp0, nullptr, K);
            PointState t0 = predict_tangent(pp0, x0, 0.0);
            if (pairing(qp, t0).real() < 0.0) t0 = t0.scaled(cplx(-1.0));
            PointState x0p = newton_refine(pp, x0 + t0.scaled(cplx(h)), 0.0, opt.newton);

            // plain glue segment: phase q0 from the midpoint, parameter continuation
            PointState mid = (x0 + x0p).scaled(cplx(0.5));
            IState q0 = detail::phase_vector(mid);
            ProblemDef pseg = detail::fixed_problem(pb, q0, build_continuation(qp, qp, x0, x0p), nullptr, K);
            auto vp = validate_segment(pseg, x0, x0p, opt.validator);
            if (!vp.ok) throw std::runtime_error("plain glue segment: " + vp.failure);

            // hopf glue segment: phase moves to a1 q0 at the junction
            IState q1 = transform_phase(q0, a1);
            IState qP = detail::scaled_like(detail::phase_vector(P.x), q1, hb.nu);
            PointState hm = (P.x + xb1).scaled(cplx(0.5));
            GenPhase amp = build_amplitude(hm);
            ProblemDef hseg = make_problem(hb, detail::interpolated_phase(qP, q1), &amp, build_continuation(qh, qh, P.x, xb1), K);
            auto vh = validate_segment(hseg, P.x, xb1, opt.validator);
            if (!vh.ok) throw std::runtime_error("hopf glue segment: " + vh.failure);

            out.hopf_cert = std::move(vh.cert);
            out.plain_cert = std::move(vp.cert);
            out.hopf_cert.id = "glue_hopf";
            out.plain_cert.id = "glue_plain";
            out.record = check_inclusion(a1, max_seq_norm(xb1, hb.nu), out.hopf_cert.r_hat, out.plain_cert.r_max,
                                         junction_gap(xb1, x0, pb.nu));
            out.record.hopf_id = out.hopf_cert.id;
            out.record.plain_id = out.plain_cert.id;
            if (!out.record.ok) throw std::runtime_error("ball inclusion not verified");
            if (!out.hopf_cert.checks.smoothness || !out.plain_cert.checks.smoothness)
                throw std::runtime_error("smoothness check failed on a glue segment");

            // tangent for resuming pseudo-arclength continuation at x0p
            ProblemDef pnext = corrector_problem(pb, x0p, t0, 0.0, K);
            out.next = {x0p, predict_tangent(pnext, x0p, 0.0, &t0)};
            out.ok = true;
            return out;
        } catch (const std::exception& e) {
            out.failure = e.what();
            log("glue at h=" + std::to_string(h) + " failed: " + out.failure);
        }
    }
    return out;
}

// Plain branch ending at `P` glued to a new hopf-kind branch; `y_guess` is
// the equilibrium near which the orbit shrinks.
inline GlueResult glue_plain_to_hopf(const BranchSetup& pb, const BranchSetup& hb, const PolyField& f, const BranchPoint& P,
                                     const std::vector<double>& y_guess, const GlueOptions& opt) {
    GlueResult out;
    auto log = [&](const std::string& s) {
        if (opt.log) opt.log(s);
    };
    const int n = P.x.n(), K = P.x.K();
    auto [qt, qm] = detail::param_dir(P.t.params[0].real(), P.t.params[1].real());
    double speed = std::hypot(P.t.params[0].real(), P.t.params[1].real());
    auto [qp, qh] = build_param_continuation(qt, qm, n, K);
    double h = opt.h;
    for (int attempt = 0; attempt <= opt.max_halvings; ++attempt, h *= 0.5) {
        try {
            // plain side: P -> x1 in parameter continuation
            PointState tgt = P.x;
            tgt.params[0] += qt * h * speed;
            tgt.params[1] += qm * h * speed;
            ProblemDef pc = detail::fixed_problem(pb, detail::phase_vector(P.x), build_continuation(qp, qp, tgt, tgt), nullptr, K);
            PointState x1 = newton_refine(pc, P.x + P.t.scaled(cplx(h)), 0.0, opt.newton);

            // equilibrium at the junction parameter, then the hopf-side point
            Eigen::VectorXd yg = Eigen::Map<const Eigen::VectorXd>(y_guess.data(), n);
            Eigen::VectorXd ye = solve_equilibrium(f, yg, x1.params[1].real());
            std::vector<double> y(ye.data(), ye.data() + n);
            PointState xb0 = hopf_from_plain(x1, y, 1);
            double a0 = xb0.params[glue_idx::a].real();

            // plain glue segment: phase moves to q1 at the junction; x1 pairs
            // to zero with its own phase vector
            IState q1 = detail::phase_vector(x1);
            IState qP = detail::scaled_like(detail::phase_vector(P.x), q1, pb.nu);
            ProblemDef pseg = make_problem(pb, detail::interpolated_phase(qP, q1), nullptr, build_continuation(qp, qp, P.x, x1), K);
            auto vp = validate_segment(pseg, P.x, x1, opt.validator);
            if (!vp.ok) throw std::runtime_error("plain glue segment: " + vp.failure);

            // hopf side: xb0 -> xb0p with phase a0 q1 held fixed over the segment
            IState qb = transform_phase(q1, a0);
            PointState htgt = xb0;
            htgt.params[glue_idx::tau] += qt * h * speed;
            htgt.params[glue_idx::mu(n)] += qm * h * speed;
            GenPhase ch = build_continuation(qh, qh, htgt, htgt);
            ProblemDef hc = detail::fixed_problem(hb, detail::phase_vector(xb0), ch, &xb0, K);
            ProblemDef hc0 = detail::fixed_problem(hb, detail::phase_vector(xb0), build_continuation(qh, qh, xb0, xb0), &xb0, K);
            PointState tb = predict_tangent(hc0, xb0, 0.0);
            if (pairing(qh, tb).real() < 0.0) tb = tb.scaled(cplx(-1.0));
            PointState xb0p = normalize_amplitude(newton_refine(hc, xb0 + tb.scaled(cplx(h)), 0.0, opt.newton));
            // the hopf segment's phase at s=0 must be exactly a0 q1; at s=1 the
            // midpoint-free choice conj(iK xb0p) rescaled
            IState qe = detail::scaled_like(detail::phase_vector(xb0p), qb, hb.nu);
            PointState bm = (xb0 + xb0p).scaled(cplx(0.5));
            GenPhase amp = build_amplitude(bm);
            ProblemDef hseg = make_problem(hb, detail::interpolated_phase(qb, qe), &amp, build_continuation(qh, qh, xb0, xb0p), K);
            auto vh = validate_segment(hseg, xb0, xb0p, opt.validator);
            if (!vh.ok) throw std::runtime_error("hopf glue segment: " + vh.failure);

            out.hopf_cert = std::move(vh.cert);
            out.plain_cert = std::move(vp.cert);
            out.hopf_cert.id = "glue_hopf";
            out.plain_cert.id = "glue_plain";
            out.record = check_inclusion(a0, max_seq_norm(xb0, hb.nu), out.hopf_cert.r_hat, out.plain_cert.r_max,
                                         junction_gap(xb0, x1, pb.nu));
            out.record.hopf_id = out.hopf_cert.id;
            out.record.plain_id = out.plain_cert.id;
            if (!out.record.ok) throw std::runtime_error("ball inclusion not verified");
            if (!out.hopf_cert.checks.smoothness || !out.plain_cert.checks.smoothness)
                throw std::runtime_error("smoothness check failed on a glue segment");
            ProblemDef hnext = corrector_problem(hb, xb0p, tb, 0.0, K);
            out.next = {xb0p, predict_tangent(hnext, xb0p, 0.0, &tb)};
            out.ok = true;
            return out;
        } catch (const std::exception& e) {
            out.failure = e.what();
            log("glue at h=" + std::to_string(h) + " failed: " + out.failure);
        }
    }
    return out;
}

}  // namespace hopfval
