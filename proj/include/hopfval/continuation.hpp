#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "validator.hpp"

namespace hopfval {

struct NewtonFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NewtonOptions {
    double tol = 1e-12;
    int max_iter = 30;
};

inline double sup_norm(const CVec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Floating-point Newton on the Galerkin projection; result conjugate-symmetric.
inline PointState newton_refine(const ProblemDef& p, PointState x, double s, const NewtonOptions& opt = {}, int* iterations = nullptr) {
    const Layout& L = p.layout();
    x = conj_sym_project(x.resized(p.K()));
    double res = sup_norm(galerkin_residual(p, x, s));
    int it = 0;
    for (; it < opt.max_iter && res >= opt.tol; ++it) {
        CVec r = galerkin_residual(p, x, s);
        CMat J = galerkin_jacobian(p, x, s);
        CVec dx = J.partialPivLu().solve(r);
        if (!dx.allFinite()) throw NewtonFailure("Newton step is not finite (singular Jacobian)");
        PointState xn = conj_sym_project(L.unpack(L.pack(x) - dx, x));
        double rn = sup_norm(galerkin_residual(p, xn, s));
        double xs = sup_norm(L.pack(xn));
        x = std::move(xn);
        // rounding-level stagnation counts as converged when close to tol
        if (rn >= res && sup_norm(dx) < 1e-14 * (1.0 + xs) && rn < 1e3 * opt.tol) {
            res = rn;
            ++it;
            break;
        }
        res = rn;
    }
    if (iterations) *iterations = it;
    if (!(res < opt.tol) && !(res < 1e3 * opt.tol && it > 0))
        throw NewtonFailure("Newton did not converge: residual " + std::to_string(res) + " after " + std::to_string(it) + " iterations");
    return x;
}

// Unit kernel vector of the Jacobian with the continuation row removed.
// Oriented by positive pairing with `prev` when given; otherwise the
// parameter direction giving the best conditioned bordering is used.
inline PointState predict_tangent(const ProblemDef& p, const PointState& x, double s, const PointState* prev = nullptr,
                                  const std::vector<double>& weights = {}) {
    const Layout& L = p.layout();
    int ci = p.phase_index("continuation");
    int row = -1;
    for (int e = 0; e < p.m(); ++e)
        if (p.order()[e].type == ScalarEq::Type::phase && p.order()[e].index == ci) row = L.param(e);
    if (row < 0) throw std::invalid_argument("problem has no continuation equation");
    CMat J = galerkin_jacobian(p, x, s);
    CVec rhs = CVec::Zero(L.size());
    rhs(row) = 1.0;
    std::vector<CVec> borders;
    if (prev) {
        borders.push_back(L.pack(conj_coeffs(prev->resized(p.K()))));
    } else {
        for (int j = 0; j < p.m(); ++j) {
            CVec b = CVec::Zero(L.size());
            b(L.param(j)) = 1.0;
            borders.push_back(b);
        }
    }
    double best = -1.0;
    CVec sol;
    for (const auto& b : borders) {
        CMat Jb = J;
        Jb.row(row) = b.transpose();
        Eigen::PartialPivLU<CMat> lu(Jb);
        double rc = lu.rcond();
        if (rc > best) {
            CVec v = lu.solve(rhs);
            // rcond is only an estimate; exactly singular borders show up here
            if (!v.allFinite() || (Jb * v - rhs).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + v.cwiseAbs().maxCoeff())) continue;
            best = rc;
            sol = std::move(v);
        }
    }
    if (!(best > 1e-13)) throw NewtonFailure("tangent kernel is not one dimensional (bordered rcond " + std::to_string(best) + ")");
    PointState t = conj_sym_project(L.unpack(sol, x));
    double nrm = x_norm(t, p.nu(), weights);
    t = t.scaled(cplx(1.0 / nrm));
    if (prev && pairing(conj_coeffs(prev->resized(p.K())), t).real() < 0.0) t = t.scaled(cplx(-1.0));
    return t;
}

// 25% mode growth when the top 20% of modes carry more than 1e-12 of the
// nu-mass, 25% shrink below 1e-20.
inline int adapt_modes(const PointState& x, int K, double nu, int K_cap, int K_min = 1) {
    double top = 0.0, all = 0.0;
    NuWeights w(nu, K);
    int cut = static_cast<int>(std::floor(0.8 * K));
    for (const auto& s : x.seqs)
        for (int k = -s.K(); k <= s.K(); ++k) {
            double a = std::abs(s[k]) * w(k).mid();
            all += a;
            if (std::abs(k) > cut) top += a;
        }
    if (all == 0.0) return K;
    double rel = top / all;
    int Kn = K;
    if (rel > 1e-12)
        Kn = static_cast<int>(std::ceil(1.25 * K));
    else if (rel < 1e-20)
        Kn = std::max(K_min, static_cast<int>(std::floor(K / 1.25)));
    if (Kn > K_cap) throw std::runtime_error("mode count would exceed cap K=" + std::to_string(K_cap));
    return Kn;
}

// Describes how segment problems are assembled along a branch.
struct BranchSetup {
    Kind kind = Kind::plain;           // plain or hopf
    PolyField field;                   // f~ or f-bar
    PolyField algebraic;               // g (hopf only)
    std::vector<std::string> names;    // parameter names
    double nu = 1.0;
    std::string monitor = "mu";        // fold monitoring parameter
};

inline ProblemDef make_problem(const BranchSetup& b, const GenPhase& phase, const GenPhase* amp, const GenPhase& cont, int K) {
    if (b.kind == Kind::plain) return make_plain(b.field, phase, cont, K, b.nu, b.names);
    if (b.kind == Kind::hopf) return make_hopf(b.field, b.algebraic, phase, *amp, cont, K, b.nu, b.names);
    throw std::invalid_argument("branch setup kind must be plain or hopf");
}

// Segment problem: midpoint phase (and amplitude), s-dependent continuation.
inline ProblemDef segment_problem(const BranchSetup& b, const PointState& x0, const PointState& x1, const PointState& t0,
                                  const PointState& t1, int K) {
    PointState mid = (x0.resized(K) + x1.resized(K)).scaled(cplx(0.5));
    GenPhase ph = build_phase(mid);
    GenPhase cont = build_continuation(conj_coeffs(t0.resized(K)), conj_coeffs(t1.resized(K)), x0.resized(K), x1.resized(K));
    if (b.kind == Kind::hopf) {
        GenPhase amp = build_amplitude(mid);
        return make_problem(b, ph, &amp, cont, K);
    }
    return make_problem(b, ph, nullptr, cont, K);
}

// Corrector problem for the point at pseudo-arclength h from x0 along t0;
// its phase vector conj(iK v0) makes the later midpoint phase exact at both
// endpoints (the form <conj(iK a), b> is antisymmetric on real data).
inline ProblemDef corrector_problem(const BranchSetup& b, const PointState& x0, const PointState& t0, double h, int K) {
    PointState xr = x0.resized(K), tr = t0.resized(K);
    PointState target = xr + tr.scaled(cplx(h));
    GenPhase ph = build_phase(xr);
    GenPhase cont = build_continuation(conj_coeffs(tr), conj_coeffs(tr), target, target);
    if (b.kind == Kind::hopf) {
        GenPhase amp = build_amplitude(xr);
        return make_problem(b, ph, &amp, cont, K);
    }
    return make_problem(b, ph, nullptr, cont, K);
}

// Hopf kind: rescale (ubar, a) -> (theta ubar, a / theta) so that
// sum k^2 |v_k|^2 = 1.  This is a symmetry of the desingularized system.
inline PointState normalize_amplitude(PointState x) {
    double s = 0.0;
    for (const auto& q : x.seqs)
        for (int k = -q.K(); k <= q.K(); ++k) s += double(k) * k * std::norm(q[k]);
    if (!(s > 0.0)) throw std::invalid_argument("cannot normalize a constant profile");
    double th = 1.0 / std::sqrt(s);
    for (auto& q : x.seqs) q = q.scaled(cplx(th));
    x.params[1] /= th;
    return conj_sym_project(x);
}

struct BranchPoint {
    PointState x, t;  // point and unit tangent
};

// Unit vector along a named parameter.
inline PointState param_direction(const PointState& like, int j) {
    PointState e = like.scaled(cplx(0.0));
    e.params.at(j) = 1.0;
    return e;
}

// Refines a guess with the named parameter held fixed and returns it with a
// unit tangent whose `orient` component has sign `direction` (if nonzero).
inline BranchPoint initialize_branch(const BranchSetup& b, const PointState& guess, const std::string& fixed,
                                     const std::string& orient, int direction, const NewtonOptions& nopt = {}) {
    int j = -1, o = -1;
    for (size_t i = 0; i < b.names.size(); ++i) {
        if (b.names[i] == fixed) j = static_cast<int>(i);
        if (b.names[i] == orient) o = static_cast<int>(i);
    }
    if (j < 0) throw std::invalid_argument("unknown parameter '" + fixed + "'");
    PointState g = conj_sym_project(guess);
    int K = g.K();
    PointState e = param_direction(g, j);
    GenPhase ph = build_phase(g);
    GenPhase cont = build_continuation(e, e, g, g);
    ProblemDef p;
    if (b.kind == Kind::hopf) {
        g = normalize_amplitude(g);
        GenPhase amp = build_amplitude(g);
        p = make_problem(b, ph, &amp, cont, K);
    } else {
        p = make_problem(b, ph, nullptr, cont, K);
    }
    PointState x = newton_refine(p, g, 0.0, nopt);
    if (b.kind == Kind::hopf) x = normalize_amplitude(x);
    PointState t = predict_tangent(p, x, 0.0);
    if (o >= 0 && direction != 0 && (t.params[o].real() > 0.0) != (direction > 0)) t = t.scaled(cplx(-1.0));
    return {x, t};
}

struct BranchOptions {
    double h_init = 1e-3, h_min = 1e-10, h_max = 1e-1;
    int max_steps = 100;
    int K_cap = 80, K_min = 3;
    bool adapt_K = true;
    // stop when the named parameter leaves [lo, hi]
    std::string stop_param;
    double stop_lo = -1e300, stop_hi = 1e300;
    bool stop_at_fold = false;
    ValidatorOptions validator;
    NewtonOptions newton;
    std::function<void(const std::string&)> log;
    // forces the first / last segment's continuation vectors (glue mode)
    std::optional<PointState> first_t0;
    std::function<bool(const BranchPoint&)> stop_predicate;
};

struct BranchResult {
    std::vector<Certificate> certs;
    std::vector<BranchPoint> points;  // points.size() == certs.size() + 1
    std::vector<int> fold_segments;   // segments where the monitored tangent component changes sign
    std::string stop_reason;
    bool ok = false;
};

inline double param_value(const PointState& x, const std::vector<std::string>& names, const std::string& name) {
    for (size_t j = 0; j < names.size(); ++j)
        if (names[j] == name) return x.params[j].real();
    throw std::invalid_argument("unknown parameter '" + name + "'");
}

// One predictor-corrector-validate step from `a`; returns nullopt on failure.
struct StepResult {
    BranchPoint end;
    Certificate cert;
};

// Set when a failed validation is limited by the linear part (Z1 >= 1/2 on
// some component), which a smaller step cannot repair but more modes can.
struct StepFailure {
    std::string why;
    bool needs_modes = false;
};

inline std::optional<StepResult> branch_step(const BranchSetup& b, const BranchPoint& a, double h, const BranchOptions& opt,
                                             StepFailure* fail = nullptr, int K_min = 0) {
    int K = std::max(a.x.K(), K_min);
    std::string* why = fail ? &fail->why : nullptr;
    try {
        ProblemDef pc = corrector_problem(b, a.x, a.t, h, K);
        PointState guess = a.x + a.t.scaled(cplx(h));
        PointState x1 = newton_refine(pc, guess, 0.0, opt.newton);
        if (b.kind == Kind::hopf) x1 = normalize_amplitude(x1);
        if (opt.adapt_K) {
            int Kn = adapt_modes(x1, K, b.nu, opt.K_cap, opt.K_min);
            if (Kn > K) {
                K = Kn;
                pc = corrector_problem(b, a.x, a.t, h, K);
                x1 = newton_refine(pc, x1.resized(K), 0.0, opt.newton);
                if (b.kind == Kind::hopf) x1 = normalize_amplitude(x1);
            }
        }
        PointState t1 = predict_tangent(pc, x1, 0.0, &a.t);
        ProblemDef ps = segment_problem(b, a.x, x1, a.t, t1, K);
        auto out = validate_segment(ps, a.x.resized(K), x1, opt.validator);
        if (!out.ok) {
            if (why) *why = out.failure;
            if (fail)
                for (const auto& z : out.last_bounds.Z)
                    if (z.size() > 1 && z[1] >= 0.5) fail->needs_modes = true;
            return std::nullopt;
        }
        if (!out.cert.checks.smoothness || !out.cert.checks.phase_shift) {
            if (why) *why = "smoothness or phase-shift check failed";
            return std::nullopt;
        }
        return StepResult{{x1, t1.resized(K)}, std::move(out.cert)};
    } catch (const std::exception& e) {
        if (why) *why = e.what();
        return std::nullopt;
    }
}

inline BranchResult continue_branch(const BranchSetup& b, BranchPoint start, const BranchOptions& opt) {
    BranchResult res;
    auto log = [&](const std::string& s) {
        if (opt.log) opt.log(s);
    };
    res.points.push_back(start);
    double h = opt.h_init;
    int streak = 0;
    int K = start.x.K();
    int mon = -1;
    for (size_t j = 0; j < b.names.size(); ++j)
        if (b.names[j] == b.monitor) mon = static_cast<int>(j);
    for (int step = 0; step < opt.max_steps; ++step) {
        const BranchPoint& a = res.points.back();
        if (!opt.stop_param.empty()) {
            double v = param_value(a.x, b.names, opt.stop_param);
            if (v < opt.stop_lo || v > opt.stop_hi) {
                res.stop_reason = "parameter " + opt.stop_param + " left the requested range";
                res.ok = true;
                return res;
            }
        }
        if (opt.stop_predicate && opt.stop_predicate(a)) {
            res.stop_reason = "stop criterion met";
            res.ok = true;
            return res;
        }
        std::optional<StepResult> st;
        StepFailure fail;
        while (!(st = branch_step(b, a, h, opt, &fail, K))) {
            const std::string why = fail.why;
            log("step " + std::to_string(step) + " failed at h=" + std::to_string(h) + " K=" + std::to_string(K) + ": " + why);
            if (fail.needs_modes && opt.adapt_K) {
                int Kn = static_cast<int>(std::ceil(1.25 * K));
                if (Kn <= opt.K_cap) {
                    K = Kn;
                    fail = {};
                    continue;
                }
            }
            fail = {};
            h *= 0.5;
            streak = 0;
            if (h < opt.h_min) {
                res.stop_reason = "step size underflow: " + why;
                return res;
            }
        }
        st->cert.id = "seg" + std::to_string(res.certs.size());
        log("step " + std::to_string(step) + " h=" + std::to_string(h) + " K=" + std::to_string(st->end.x.K()) +
            " r=" + std::to_string(st->cert.r_hat));
        if (mon >= 0 && (a.t.params[mon].real() > 0.0) != (st->end.t.params[mon].real() > 0.0))
            res.fold_segments.push_back(static_cast<int>(res.certs.size()));
        K = st->end.x.K();
        res.certs.push_back(std::move(st->cert));
        res.points.push_back(std::move(st->end));
        if (++streak >= 3) {
            h = std::min(h * 1.3, opt.h_max);
            streak = 0;
        }
        if (opt.stop_at_fold && !res.fold_segments.empty()) {
            res.stop_reason = "fold detected";
            res.ok = true;
            return res;
        }
    }
    res.stop_reason = "step budget exhausted";
    res.ok = true;
    return res;
}

// Norm scale factors (1, h, h^2) and their inverse for reading derivative
// blocks of an extended certificate.
struct BlockScale {
    double h = 1.0;
    std::vector<double> weights(const ProblemDef& p) const { return block_weights(p, h); }
    // radius of component j of an extended certificate in unscaled units
    static double radius(const Certificate& c, int comp) { return rnd::mul_up(c.r_hat, c.weights[comp]); }
};

inline BlockScale scale_blocks(double h) {
    if (!(h > 0.0)) throw std::invalid_argument("block scale h must be positive");
    return BlockScale{h};
}

}  // namespace hopfval
