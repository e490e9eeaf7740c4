#pragma once

#include <Eigen/Eigenvalues>
#include <optional>

#include "continuation.hpp"

namespace hopfval {

enum class Direction { right, left };
inline const char* direction_name(Direction d) { return d == Direction::right ? "right" : "left"; }

struct FoldVerdict {
    bool certified = false;
    int param = -1;
    std::string param_name;
    Direction direction = Direction::right;
    Interval value{0.0};  // lambda_j at the fold
    std::string source;
    std::string reason;
};

struct HopfVerdict {
    bool certified = false;
    bool a_crossing = false;
    Direction direction = Direction::right;
    Interval mu{0.0}, tau{0.0};
    std::vector<Interval> y;
    std::string source;
    std::string reason;
};

namespace detail {

// Endpoint data of an extended certificate in the unscaled frame.
struct ExtParam {
    double v0, v1, d0, d1, dd0, dd1;  // lambda, lambda', lambda'' at s = 0, 1
    double r0, r1, r2;                // radii per block
};

inline ExtParam ext_param(const Certificate& c, int j) {
    const ProblemDef& p = c.problem;
    if (!is_extended(p.kind())) throw std::invalid_argument("bifurcation checks need an extended certificate");
    int mb = p.m() / 3, n = p.n();
    if (j < 0 || j >= mb) throw std::invalid_argument("parameter index out of range");
    ExtParam e;
    e.v0 = c.x0.params[j].real();
    e.v1 = c.x1.params[j].real();
    e.d0 = c.x0.params[mb + j].real();
    e.d1 = c.x1.params[mb + j].real();
    e.dd0 = c.x0.params[2 * mb + j].real();
    e.dd1 = c.x1.params[2 * mb + j].real();
    e.r0 = BlockScale::radius(c, n + j);
    e.r1 = BlockScale::radius(c, n + mb + j);
    e.r2 = BlockScale::radius(c, n + 2 * mb + j);
    return e;
}

// the parameter is linear in s, so its range over the segment is the endpoint hull
inline Interval ext_enclosure(const ExtParam& e) {
    return {rnd::sub_down(std::min(e.v0, e.v1), e.r0), rnd::add_up(std::max(e.v0, e.v1), e.r0)};
}

// Sign pattern of a nondegenerate extremum: right when lambda' goes - to + with
// lambda'' > 0, left when mirrored.  Returns nullopt when neither is verified.
inline std::optional<Direction> extremum_direction(const ExtParam& e, std::string* why) {
    bool right = rnd::add_up(e.d0, e.r1) < 0.0 && rnd::sub_down(e.d1, e.r1) > 0.0 && rnd::sub_down(std::min(e.dd0, e.dd1), e.r2) > 0.0;
    bool left = rnd::sub_down(e.d0, e.r1) > 0.0 && rnd::add_up(e.d1, e.r1) < 0.0 && rnd::add_up(std::max(e.dd0, e.dd1), e.r2) < 0.0;
    if (right) return Direction::right;
    if (left) return Direction::left;
    if (why) {
        std::ostringstream os;
        os << "sign conditions not verified: d0=" << e.d0 << " d1=" << e.d1 << " (radius " << e.r1 << "), dd=[" << e.dd0 << ", " << e.dd1
           << "] (radius " << e.r2 << ")";
        *why = os.str();
    }
    return std::nullopt;
}

}  // namespace detail

inline FoldVerdict check_fold(const Certificate& c, int j) {
    FoldVerdict v;
    v.param = j;
    v.source = c.id;
    v.param_name = c.problem.param_names().at(j);
    if (!c.checks.smoothness) {
        v.reason = "smoothness check failed";
        return v;
    }
    auto e = detail::ext_param(c, j);
    auto d = detail::extremum_direction(e, &v.reason);
    v.value = detail::ext_enclosure(e);
    if (!d) return v;
    v.direction = *d;
    v.certified = true;
    return v;
}

inline bool check_no_fold(const Certificate& c, int j) {
    auto e = detail::ext_param(c, j);
    return (rnd::sub_down(std::min(e.d0, e.d1), e.r1) > 0.0) || (rnd::add_up(std::max(e.d0, e.d1), e.r1) < 0.0);
}

inline HopfVerdict check_hopf(const Certificate& c) {
    HopfVerdict v;
    v.source = c.id;
    const ProblemDef& p = c.problem;
    if (p.kind() != Kind::extended_hopf) {
        v.reason = "not an extended hopf certificate";
        return v;
    }
    if (!c.checks.smoothness) {
        v.reason = "smoothness check failed";
        return v;
    }
    int mb = p.m() / 3, n = p.n() / 3;
    int ja = 1, jt = 0, jmu = mb - 1;
    auto mu = detail::ext_param(c, jmu);
    auto a = detail::ext_param(c, ja);
    v.mu = detail::ext_enclosure(mu);
    v.tau = detail::ext_enclosure(detail::ext_param(c, jt));
    for (int i = 0; i < n; ++i) v.y.push_back(detail::ext_enclosure(detail::ext_param(c, 2 + i)));
    bool up = a.v0 < -a.r0 && a.r0 < a.v1, down = a.v1 < -a.r0 && a.r0 < a.v0;
    // a' bounded away from zero excludes the degenerate crossing
    bool slope = (rnd::sub_down(std::min(a.d0, a.d1), a.r1) > 0.0) || (rnd::add_up(std::max(a.d0, a.d1), a.r1) < 0.0);
    v.a_crossing = (up || down) && slope;
    auto d = detail::extremum_direction(mu, &v.reason);
    if (!v.a_crossing) {
        v.reason = "amplitude crossing not verified";
        return v;
    }
    if (!d) return v;
    v.direction = *d;
    v.certified = true;
    return v;
}

// ---------------------------------------------------------------------------
// Hopf point of u' = f(u, mu): f = 0 and Df w = i beta w, phi^T w = 1.

struct HopfPoint {
    Eigen::VectorXd y, y1, y2;
    double mu = 0.0, beta = 0.0;
    Eigen::VectorXd phi1, phi2;
    // validated enclosures (valid when `validated`)
    bool validated = false;
    double radius = 0.0;
    std::vector<Interval> Iy, Iy1, Iy2;
    Interval Imu{0.0}, Ibeta{0.0};
    std::string reason;
};

namespace detail {

struct FieldJets {
    PolyField f;
    std::vector<PolyField> d1;               // d f / d var, var over (u, mu)
    std::vector<std::vector<PolyField>> d2;  // d^2 f / d var d var
    explicit FieldJets(const PolyField& g) : f(g) {
        int nv = g.n_vars();
        for (int a = 0; a < nv; ++a) d1.push_back(differentiate(g, a));
        d2.resize(nv);
        for (int a = 0; a < nv; ++a)
            for (int b = 0; b < nv; ++b) d2[a].push_back(differentiate(d1[a], b));
    }
};

template <class T>
struct HopfSystem {
    const FieldJets& J;
    int n;
    std::vector<T> phi1, phi2;

    // z = (y, y1, y2, mu, beta)
    std::vector<T> F(const std::vector<T>& z) const {
        auto [y, y1, y2, mu, beta] = split(z);
        std::vector<T> r(3 * n + 2, T(0.0));
        auto fy = eval_point(J.f, y, {mu});
        for (int i = 0; i < n; ++i) r[i] = fy[i];
        auto D = jac(y, mu);
        for (int i = 0; i < n; ++i) {
            T a(0.0), b(0.0);
            for (int k = 0; k < n; ++k) {
                a += D[i][k] * y1[k];
                b += D[i][k] * y2[k];
            }
            r[n + i] = a + beta * y2[i];
            r[2 * n + i] = b - beta * y1[i];
        }
        T c(0.0), d(0.0);
        for (int k = 0; k < n; ++k) {
            c += phi1[k] * y1[k] - phi2[k] * y2[k];
            d += phi2[k] * y1[k] + phi1[k] * y2[k];
        }
        r[3 * n] = c - T(1.0);
        r[3 * n + 1] = d;
        return r;
    }

    std::vector<std::vector<T>> DF(const std::vector<T>& z) const {
        auto [y, y1, y2, mu, beta] = split(z);
        int N = 3 * n + 2;
        std::vector<std::vector<T>> M(N, std::vector<T>(N, T(0.0)));
        auto D = jac(y, mu);
        std::vector<T> vars = y;
        vars.push_back(mu);
        // second derivatives d/dvar (Df) at (y, mu)
        std::vector<std::vector<std::vector<T>>> H(n + 1, std::vector<std::vector<T>>(n, std::vector<T>(n, T(0.0))));
        for (int v = 0; v <= n; ++v)
            for (int k = 0; k < n; ++k) {
                auto col = eval_point(J.d2[k][v], y, {mu});
                for (int i = 0; i < n; ++i) H[v][i][k] = col[i];
            }
        auto fmu = eval_point(J.d1[n], y, {mu});
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < n; ++k) M[i][k] = D[i][k];
            M[i][3 * n] = fmu[i];
            for (int v = 0; v <= n; ++v) {
                T a(0.0), b(0.0);
                for (int k = 0; k < n; ++k) {
                    a += H[v][i][k] * y1[k];
                    b += H[v][i][k] * y2[k];
                }
                int col = v < n ? v : 3 * n;
                M[n + i][col] = a;
                M[2 * n + i][col] = b;
            }
            for (int k = 0; k < n; ++k) {
                M[n + i][n + k] = D[i][k];
                M[2 * n + i][2 * n + k] = D[i][k];
            }
            M[n + i][2 * n + i] += beta;
            M[2 * n + i][n + i] -= beta;
            M[n + i][3 * n + 1] = y2[i];
            M[2 * n + i][3 * n + 1] = -y1[i];
        }
        for (int k = 0; k < n; ++k) {
            M[3 * n][n + k] = phi1[k];
            M[3 * n][2 * n + k] = -phi2[k];
            M[3 * n + 1][n + k] = phi2[k];
            M[3 * n + 1][2 * n + k] = phi1[k];
        }
        return M;
    }

    std::vector<std::vector<T>> jac(const std::vector<T>& y, const T& mu) const {
        std::vector<std::vector<T>> D(n, std::vector<T>(n, T(0.0)));
        for (int k = 0; k < n; ++k) {
            auto col = eval_point(J.d1[k], y, {mu});
            for (int i = 0; i < n; ++i) D[i][k] = col[i];
        }
        return D;
    }

    std::tuple<std::vector<T>, std::vector<T>, std::vector<T>, T, T> split(const std::vector<T>& z) const {
        return {std::vector<T>(z.begin(), z.begin() + n), std::vector<T>(z.begin() + n, z.begin() + 2 * n),
                std::vector<T>(z.begin() + 2 * n, z.begin() + 3 * n), z[3 * n], z[3 * n + 1]};
    }
};

inline Eigen::MatrixXd to_eigen(const std::vector<std::vector<double>>& M) {
    Eigen::MatrixXd R(M.size(), M.size());
    for (size_t i = 0; i < M.size(); ++i)
        for (size_t j = 0; j < M.size(); ++j) R(i, j) = M[i][j];
    return R;
}

inline void check_field(const PolyField& f) {
    if (f.n_param() != 1) throw std::invalid_argument("Hopf-point system expects exactly one free parameter");
    if (f.n_out() != f.n_state()) throw std::invalid_argument("vector field must be square");
}

}  // namespace detail

// Jacobian of f at (y, mu) in floating point.
inline Eigen::MatrixXd field_jacobian(const PolyField& f, const Eigen::VectorXd& y, double mu) {
    int n = f.n_state();
    Eigen::MatrixXd D(n, n);
    std::vector<double> yv(y.data(), y.data() + n);
    for (int k = 0; k < n; ++k) {
        auto col = eval_point(differentiate(f, k), yv, {mu});
        for (int i = 0; i < n; ++i) D(i, k) = col[i];
    }
    return D;
}

// Newton for f(y, mu) = 0 at fixed mu.
inline Eigen::VectorXd solve_equilibrium(const PolyField& f, Eigen::VectorXd y, double mu, int max_iter = 50) {
    int n = f.n_state();
    for (int it = 0; it < max_iter; ++it) {
        std::vector<double> yv(y.data(), y.data() + n);
        auto r = eval_point(f, yv, {mu});
        Eigen::VectorXd R = Eigen::Map<Eigen::VectorXd>(r.data(), n);
        if (R.cwiseAbs().maxCoeff() < 1e-14 * (1.0 + y.cwiseAbs().maxCoeff())) return y;
        Eigen::VectorXd dy = field_jacobian(f, y, mu).partialPivLu().solve(R);
        if (!dy.allFinite()) throw NewtonFailure("equilibrium Jacobian is singular");
        y -= dy;
        if (dy.cwiseAbs().maxCoeff() < 1e-15 * (1.0 + y.cwiseAbs().maxCoeff())) return y;
    }
    throw NewtonFailure("equilibrium Newton did not converge");
}

// Scans mu over [mu_lo, mu_hi] following the equilibrium from y_guess and
// returns a seed at the first complex pair crossing the imaginary axis.
// beta_sign (+1/-1) picks which member of the conjugate pair is reported.
inline std::optional<HopfPoint> scan_hopf(const PolyField& f, Eigen::VectorXd y, double mu_lo, double mu_hi, int steps = 200,
                                          int beta_sign = 1) {
    detail::check_field(f);
    auto crit = [&](const Eigen::VectorXd& yy, double mu, std::complex<double>& lam, Eigen::VectorXcd& w) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(field_jacobian(f, yy, mu));
        double best = rnd::kInf;
        int idx = -1;
        for (int i = 0; i < es.eigenvalues().size(); ++i) {
            auto l = es.eigenvalues()(i);
            if (std::abs(l.imag()) < 1e-10 || l.imag() * beta_sign < 0.0) continue;
            if (std::abs(l.real()) < best) {
                best = std::abs(l.real());
                idx = i;
            }
        }
        if (idx < 0) return false;
        lam = es.eigenvalues()(idx);
        w = es.eigenvectors().col(idx);
        return true;
    };
    double prev_re = 0.0;
    bool have_prev = false;
    Eigen::VectorXd yprev = y;
    double mprev = mu_lo;
    for (int s = 0; s <= steps; ++s) {
        double mu = mu_lo + (mu_hi - mu_lo) * s / steps;
        y = solve_equilibrium(f, y, mu);
        std::complex<double> lam;
        Eigen::VectorXcd w;
        if (!crit(y, mu, lam, w)) {
            have_prev = false;
            continue;
        }
        if (have_prev && (prev_re > 0.0) != (lam.real() > 0.0)) {
            double t = prev_re / (prev_re - lam.real());
            double ms = mprev + t * (mu - mprev);
            Eigen::VectorXd ys = solve_equilibrium(f, yprev + t * (y - yprev), ms);
            crit(ys, ms, lam, w);
            HopfPoint h;
            h.y = ys;
            h.mu = ms;
            h.beta = lam.imag();
            Eigen::VectorXcd phi = w.conjugate() / w.squaredNorm();
            h.phi1 = phi.real();
            h.phi2 = phi.imag();
            h.y1 = w.real();
            h.y2 = w.imag();
            return h;
        }
        prev_re = lam.real();
        have_prev = true;
        yprev = y;
        mprev = mu;
    }
    return std::nullopt;
}

// Newton refinement of the (3n+2)-dimensional system followed by a
// Krawczyk-type existence proof on a max-norm box around the numerics.
inline HopfPoint locate_hopf_point(const PolyField& f, HopfPoint seed) {
    detail::check_field(f);
    const int n = f.n_state(), N = 3 * n + 2;
    detail::FieldJets J(f);
    // rescale the eigenvector so that phi^T w = 1
    {
        std::complex<double> s(0.0);
        for (int k = 0; k < n; ++k) s += std::complex<double>(seed.phi1(k), seed.phi2(k)) * std::complex<double>(seed.y1(k), seed.y2(k));
        Eigen::VectorXcd w(n);
        for (int k = 0; k < n; ++k) w(k) = std::complex<double>(seed.y1(k), seed.y2(k)) / s;
        seed.y1 = w.real();
        seed.y2 = w.imag();
    }
    std::vector<double> z(N);
    for (int i = 0; i < n; ++i) {
        z[i] = seed.y(i);
        z[n + i] = seed.y1(i);
        z[2 * n + i] = seed.y2(i);
    }
    z[3 * n] = seed.mu;
    z[3 * n + 1] = seed.beta;
    detail::HopfSystem<double> S{J, n, std::vector<double>(seed.phi1.data(), seed.phi1.data() + n),
                                 std::vector<double>(seed.phi2.data(), seed.phi2.data() + n)};
    for (int it = 0; it < 50; ++it) {
        auto r = S.F(z);
        Eigen::VectorXd R = Eigen::Map<Eigen::VectorXd>(r.data(), N);
        Eigen::VectorXd dz = detail::to_eigen(S.DF(z)).partialPivLu().solve(R);
        if (!dz.allFinite()) throw NewtonFailure("Hopf-point system Jacobian is singular");
        for (int i = 0; i < N; ++i) z[i] -= dz(i);
        if (dz.cwiseAbs().maxCoeff() < 1e-15 * (1.0 + Eigen::Map<Eigen::VectorXd>(z.data(), N).cwiseAbs().maxCoeff())) break;
    }
    HopfPoint h = seed;
    h.y = Eigen::Map<Eigen::VectorXd>(z.data(), n);
    h.y1 = Eigen::Map<Eigen::VectorXd>(z.data() + n, n);
    h.y2 = Eigen::Map<Eigen::VectorXd>(z.data() + 2 * n, n);
    h.mu = z[3 * n];
    h.beta = z[3 * n + 1];

    // proof: with A ~ DF(z)^-1, K(Z) = z - A F(z) + (I - A DF(Z))(Z - z) maps
    // the box Z = z + [-r, r]^N into its interior
    Eigen::MatrixXd A = detail::to_eigen(S.DF(z)).inverse();
    if (!A.allFinite()) {
        h.reason = "singular Hopf-point Jacobian";
        return h;
    }
    std::vector<Interval> phi1(n), phi2(n), zi(N);
    for (int k = 0; k < n; ++k) {
        phi1[k] = seed.phi1(k);
        phi2[k] = seed.phi2(k);
    }
    for (int i = 0; i < N; ++i) zi[i] = z[i];
    detail::HopfSystem<Interval> SI{J, n, phi1, phi2};
    auto Fz = SI.F(zi);
    double Y = 0.0;
    for (int i = 0; i < N; ++i) {
        Interval acc(0.0);
        for (int k = 0; k < N; ++k) acc += Interval(A(i, k)) * Fz[k];
        Y = std::max(Y, acc.mag());
    }
    for (double r = std::max(1e-15, 2.0 * Y); r <= 1e-2; r *= 1.5) {
        std::vector<Interval> box(N);
        for (int i = 0; i < N; ++i) box[i] = Interval(rnd::sub_down(z[i], r), rnd::add_up(z[i], r));
        auto DFb = SI.DF(box);
        double Z = 0.0;
        for (int i = 0; i < N; ++i) {
            double row = 0.0;
            for (int j = 0; j < N; ++j) {
                Interval acc(i == j ? 1.0 : 0.0);
                for (int k = 0; k < N; ++k) acc -= Interval(A(i, k)) * DFb[k][j];
                row = rnd::add_up(row, acc.mag());
            }
            Z = std::max(Z, row);
        }
        if (rnd::add_up(Y, rnd::mul_up(Z, r)) < r) {
            h.validated = true;
            h.radius = r;
            h.Iy.clear();
            h.Iy1.clear();
            h.Iy2.clear();
            for (int i = 0; i < n; ++i) {
                h.Iy.push_back(box[i]);
                h.Iy1.push_back(box[n + i]);
                h.Iy2.push_back(box[2 * n + i]);
            }
            h.Imu = box[3 * n];
            h.Ibeta = box[3 * n + 1];
            return h;
        }
    }
    h.reason = "Newton-Kantorovich inequality not verified";
    return h;
}

// Derivative gamma'(mu*) of the critical eigenvalue, from the block system
// obtained by differentiating f(y(mu), mu) = 0, Df y0 = gamma y0, phi0^T y0 = 1
// in mu.  The interval linear solve verifies invertibility.
struct CrossingDirection {
    bool validated = false;
    CInterval gamma_prime{0.0};
    int sign = 0;  // sign of Re gamma' when determined
    std::string reason;
};

inline CrossingDirection eigen_crossing_direction(const PolyField& f, const HopfPoint& hp) {
    CrossingDirection out;
    if (!hp.validated) {
        out.reason = "Hopf point is not validated";
        return out;
    }
    detail::check_field(f);
    const int n = f.n_state(), N = 2 * n + 1;
    detail::FieldJets J(f);
    std::vector<CInterval> y0(n), phi0(n);
    for (int k = 0; k < n; ++k) {
        y0[k] = CInterval(hp.Iy1[k], hp.Iy2[k]);
        phi0[k] = CInterval(Interval(hp.phi1(k)), Interval(hp.phi2(k)));
    }
    CInterval gamma(Interval(0.0), hp.Ibeta);
    auto ev = [&](const PolyField& g) { return eval_point(g, hp.Iy, {hp.Imu}); };
    std::vector<std::vector<CInterval>> M(N, std::vector<CInterval>(N, CInterval(0.0)));
    std::vector<CInterval> b(N, CInterval(0.0));
    std::vector<std::vector<Interval>> D(n);
    for (int k = 0; k < n; ++k) {
        auto col = ev(J.d1[k]);
        for (int i = 0; i < n; ++i) D[i].resize(n), D[i][k] = col[i];
    }
    auto fmu = ev(J.d1[n]);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
            M[i][k] = D[i][k];
            M[n + i][n + k] = D[i][k];
        }
        M[n + i][n + i] -= gamma;
        M[n + i][2 * n] = -y0[i];
        b[i] = -fmu[i];
    }
    // (D_u (Df y0)) y'  and  -(D_mu Df) y0
    for (int l = 0; l <= n; ++l)
        for (int k = 0; k < n; ++k) {
            auto col = ev(J.d2[k][l]);
            for (int i = 0; i < n; ++i) {
                CInterval t = y0[k] * col[i];
                if (l < n)
                    M[n + i][l] += t;
                else
                    b[n + i] -= t;
            }
        }
    for (int k = 0; k < n; ++k) M[2 * n][n + k] = phi0[k];

    CMat Mm(N, N);
    CVec bm(N);
    for (int i = 0; i < N; ++i) {
        bm(i) = b[i].mid();
        for (int j = 0; j < N; ++j) Mm(i, j) = M[i][j].mid();
    }
    CMat R = Mm.inverse();
    if (!R.allFinite()) {
        out.reason = "singular crossing-direction system";
        return out;
    }
    CVec xh = R * bm;
    // ||x - xh|| <= ||R (b - M xh)|| / (1 - ||I - R M||)
    double q = 0.0, res = 0.0;
    std::vector<CInterval> d(N);
    for (int i = 0; i < N; ++i) {
        CInterval acc = b[i];
        for (int j = 0; j < N; ++j) acc -= M[i][j] * CInterval(xh(j));
        d[i] = acc;
    }
    for (int i = 0; i < N; ++i) {
        double row = 0.0;
        CInterval acc(0.0);
        for (int j = 0; j < N; ++j) {
            CInterval e(i == j ? 1.0 : 0.0);
            for (int k = 0; k < N; ++k) e -= CInterval(R(i, k)) * M[k][j];
            row = rnd::add_up(row, e.mag());
            acc += CInterval(R(i, j)) * d[j];
        }
        q = std::max(q, row);
        res = std::max(res, acc.mag());
    }
    if (!(q < 1.0)) {
        out.reason = "interval linear solve not verified";
        return out;
    }
    double err = rnd::div_up(res, rnd::sub_down(1.0, q));
    cplx g = xh(2 * n);
    out.gamma_prime = CInterval(Interval(rnd::sub_down(g.real(), err), rnd::add_up(g.real(), err)),
                                Interval(rnd::sub_down(g.imag(), err), rnd::add_up(g.imag(), err)));
    out.validated = true;
    out.sign = out.gamma_prime.re.lo() > 0.0 ? 1 : out.gamma_prime.re.hi() < 0.0 ? -1 : 0;
    return out;
}

// ---------------------------------------------------------------------------
// Extended-system segments around a fold or Hopf point.

struct ExtendedSegmentOptions {
    double delta = 1e-3;   // initial half length of the segment
    int max_halvings = 12;
    ValidatorOptions validator;
    NewtonOptions newton;
    std::function<void(const std::string&)> log;
};

struct ExtendedSegment {
    bool ok = false;
    Certificate cert;
    PointState centre, tangent;
    double delta = 0.0;
    std::string failure;
};

namespace detail {

inline ProblemDef anchored_problem(const BranchSetup& b, const PointState& phase_from, const PointState& q, const PointState& target) {
    int K = target.K();
    GenPhase ph = build_phase(phase_from.resized(K));
    GenPhase cont = build_continuation(conj_coeffs(q.resized(K)), conj_coeffs(q.resized(K)), target, target);
    if (b.kind == Kind::hopf) {
        GenPhase amp = build_amplitude(phase_from.resized(K));
        return make_problem(b, ph, &amp, cont, K);
    }
    return make_problem(b, ph, nullptr, cont, K);
}

inline PointState stack_state(const PointState& a, const PointState& b, const PointState& c) {
    PointState r;
    for (const PointState* p : {&a, &b, &c}) {
        r.seqs.insert(r.seqs.end(), p->seqs.begin(), p->seqs.end());
        r.params.insert(r.params.end(), p->params.begin(), p->params.end());
    }
    r.conj_symmetric = true;
    return r;
}

}  // namespace detail

// Refines the centre guess, places endpoints at -/+ delta along the tangent,
// and validates the second-order extended system with block scaling (1, h, h^2).
// `accept` decides whether a validated certificate is good enough (e.g. the
// fold inequalities hold); otherwise delta is halved.
inline ExtendedSegment extended_segment(const BranchSetup& b, const PointState& centre_guess, const PointState& tangent_guess,
                                        const ExtendedSegmentOptions& opt, const CertificateFilter& accept) {
    ExtendedSegment out;
    auto log = [&](const std::string& s) {
        if (opt.log) opt.log(s);
    };
    const int K = centre_guess.K();
    try {
        ProblemDef pc = detail::anchored_problem(b, centre_guess, tangent_guess, centre_guess);
        PointState xc = newton_refine(pc, centre_guess, 0.0, opt.newton);
        if (b.kind == Kind::hopf) xc = normalize_amplitude(xc);
        pc = detail::anchored_problem(b, xc, tangent_guess, xc);
        PointState tc = predict_tangent(pc, xc, 0.0, &tangent_guess);
        out.centre = xc;
        out.tangent = tc;
        double delta = opt.delta;
        for (int attempt = 0; attempt <= opt.max_halvings; ++attempt, delta *= 0.5) {
            out.delta = delta;
            PointState P0 = xc + tc.scaled(cplx(-delta)), P1 = xc + tc.scaled(cplx(delta));
            PointState x0 = newton_refine(detail::anchored_problem(b, xc, tc, P0), P0, 0.0, opt.newton);
            if (b.kind == Kind::hopf) x0 = normalize_amplitude(x0);
            PointState x1 = newton_refine(detail::anchored_problem(b, x0, tc, P1), P1, 0.0, opt.newton);
            if (b.kind == Kind::hopf) x1 = normalize_amplitude(x1);
            ProblemDef base = segment_problem(b, x0, x1, tc, tc, K);
            ProblemDef pe = make_extended(base);
            PointState dx = x1 - x0;
            PointState zero = dx.scaled(cplx(0.0));
            PointState X0 = newton_refine(pe, detail::stack_state(x0, dx, zero), 0.0, opt.newton);
            PointState X1 = newton_refine(pe, detail::stack_state(x1, dx, zero), 1.0, opt.newton);
            // the block scale trades coupling growth (small h) against the
            // unscaled radius of the derivative blocks (large h)
            double h = x_norm(dx, b.nu);
            std::vector<std::vector<double>> cands;
            for (double hh = h; hh < 1.0; hh *= 4.0) cands.push_back(block_weights(pe, hh));
            cands.push_back(block_weights(pe, 1.0));
            auto res = validate_segment_weighted(pe, X0, X1, cands, opt.validator, accept);
            if (!res.ok) {
                out.failure = res.failure;
                log("extended segment at delta=" + std::to_string(delta) + " failed: " + res.failure);
                continue;
            }
            out.cert = std::move(res.cert);
            out.ok = true;
            return out;
        }
    } catch (const std::exception& e) {
        out.failure = e.what();
    }
    return out;
}

// Fold inside branch segment `seg`: the centre is interpolated where the
// monitored tangent component vanishes.
struct FoldResult {
    ExtendedSegment segment;
    FoldVerdict verdict;
};

inline FoldResult localize_fold(const BranchSetup& b, const BranchResult& br, int seg, const std::string& param,
                                const ExtendedSegmentOptions& opt) {
    const BranchPoint& pa = br.points.at(seg);
    const BranchPoint& pb = br.points.at(seg + 1);
    int j = -1;
    for (size_t i = 0; i < b.names.size(); ++i)
        if (b.names[i] == param) j = static_cast<int>(i);
    if (j < 0) throw std::invalid_argument("unknown parameter '" + param + "'");
    int K = std::max(pa.x.K(), pb.x.K());
    double da = pa.t.params[j].real(), db = pb.t.params[j].real();
    double s = (da == db) ? 0.5 : std::clamp(da / (da - db), 0.0, 1.0);
    PointState xa = pa.x.resized(K), xb = pb.x.resized(K), ta = pa.t.resized(K), tb = pb.t.resized(K);
    PointState xc = xa + (xb - xa).scaled(cplx(s));
    PointState tc = ta + (tb - ta).scaled(cplx(s));
    tc = tc.scaled(cplx(1.0 / x_norm(tc, b.nu)));
    FoldResult r;
    auto accept = [&](const Certificate& c, std::string* why) {
        auto v = check_fold(c, j);
        if (!v.certified && why) *why = v.reason;
        return v.certified;
    };
    r.segment = extended_segment(b, xc, tc, opt, accept);
    if (r.segment.ok) {
        r.segment.cert.id = "fold_" + param;
        r.verdict = check_fold(r.segment.cert, j);
    } else {
        r.verdict.param = j;
        r.verdict.param_name = param;
        r.verdict.reason = r.segment.failure;
    }
    return r;
}

// Hopf bifurcation at the branch point where the amplitude a vanishes.
struct HopfResult {
    ExtendedSegment segment;
    HopfVerdict verdict;
};

inline HopfResult localize_hopf(const BranchSetup& b, const BranchPoint& at_zero_amplitude, const ExtendedSegmentOptions& opt) {
    if (b.kind != Kind::hopf) throw std::invalid_argument("localize_hopf needs a hopf-kind setup");
    HopfResult r;
    auto accept = [](const Certificate& c, std::string* why) {
        auto v = check_hopf(c);
        if (!v.certified && why) *why = v.reason;
        return v.certified;
    };
    r.segment = extended_segment(b, at_zero_amplitude.x, at_zero_amplitude.t, opt, accept);
    if (r.segment.ok) {
        r.segment.cert.id = "hopf";
        r.verdict = check_hopf(r.segment.cert);
    } else {
        r.verdict.reason = r.segment.failure;
    }
    return r;
}

}  // namespace hopfval
