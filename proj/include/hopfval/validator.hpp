#pragma once

#include <functional>
#include <thread>

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "imatrix.hpp"
#include "problem.hpp"

namespace hopfval {

// Polynomial in s with coefficients in a commutative ring V; V() is zero.
template <class V>
struct SPoly {
    std::vector<V> c;

    SPoly() = default;
    explicit SPoly(std::vector<V> coeffs) : c(std::move(coeffs)) {}
    int degree() const { return static_cast<int>(c.size()) - 1; }
    V coeff(int p) const { return p < static_cast<int>(c.size()) ? c[p] : V(); }

    friend SPoly operator+(const SPoly& a, const SPoly& b) {
        SPoly r = a.c.size() >= b.c.size() ? a : b;
        const SPoly& o = a.c.size() >= b.c.size() ? b : a;
        for (size_t p = 0; p < o.c.size(); ++p) r.c[p] += o.c[p];
        return r;
    }
    friend SPoly operator*(const SPoly& a, const SPoly& b) {
        SPoly r;
        if (a.c.empty() || b.c.empty()) return r;
        r.c.resize(a.c.size() + b.c.size() - 1);
        for (size_t i = 0; i < a.c.size(); ++i)
            for (size_t j = 0; j < b.c.size(); ++j) r.c[i + j] += a.c[i] * b.c[j];
        return r;
    }
};

using ISeq = FourierSeq<CInterval>;
using SSeq = SPoly<ISeq>;

// sum_p sigma^p c_p
inline ISeq horner(const SSeq& f, const Interval& sigma) {
    if (f.c.empty()) return ISeq();
    ISeq r = f.c.back();
    for (int p = f.degree() - 1; p >= 0; --p) {
        r = r.scaled(sigma);
        r += f.c[p];
    }
    return r;
}
inline CInterval horner(const std::vector<CInterval>& c, const Interval& sigma) {
    if (c.empty()) return CInterval(0.0);
    CInterval r = c.back();
    for (int p = static_cast<int>(c.size()) - 2; p >= 0; --p) r = r * sigma + c[p];
    return r;
}

struct SingularJacobian : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A_s = (1-s) A0 + s A1 on X_K; the tail (ik)^-1 on modes |k| > K is implicit.
struct ApproxInverse {
    PointMatrix A0, A1;
};

namespace detail {

inline std::vector<int> conj_flip(const Layout& L) {
    std::vector<int> f(L.size());
    for (int i = 0; i < L.n(); ++i)
        for (int k = -L.K(); k <= L.K(); ++k) f[L.seq(i, k)] = L.seq(i, -k);
    for (int j = 0; j < L.m(); ++j) f[L.param(j)] = L.param(j);
    return f;
}

inline CMat numerical_inverse(const ProblemDef& p, const PointState& x, double s) {
    const Layout& L = p.layout();
    CMat J = galerkin_jacobian(p, x, s);
    Eigen::PartialPivLU<CMat> lu(J);
    double rc = lu.rcond();
    if (!(rc > 1e-15)) throw SingularJacobian("numerically singular Galerkin Jacobian (rcond " + std::to_string(rc) + ")");
    CMat A = lu.inverse();
    if (!A.allFinite()) throw SingularJacobian("Galerkin Jacobian inverse is not finite");
    if (is_extended(p.kind()))
        for (int r = 0; r < A.rows(); ++r)
            for (int c = 0; c < A.cols(); ++c)
                if (L.block_of_index(c) > L.block_of_index(r)) A(r, c) = 0.0;
    // conjugation equivariance: A[flip r][flip c] = conj(A[r][c])
    auto f = conj_flip(L);
    CMat S(A.rows(), A.cols());
    for (int r = 0; r < A.rows(); ++r)
        for (int c = 0; c < A.cols(); ++c) S(r, c) = (A(r, c) + std::conj(A(f[r], f[c]))) * 0.5;
    return S;
}

}  // namespace detail

inline ApproxInverse build_approx_inverse(const ProblemDef& p, const PointState& x0, const PointState& x1) {
    return {PointMatrix(detail::numerical_inverse(p, x0, 0.0)), PointMatrix(detail::numerical_inverse(p, x1, 1.0))};
}

// Per-component norm scale factors (1, h, h^2 on the blocks of extended kinds).
inline std::vector<double> block_weights(const ProblemDef& p, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("block scale h must be positive");
    const Layout& L = p.layout();
    std::vector<double> w;
    for (int i = 0; i < p.n(); ++i) w.push_back(std::pow(h, L.block_of_seq(i)));
    for (int j = 0; j < p.m(); ++j) w.push_back(std::pow(h, L.block_of_param(j)));
    return w;
}

// Radii polynomial data: p_j(r) = Y_j + sum_{q>=1} Z[j][q] r^q - r.
struct RadiiBounds {
    std::vector<double> Y;
    std::vector<std::vector<double>> Z;  // Z[j][0] unused (0)

    Interval poly(int j, double r) const {
        Interval ri(r), acc(Y[j]), rp(1.0);
        for (size_t q = 1; q < Z[j].size(); ++q) {
            rp = rp * ri;
            acc = acc + Interval(Z[j][q]) * rp;
        }
        return acc - ri;
    }
    bool negative_at(double r) const {
        for (size_t j = 0; j < Y.size(); ++j)
            if (!(poly(static_cast<int>(j), r).hi() < 0.0)) return false;
        return true;
    }
};

struct RadiusResult {
    bool ok = false;
    double r_hat = 0.0, r_max = 0.0;
    int blocking = -1;  // component that prevents success
};

struct ValidatorOptions {
    int max_bisection = 4;
    double r_lo = 1e-16, r_hi = 1.0;
    int per_decade = 64;
    std::vector<double> weights;  // empty: all ones
    int jobs = 1;                 // parallel candidate weightings
};

inline RadiusResult find_radius(const RadiiBounds& b, const ValidatorOptions& opt = {}) {
    RadiusResult res;
    const int steps = static_cast<int>(std::lround(std::log10(opt.r_hi / opt.r_lo) * opt.per_decade));
    double best = std::numeric_limits<double>::infinity();
    for (int t = 0; t <= steps; ++t) {
        double r = opt.r_lo * std::pow(10.0, static_cast<double>(t) / opt.per_decade);
        if (t == steps) r = opt.r_hi;
        double worst = -std::numeric_limits<double>::infinity();
        int wj = -1;
        for (size_t j = 0; j < b.Y.size(); ++j) {
            double v = b.poly(static_cast<int>(j), r).hi();
            if (v >= worst) worst = v, wj = static_cast<int>(j);
        }
        if (worst < 0.0) {
            if (!res.ok) res.r_hat = r;
            res.ok = true;
            res.r_max = r;
        } else if (worst < best) {
            best = worst;
            res.blocking = wj;
        }
    }
    if (res.ok) res.blocking = -1;
    return res;
}

// Y and Z bounds for one segment.  Construction does the s-expansion and the
// interval matrix products; Y/Z for an s-piece are then cheap-ish.
class SegmentBounds {
public:
    SegmentBounds(const ProblemDef& p, const ApproxInverse& A, const PointState& x0, const PointState& x1,
                  std::vector<double> weights = {})
        : p_(p), A_(A), L_(p.layout()), idx_(L_.index_map()), w_(weights), nuw_(p.nu(), 4 * p.K() + 8) {
        const int n = p.n(), m = p.m(), K = p.K();
        ncomp_ = n + m;
        if (w_.empty()) w_.assign(ncomp_, 1.0);
        if (static_cast<int>(w_.size()) != ncomp_) throw std::invalid_argument("weights: wrong length");
        X0_ = to_interval(x0.resized(K));
        X1_ = to_interval(x1.resized(K));
        D_ = X1_ - X0_;
        expand_field();
        build_residual();
        build_matrices();
        build_nonlinear();
    }

    int ncomp() const { return ncomp_; }
    const std::vector<double>& weights() const { return w_; }

    // Y_j over s in sigma
    std::vector<double> Y(const Interval& sigma) const {
        std::vector<double> y(ncomp_, 0.0);
        for (int r = 0; r < L_.size(); ++r) {
            std::vector<CInterval> c(V_.size());
            for (size_t q = 0; q < V_.size(); ++q) c[q] = V_[q][r];
            double a = horner(c, sigma).mag();
            auto [comp, k] = idx_[r];
            y[comp] = rnd::add_up(y[comp], rnd::mul_up(a, nuw_.up(k)));
        }
        const int K = p_.K();
        for (int i = 0; i < p_.n(); ++i) {
            ISeq t = horner(Rtail_[i], sigma);
            for (int k = -t.K(); k <= t.K(); ++k) {
                if (std::abs(k) <= K) continue;
                double a = rnd::div_up(rnd::mul_up(t[k].mag(), nuw_.up(k)), static_cast<double>(std::abs(k)));
                y[i] = rnd::add_up(y[i], a);
            }
        }
        for (int j = 0; j < ncomp_; ++j) y[j] = rnd::div_up(y[j], w_[j]);
        return y;
    }

    // first-order coefficient Z1_j over s in sigma
    std::vector<double> Z1(const Interval& sigma) const {
        const int n = p_.n(), N = L_.size(), K = p_.K();
        // derivative sequences a_{i,var}(sigma)
        std::vector<std::vector<ISeq>> a(n + p_.m(), std::vector<ISeq>(n));
        for (int v = 0; v < n + p_.m(); ++v)
            for (int i = 0; i < n; ++i) a[v][i] = horner(dhS_[v][i], sigma);

        // (a) finite columns: |A M - I| and the tail spread of a * e_col
        std::vector<double> absB(size_t(N) * N);
        for (int r = 0; r < N; ++r)
            for (int c = 0; c < N; ++c) {
                Interval re(0.0), im(0.0);
                for (int q = static_cast<int>(B_.size()) - 1; q >= 0; --q) {
                    CInterval e = B_[q].get(r, c);
                    re = re * sigma + e.re;
                    im = im * sigma + e.im;
                }
                absB[size_t(r) * N + c] = CInterval(re, im).mag();
            }
        auto opfin = op_norm(N, N, idx_, idx_, ncomp_, nuw_, [&](int r, int c) { return absB[size_t(r) * N + c]; });
        for (int c = 0; c < N; ++c) {
            auto [cc, kp] = idx_[c];
            double f = nuw_.inv_up(kp);
            for (int i = 0; i < n; ++i) {
                const ISeq& s = a[cc][i];
                double acc = 0.0;
                for (int k = kp - s.K(); k <= kp + s.K(); ++k) {
                    if (std::abs(k) <= K) continue;
                    double e = rnd::div_up(rnd::mul_up(s[k - kp].mag(), nuw_.up(k)), static_cast<double>(std::abs(k)));
                    acc = rnd::add_up(acc, e);
                }
                if (acc == 0.0) continue;
                double tot = 0.0;
                // recompute the column's finite part for component i and add the tail
                for (int r = 0; r < N; ++r)
                    if (idx_[r].comp == i) tot = rnd::add_up(tot, rnd::mul_up(absB[size_t(r) * N + c], nuw_.up(idx_[r].k)));
                opfin[i][cc] = std::max(opfin[i][cc], rnd::mul_up(rnd::add_up(tot, acc), f));
            }
        }

        // (b) tail columns of sequence components
        std::vector<std::vector<double>> optail(ncomp_, std::vector<double>(ncomp_, 0.0));
        for (int jp = 0; jp < n; ++jp) {
            std::vector<double> psi(N, 0.0);
            for (int i = 0; i < n; ++i) {
                const ISeq& s = a[jp][i];
                for (int k = -K; k <= K; ++k) {
                    double mx = 0.0;
                    for (int kp = k - s.K(); kp <= k + s.K(); ++kp) {
                        if (std::abs(kp) <= K) continue;
                        mx = std::max(mx, rnd::mul_up(s[k - kp].mag(), nuw_.inv_up(kp)));
                    }
                    psi[L_.seq(i, k)] = mx;
                }
            }
            auto u0 = A_.A0.abs_times(psi), u1 = A_.A1.abs_times(psi);
            std::vector<double> n0(ncomp_, 0.0), n1(ncomp_, 0.0);
            for (int r = 0; r < N; ++r) {
                auto [comp, k] = idx_[r];
                n0[comp] = rnd::add_up(n0[comp], rnd::mul_up(u0[r], nuw_.up(k)));
                n1[comp] = rnd::add_up(n1[comp], rnd::mul_up(u1[r], nuw_.up(k)));
            }
            for (int j = 0; j < ncomp_; ++j) optail[j][jp] = std::max(n0[j], n1[j]);
            for (int i = 0; i < n; ++i) {
                double t = rnd::div_up(nu_norm(a[jp][i], nuw_).hi(), static_cast<double>(K + 1));
                optail[i][jp] = rnd::add_up(optail[i][jp], t);
            }
        }

        std::vector<double> z(ncomp_, 0.0);
        for (int j = 0; j < ncomp_; ++j) {
            double acc = 0.0;
            for (int jp = 0; jp < ncomp_; ++jp) {
                double o = std::max(opfin[j][jp], optail[j][jp]);
                acc = rnd::add_up(acc, rnd::div_up(rnd::mul_up(o, w_[jp]), w_[j]));
            }
            z[j] = acc;
        }
        return z;
    }

    // coefficients of the nonlinear part Zc_j(r), index q = power of r (q >= 2)
    const std::vector<std::vector<double>>& Zc() const { return Zc_; }

    RadiiBounds bounds(const Interval& sigma) const {
        RadiiBounds b;
        b.Y = Y(sigma);
        auto z1 = Z1(sigma);
        b.Z = Zc_;
        for (int j = 0; j < ncomp_; ++j) {
            if (b.Z[j].size() < 2) b.Z[j].resize(2, 0.0);
            b.Z[j][1] = z1[j];
        }
        return b;
    }

    // bounds maximized over 2^level equal pieces of [0,1]
    RadiiBounds bounds_pieces(int pieces) const {
        RadiiBounds acc;
        for (int t = 0; t < pieces; ++t) {
            Interval sigma = Interval(static_cast<double>(t)) / Interval(static_cast<double>(pieces));
            Interval sig_hi = Interval(static_cast<double>(t + 1)) / Interval(static_cast<double>(pieces));
            sigma = Interval(sigma.lo(), sig_hi.hi());
            if (t == 0) sigma = Interval(0.0, sigma.hi());
            if (t == pieces - 1) sigma = Interval(sigma.lo(), 1.0);
            auto b = bounds(sigma);
            if (t == 0) {
                acc = b;
                continue;
            }
            for (int j = 0; j < ncomp_; ++j) {
                acc.Y[j] = std::max(acc.Y[j], b.Y[j]);
                for (size_t q = 0; q < b.Z[j].size(); ++q) acc.Z[j][q] = std::max(acc.Z[j][q], b.Z[j][q]);
            }
        }
        return acc;
    }

    // upper bound of ||x_hat_s||_j over the segment
    const std::vector<double>& centre_norms() const { return nrm_; }
    const IState& x0() const { return X0_; }
    const IState& x1() const { return X1_; }

private:
    void expand_field() {
        const int n = p_.n(), m = p_.m();
        std::vector<SSeq> vars;
        for (int i = 0; i < n; ++i) vars.push_back(SSeq({X0_.seqs[i], D_.seqs[i]}));
        std::vector<SSeq> pvars;
        for (int j = 0; j < m; ++j) pvars.push_back(SSeq({ISeq::constant(X0_.params[j]), ISeq::constant(D_.params[j])}));
        vars.insert(vars.end(), pvars.begin(), pvars.end());
        auto scale = [](const SSeq& v, const Coeff& c) {
            SSeq r = v;
            CInterval cc = coeff_as<CInterval>(c);
            for (auto& q : r.c) q = q.scaled(cc);
            return r;
        };
        SSeq one({ISeq::constant(CInterval(1.0))});
        FieldEvaluator<SSeq> ev(vars, one, scale);
        hS_ = ev.eval(p_.field());
        for (const auto& f : p_.dh()) dhS_.push_back(ev.eval(f));
        if (p_.algebraic().n_out() > 0) {
            FieldEvaluator<SSeq> evg(pvars, one, scale);
            gS_ = evg.eval(p_.algebraic());
            for (const auto& f : p_.dg()) dgS_.push_back(evg.eval(f));
        }
    }

    void build_residual() {
        const int n = p_.n(), m = p_.m(), K = p_.K(), N = L_.size();
        int deg = 2;
        for (const auto& h : hS_) deg = std::max(deg, h.degree());
        for (const auto& g : gS_) deg = std::max(deg, g.degree());
        std::vector<std::vector<CInterval>> R(deg + 1, std::vector<CInterval>(N, CInterval(0.0)));
        Rtail_.assign(n, SSeq());
        for (int i = 0; i < n; ++i) {
            SSeq F({apply_K(X0_.seqs[i], 1), apply_K(D_.seqs[i], 1)});
            SSeq mh = hS_[i];
            for (auto& q : mh.c) q = -q;
            F = F + mh;
            for (int q = 0; q <= F.degree(); ++q)
                for (int k = -K; k <= K; ++k) R[q][L_.seq(i, k)] = F.c[q].at(k);
            Rtail_[i] = F;
        }
        for (int e = 0; e < m; ++e) {
            const auto& eq = p_.order()[e];
            int row = L_.param(e);
            if (eq.type == ScalarEq::Type::phase) {
                const auto& g = p_.phases()[eq.index];
                CInterval a0 = pairing(g.phi0, X0_), a1 = pairing(g.phi0, D_);
                CInterval b0 = pairing(g.phi1, X0_), b1 = pairing(g.phi1, D_);
                R[0][row] = a0 - CInterval(g.psi0);
                R[1][row] = a1 + b0 - a0 - CInterval(g.psi1 - g.psi0);
                R[2][row] = b1 - a1;
            } else {
                const SSeq& g = gS_[eq.index];
                for (int q = 0; q <= g.degree(); ++q) R[q][row] = g.c[q][0];
            }
        }
        // V_q = A0 R_q + (A1 - A0) R_{q-1}
        std::vector<std::vector<CInterval>> AR0, AR1;
        for (const auto& r : R) {
            AR0.push_back(A_.A0 * r);
            AR1.push_back(A_.A1 * r);
        }
        V_.assign(deg + 2, std::vector<CInterval>(N, CInterval(0.0)));
        for (int q = 0; q <= deg + 1; ++q)
            for (int r = 0; r < N; ++r) {
                CInterval v(0.0);
                if (q <= deg) v += AR0[q][r];
                if (q >= 1) v += AR1[q - 1][r] - AR0[q - 1][r];
                V_[q][r] = v;
            }
    }

    void build_matrices() {
        const int n = p_.n(), m = p_.m(), N = L_.size();
        int deg = 0;
        for (const auto& row : dhS_)
            for (const auto& s : row) deg = std::max(deg, s.degree());
        for (const auto& row : dgS_)
            for (const auto& s : row) deg = std::max(deg, s.degree());
        bool phase_moves = false;
        for (const auto& g : p_.phases()) phase_moves |= !g.phi0_equals_phi1;
        if (phase_moves) deg = std::max(deg, 1);

        std::vector<IState> dphi;
        for (const auto& g : p_.phases()) dphi.push_back(g.phi1 - g.phi0);

        std::vector<IMatrix> C, E;
        for (int q = 0; q <= deg; ++q) {
            FieldDerivs<CInterval> d;
            for (int v = 0; v < n + m; ++v) {
                std::vector<ISeq> col;
                for (int i = 0; i < n; ++i) col.push_back(dhS_[v][i].coeff(q));
                d.ds.push_back(std::move(col));
            }
            for (int j = 0; j < static_cast<int>(dgS_.size()); ++j) {
                std::vector<CInterval> col;
                for (const auto& s : dgS_[j]) col.push_back(s.coeff(q).at(0));
                d.dgv.push_back(std::move(col));
            }
            IMatrix M(N, N);
            assemble_jacobian<CInterval>(
                p_, d, q == 0,
                [&](int idx) -> const IState* {
                    const auto& g = p_.phases()[idx];
                    if (q == 0) return &g.phi0;
                    if (q == 1 && !g.phi0_equals_phi1) return &dphi[idx];
                    return nullptr;
                },
                [&](int r, int c, const CInterval& v) { M.set(r, c, v); });
            C.push_back(A_.A0 * M);
            E.push_back(A_.A1 * M);
        }
        IMatrix I(N, N);
        for (int r = 0; r < N; ++r) I.set_point(r, r, cplx(1.0));
        B_.clear();
        B_.push_back(add(C[0], I, -1.0));
        for (int q = 1; q <= deg; ++q) B_.push_back(add(add(C[q], E[q - 1]), C[q - 1], -1.0));
        B_.push_back(add(E[deg], C[deg], -1.0));
    }

    using RPoly = std::vector<Interval>;
    static RPoly rmul(const RPoly& a, const RPoly& b) {
        RPoly r(a.size() + b.size() - 1, Interval(0.0));
        for (size_t i = 0; i < a.size(); ++i)
            for (size_t j = 0; j < b.size(); ++j) r[i + j] = r[i + j] + a[i] * b[j];
        return r;
    }
    static void radd(RPoly& a, const RPoly& b) {
        if (b.size() > a.size()) a.resize(b.size(), Interval(0.0));
        for (size_t i = 0; i < b.size(); ++i) a[i] = a[i] + b[i];
    }

    // Q(r) = sum_mono |c| sum_j w_j [d_j M(n + r w) - d_j M(n)]
    RPoly nonlinear_poly(const std::vector<Monomial>& monos, int n_state, int var_offset) const {
        RPoly Q{Interval(0.0)};
        for (const auto& mono : monos) {
            std::vector<int> e;
            for (int x : mono.u) e.push_back(x);
            for (int x : mono.p) e.push_back(x);
            Interval cmag(0.0, mono.coeff.enclosure().mag());
            for (size_t j = 0; j < e.size(); ++j) {
                if (e[j] == 0) continue;
                RPoly P{Interval(static_cast<double>(e[j]))};
                for (size_t l = 0; l < e.size(); ++l) {
                    int pw = e[l] - (l == j ? 1 : 0);
                    int comp = l < static_cast<size_t>(n_state) ? static_cast<int>(l) : var_offset + static_cast<int>(l) - n_state;
                    RPoly base{Interval(0.0, nrm_[comp]), Interval(w_[comp])};
                    for (int t = 0; t < pw; ++t) P = rmul(P, base);
                }
                P[0] = Interval(0.0);
                int cj = j < static_cast<size_t>(n_state) ? static_cast<int>(j) : var_offset + static_cast<int>(j) - n_state;
                for (auto& c : P) c = c * Interval(w_[cj]) * cmag;
                radd(Q, P);
            }
        }
        return Q;
    }

    void build_nonlinear() {
        const int n = p_.n(), m = p_.m(), N = L_.size();
        auto n0 = component_norms_up(X0_, nuw_), n1 = component_norms_up(X1_, nuw_);
        nrm_.resize(ncomp_);
        for (int j = 0; j < ncomp_; ++j) nrm_[j] = std::max(n0[j], n1[j]);

        auto op0 = op_norm(N, N, idx_, idx_, ncomp_, nuw_, [&](int r, int c) { return A_.A0.abs(r, c); });
        auto op1 = op_norm(N, N, idx_, idx_, ncomp_, nuw_, [&](int r, int c) { return A_.A1.abs(r, c); });
        double tailf = rnd::div_up(1.0, static_cast<double>(p_.K() + 1));

        std::vector<RPoly> Qi;
        for (int i = 0; i < n; ++i) Qi.push_back(nonlinear_poly(p_.field().component(i), n, n));
        // scalar row e carrying g_l
        std::vector<std::pair<int, RPoly>> Qg;
        for (int e = 0; e < m; ++e) {
            const auto& eq = p_.order()[e];
            if (eq.type == ScalarEq::Type::algebraic)
                Qg.push_back({n + e, nonlinear_poly(p_.algebraic().component(eq.index), 0, n)});
        }
        Zc_.assign(ncomp_, std::vector<double>(2, 0.0));
        for (int j = 0; j < ncomp_; ++j) {
            RPoly acc{Interval(0.0)};
            auto addterm = [&](int col, const RPoly& Q, bool diag) {
                double c = std::max(op0[j][col], op1[j][col]);
                if (diag) c = std::max(c, tailf);
                if (c == 0.0) return;
                RPoly t = Q;
                for (auto& x : t) x = x * Interval(c);
                radd(acc, t);
            };
            for (int i = 0; i < n; ++i) addterm(i, Qi[i], i == j);
            for (const auto& [col, Q] : Qg) addterm(col, Q, false);
            // Zc_j(r) = r * acc(r) / w_j ; acc has no constant term
            std::vector<double> z(acc.size() + 1, 0.0);
            for (size_t q = 1; q < acc.size(); ++q) z[q + 1] = rnd::div_up(acc[q].hi(), w_[j]);
            if (z.size() < 2) z.resize(2, 0.0);
            Zc_[j] = z;
        }
    }

    const ProblemDef& p_;
    const ApproxInverse& A_;
    const Layout& L_;
    std::vector<BlockIndex> idx_;
    std::vector<double> w_;
    NuWeights nuw_;
    int ncomp_ = 0;
    IState X0_, X1_, D_;
    std::vector<SSeq> hS_, gS_;
    std::vector<std::vector<SSeq>> dhS_, dgS_;
    std::vector<std::vector<CInterval>> V_;
    std::vector<SSeq> Rtail_;
    std::vector<IMatrix> B_;
    std::vector<double> nrm_;
    std::vector<std::vector<double>> Zc_;
};

inline std::vector<double> compute_Y(const ProblemDef& p, const ApproxInverse& A, const PointState& x0, const PointState& x1,
                                     const std::vector<double>& weights = {}) {
    return SegmentBounds(p, A, x0, x1, weights).Y(Interval(0.0, 1.0));
}
inline std::vector<std::vector<double>> compute_Z(const ProblemDef& p, const ApproxInverse& A, const PointState& x0,
                                                  const PointState& x1, const std::vector<double>& weights = {}) {
    return SegmentBounds(p, A, x0, x1, weights).bounds(Interval(0.0, 1.0)).Z;
}

// sum_j w_j max_k |q_k| nu^-|k|: bounds |<q, b>| over the weighted unit ball
inline double dual_norm(const IState& q, const NuWeights& nuw, const std::vector<double>& w) {
    double acc = 0.0;
    for (int i = 0; i < q.n(); ++i) {
        double mx = 0.0;
        for (int k = -q.seqs[i].K(); k <= q.seqs[i].K(); ++k) mx = std::max(mx, rnd::mul_up(q.seqs[i][k].mag(), nuw.inv_up(k)));
        acc = rnd::add_up(acc, rnd::mul_up(mx, w[i]));
    }
    for (int j = 0; j < q.m(); ++j) acc = rnd::add_up(acc, rnd::mul_up(q.params[j].mag(), w[q.n() + j]));
    return acc;
}

// r |<q1 - q0, b>| < |<(1-s) q1 + s q0, x1 - x0>| for all s, b
inline bool check_smoothness(const ProblemDef& p, const IState& x0, const IState& x1, double r_hat, const std::vector<double>& w) {
    int ci = p.phase_index("continuation");
    if (ci < 0) return false;
    const auto& g = p.phases()[ci];
    IState d = x1 - x0;
    Interval alpha = pairing(g.phi1, d).re, beta = pairing(g.phi0, d).re;
    bool pos = alpha.lo() > 0.0 && beta.lo() > 0.0, neg = alpha.hi() < 0.0 && beta.hi() < 0.0;
    if (!pos && !neg) return false;
    double lhs = g.phi0_equals_phi1 ? 0.0 : rnd::mul_up(r_hat, dual_norm(g.phi1 - g.phi0, NuWeights(p.nu(), p.K()), w));
    return lhs < std::min(alpha.mig(), beta.mig());
}

// r |<iK q_s, b>| < |<q_s, iK x_s>| for all s, b, with q_s the phase vector
inline bool check_phase_shift(const ProblemDef& p, const IState& x0, const IState& x1, double r_hat, const std::vector<double>& w) {
    int qi = p.phase_index("phase");
    if (qi < 0) return false;
    const GenPhase& ph = p.phases()[qi];
    auto iK = [](const IState& x) {
        IState r = x;
        for (auto& s : r.seqs) s = apply_K(s, 1);
        for (auto& c : r.params) c = CInterval(0.0);
        return r;
    };
    IState k0 = iK(x0), k1 = iK(x1);
    // linear in s for a fixed phase vector (endpoints suffice), quadratic otherwise
    const int pieces = ph.phi0_equals_phi1 ? 1 : 32;
    bool pos = true, neg = true;
    double low = rnd::kInf;
    for (int t = 0; t <= pieces; ++t) {
        Interval sig = ph.phi0_equals_phi1 ? Interval(static_cast<double>(t))
                                           : Interval(static_cast<double>(std::max(t - 1, 0)), static_cast<double>(t)) / Interval(pieces);
        if (!ph.phi0_equals_phi1 && t == 0) continue;
        IState q = ph.phi_at(sig);
        IState xs = k0;
        for (int i = 0; i < xs.n(); ++i)
            for (int k = -xs.K(); k <= xs.K(); ++k) xs.seqs[i][k] += (k1.seqs[i][k] - k0.seqs[i][k]) * sig;
        Interval g = pairing(q, xs).re;
        pos = pos && g.lo() > 0.0;
        neg = neg && g.hi() < 0.0;
        low = std::min(low, g.mig());
    }
    if (!pos && !neg) return false;
    NuWeights nw(p.nu(), p.K());
    double dn = std::max(dual_norm(iK(ph.phi0), nw, w), dual_norm(iK(ph.phi1), nw, w));
    return rnd::mul_up(r_hat, dn) < low;
}

struct Certificate {
    std::string id;
    ProblemDef problem;
    PointState x0, x1;
    std::vector<double> weights;
    double r_hat = 0.0, r_max = 0.0;
    RadiiBounds bounds;
    int s_pieces = 1;
    struct Checks {
        bool smoothness = false, phase_shift = false, injectivity = false;
    } checks;
    double wall_time = 0.0;
};

struct ValidationOutcome {
    bool ok = false;
    Certificate cert;
    std::string failure;
    int blocking = -1;
    RadiiBounds last_bounds;
};

using CertificateFilter = std::function<bool(const Certificate&, std::string*)>;

// Validation with several candidate norm weightings sharing one approximate
// inverse; the first weighting (in candidate order) that validates and passes
// `accept` wins.  With opt.jobs > 1 candidates are tried in parallel batches;
// the outcome is the same as the sequential one.
inline ValidationOutcome validate_segment_weighted(const ProblemDef& p, const PointState& x0, const PointState& x1,
                                                   const std::vector<std::vector<double>>& candidates, const ValidatorOptions& opt = {},
                                                   const CertificateFilter& accept = {}) {
    auto t0 = std::chrono::steady_clock::now();
    ValidationOutcome out;
    std::optional<ApproxInverse> A;
    try {
        A = build_approx_inverse(p, x0.resized(p.K()), x1.resized(p.K()));
    } catch (const SingularJacobian& e) {
        out.failure = e.what();
        return out;
    }
    auto attempt = [&](const std::vector<double>& weights) {
        ValidationOutcome o;
        SegmentBounds sb(p, *A, x0, x1, weights);
        RadiusResult rr;
        int pieces = 1;
        for (int level = 0; level <= opt.max_bisection; ++level) {
            pieces = 1 << level;
            o.last_bounds = sb.bounds_pieces(pieces);
            rr = find_radius(o.last_bounds, opt);
            if (rr.ok) break;
        }
        if (!rr.ok) {
            o.blocking = rr.blocking;
            std::string name = rr.blocking < 0 ? "?"
                               : rr.blocking < p.n() ? "sequence " + std::to_string(rr.blocking)
                                                     : "parameter " + p.param_names()[rr.blocking - p.n()];
            o.failure = "no validated radius in [1e-16, 1]; blocking component: " + name;
            return o;
        }
        Certificate c;
        c.problem = p;
        c.x0 = x0.resized(p.K());
        c.x1 = x1.resized(p.K());
        c.weights = sb.weights();
        c.r_hat = rr.r_hat;
        c.r_max = rr.r_max;
        c.bounds = o.last_bounds;
        c.s_pieces = pieces;
        c.checks.injectivity = true;
        c.checks.smoothness = check_smoothness(p, sb.x0(), sb.x1(), c.r_hat, c.weights);
        c.checks.phase_shift = check_phase_shift(p, sb.x0(), sb.x1(), c.r_hat, c.weights);
        std::string why;
        if (accept && !accept(c, &why)) {
            o.failure = why;
            return o;
        }
        o.cert = std::move(c);
        o.ok = true;
        return o;
    };
    const size_t batch = std::max(1, opt.jobs);
    for (size_t first = 0; first < candidates.size(); first += batch) {
        size_t last = std::min(candidates.size(), first + batch);
        std::vector<ValidationOutcome> res(last - first);
        if (last - first == 1) {
            res[0] = attempt(candidates[first]);
        } else {
            std::vector<std::thread> pool;
            for (size_t i = first; i < last; ++i) pool.emplace_back([&, i] { res[i - first] = attempt(candidates[i]); });
            for (auto& t : pool) t.join();
        }
        for (auto& o : res) {
            if (o.ok) {
                o.cert.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                return std::move(o);
            }
            out.failure = o.failure;
            out.blocking = o.blocking;
            out.last_bounds = o.last_bounds;
        }
    }
    return out;
}

inline ValidationOutcome validate_segment(const ProblemDef& p, const PointState& x0, const PointState& x1,
                                          const ValidatorOptions& opt = {}) {
    return validate_segment_weighted(p, x0, x1, {opt.weights}, opt);
}

struct RecheckReport {
    bool radii = false, radii_at_max = false, smoothness = false, phase_shift = false;
    bool recomputed = false, recomputed_ok = false;
    bool ok() const { return radii && radii_at_max && (!recomputed || recomputed_ok); }
};

// Re-verifies a certificate's inequalities with fresh interval arithmetic.
// With `full`, Y and Z are recomputed from the stored problem and endpoints.
inline RecheckReport recheck(const Certificate& c, bool full = false) {
    RecheckReport r;
    r.radii = c.bounds.negative_at(c.r_hat);
    r.radii_at_max = c.bounds.negative_at(c.r_max);
    IState x0 = to_interval(c.x0), x1 = to_interval(c.x1);
    r.smoothness = check_smoothness(c.problem, x0, x1, c.r_hat, c.weights);
    r.phase_shift = check_phase_shift(c.problem, x0, x1, c.r_hat, c.weights);
    if (full) {
        r.recomputed = true;
        try {
            auto A = build_approx_inverse(c.problem, c.x0, c.x1);
            SegmentBounds sb(c.problem, A, c.x0, c.x1, c.weights);
            auto b = sb.bounds_pieces(c.s_pieces);
            r.recomputed_ok = b.negative_at(c.r_hat);
        } catch (const std::exception&) {
            r.recomputed_ok = false;
        }
    }
    return r;
}

}  // namespace hopfval
