#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyfield.hpp"
#include "seqspace.hpp"

namespace hopfval {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

enum class Kind { plain, hopf, extended_plain, extended_hopf };

inline const char* kind_name(Kind k) {
    switch (k) {
        case Kind::plain: return "plain";
        case Kind::hopf: return "hopf";
        case Kind::extended_plain: return "extended-plain";
        case Kind::extended_hopf: return "extended-hopf";
    }
    return "?";
}
inline Kind kind_from_name(const std::string& s) {
    if (s == "plain") return Kind::plain;
    if (s == "hopf") return Kind::hopf;
    if (s == "extended-plain") return Kind::extended_plain;
    if (s == "extended-hopf") return Kind::extended_hopf;
    throw std::invalid_argument("unknown problem kind '" + s + "'");
}
inline bool is_extended(Kind k) { return k == Kind::extended_plain || k == Kind::extended_hopf; }

// Affine-in-x, affine-in-s scalar equation
//   <(1-s) phi0 + s phi1, x> - ((1-s) psi0 + s psi1).
struct GenPhase {
    IState phi0, phi1;
    Interval psi0, psi1;
    std::string role;  // "phase", "amplitude" or "continuation"

    bool s_independent() const { return phi0_equals_phi1 && psi0 == psi1; }
    bool phi0_equals_phi1 = false;

    template <class T, class S>
    T eval(const StatePoint<T>& x, const S& s) const {
        if constexpr (is_rigorous_v<T>) {
            Interval si(s);
            T a = pairing(phi0, x), b = pairing(phi1, x);
            return a + (b - a) * si - CInterval(psi0 + (psi1 - psi0) * si);
        } else {
            double sd = static_cast<double>(s);
            PointState q0 = to_mid(phi0), q1 = to_mid(phi1);
            cplx a = pairing(q0, x), b = pairing(q1, x);
            return a + (b - a) * sd - (psi0.mid() + (psi1.mid() - psi0.mid()) * sd);
        }
    }
    // phi_s as interval state (used for Jacobian rows)
    IState phi_at(const Interval& s) const {
        if (phi0_equals_phi1) return phi0;
        IState d = phi1 - phi0;
        IState r = phi0;
        for (int i = 0; i < r.n(); ++i)
            for (int k = -r.K(); k <= r.K(); ++k) r.seqs[i][k] += d.seqs[i][k] * s;
        for (int j = 0; j < r.m(); ++j) r.params[j] += d.params[j] * s;
        return r;
    }
};

inline bool is_zero_state(const IState& q) {
    for (const auto& s : q.seqs)
        for (const auto& c : s.data())
            if (!(c.re == Interval(0.0) && c.im == Interval(0.0))) return false;
    for (const auto& p : q.params)
        if (!(p.re == Interval(0.0) && p.im == Interval(0.0))) return false;
    return true;
}

inline GenPhase make_fixed_phase(IState q, Interval psi, std::string role) {
    if (is_zero_state(q)) throw std::invalid_argument("degenerate (zero) " + role + " vector");
    GenPhase g;
    g.phi0 = q;
    g.phi1 = std::move(q);
    g.psi0 = g.psi1 = psi;
    g.phi0_equals_phi1 = true;
    g.role = std::move(role);
    return g;
}

// q = conj(iK v_half), zero on parameters.
inline GenPhase build_phase(const PointState& x_half) {
    IState q = to_interval(x_half);
    for (auto& s : q.seqs) {
        auto t = apply_K(s, 1);
        for (int k = -t.K(); k <= t.K(); ++k) s[k] = conj(t[k]);
    }
    for (auto& p : q.params) p = CInterval(0.0);
    return make_fixed_phase(std::move(q), Interval(0.0), "phase");
}

// q = conj(K^2 v_half), psi = 1.
inline GenPhase build_amplitude(const PointState& x_half) {
    IState q = to_interval(x_half);
    for (auto& s : q.seqs) {
        auto t = apply_K(s, 2);
        for (int k = -t.K(); k <= t.K(); ++k) s[k] = conj(t[k]);
    }
    for (auto& p : q.params) p = CInterval(0.0);
    return make_fixed_phase(std::move(q), Interval(1.0), "amplitude");
}

// phi_ts = q_ts, psi_ts = <q_ts, x_ts>.
inline GenPhase build_continuation(const PointState& q0, const PointState& q1, const PointState& x0, const PointState& x1) {
    GenPhase g;
    g.phi0 = to_interval(q0);
    g.phi1 = to_interval(q1);
    if (is_zero_state(g.phi0) || is_zero_state(g.phi1)) throw std::invalid_argument("degenerate (zero) continuation vector");
    g.psi0 = pairing(g.phi0, to_interval(x0)).re;
    g.psi1 = pairing(g.phi1, to_interval(x1)).re;
    g.phi0_equals_phi1 = false;
    g.role = "continuation";
    return g;
}

namespace detail {
inline IState stack3(const IState& a, const IState& b, const IState& c) {
    IState r;
    for (const IState* p : {&a, &b, &c}) {
        r.seqs.insert(r.seqs.end(), p->seqs.begin(), p->seqs.end());
        r.params.insert(r.params.end(), p->params.begin(), p->params.end());
    }
    r.conj_symmetric = a.conj_symmetric && b.conj_symmetric && c.conj_symmetric;
    return r;
}
inline IState zero_like(const IState& a) { return a.scaled(CInterval(0.0)); }
}  // namespace detail

// The three equations obtained by differentiating G_s(x(s)) = 0 twice in s.
inline std::vector<GenPhase> extend_phases(const GenPhase& p) {
    using detail::stack3;
    IState z = detail::zero_like(p.phi0);
    IState d = p.phi1 - p.phi0;
    IState d2 = d.scaled(CInterval(2.0));
    Interval dpsi = p.psi1 - p.psi0;
    std::vector<GenPhase> r(3);
    r[0].phi0 = stack3(p.phi0, z, z);
    r[0].phi1 = stack3(p.phi1, z, z);
    r[0].psi0 = p.psi0;
    r[0].psi1 = p.psi1;
    r[1].phi0 = stack3(d, p.phi0, z);
    r[1].phi1 = stack3(d, p.phi1, z);
    r[1].psi0 = r[1].psi1 = dpsi;
    r[2].phi0 = stack3(z, d2, p.phi0);
    r[2].phi1 = stack3(z, d2, p.phi1);
    r[2].psi0 = r[2].psi1 = Interval(0.0);
    for (auto& g : r) {
        g.role = p.role;
        g.phi0_equals_phi1 = p.phi0_equals_phi1;
    }
    return r;
}

struct ScalarEq {
    enum class Type { phase, algebraic } type;
    int index;
};

// Index bookkeeping for the finite Galerkin space X_K.  Variables are grouped
// in `blocks` blocks (3 for extended kinds); inside a block the sequences come
// first, mode by mode, then the parameters.  Equations use the same layout.
class Layout {
public:
    Layout() = default;
    Layout(int n, int m, int K, int blocks) : n_(n), m_(m), K_(K), blocks_(blocks) {
        if (n % blocks || m % blocks) throw std::invalid_argument("layout: dimensions not divisible by block count");
        nb_ = n / blocks;
        mb_ = m / blocks;
        bs_ = nb_ * (2 * K + 1) + mb_;
    }
    int n() const { return n_; }
    int m() const { return m_; }
    int K() const { return K_; }
    int blocks() const { return blocks_; }
    int size() const { return blocks_ * bs_; }
    int block_size() const { return bs_; }
    int seq(int i, int k) const { return (i / nb_) * bs_ + (i % nb_) * (2 * K_ + 1) + k + K_; }
    int param(int j) const { return (j / mb_) * bs_ + nb_ * (2 * K_ + 1) + j % mb_; }
    int block_of_index(int idx) const { return idx / bs_; }
    int block_of_seq(int i) const { return i / nb_; }
    int block_of_param(int j) const { return j / mb_; }

    // component id (0..n-1 sequences, n..n+m-1 parameters) and mode
    std::vector<BlockIndex> index_map() const {
        std::vector<BlockIndex> r(size());
        for (int i = 0; i < n_; ++i)
            for (int k = -K_; k <= K_; ++k) r[seq(i, k)] = {i, k};
        for (int j = 0; j < m_; ++j) r[param(j)] = {n_ + j, 0};
        return r;
    }

    CVec pack(const PointState& x) const {
        CVec v(size());
        for (int i = 0; i < n_; ++i)
            for (int k = -K_; k <= K_; ++k) v(seq(i, k)) = x.seqs[i].at(k);
        for (int j = 0; j < m_; ++j) v(param(j)) = x.params[j];
        return v;
    }
    PointState unpack(const CVec& v, const PointState& like) const {
        PointState x(n_, m_, K_);
        x.labels = like.labels;
        for (int i = 0; i < n_; ++i)
            for (int k = -K_; k <= K_; ++k) x.seqs[i][k] = v(seq(i, k));
        for (int j = 0; j < m_; ++j) x.params[j] = v(param(j));
        return x;
    }

private:
    int n_ = 0, m_ = 0, K_ = 0, blocks_ = 1, nb_ = 0, mb_ = 0, bs_ = 0;
};

template <class T>
struct Residual {
    std::vector<FourierSeq<T>> F;
    std::vector<T> scalars;
};

// H_s = (F, G_s) together with everything needed to differentiate it.
class ProblemDef {
public:
    ProblemDef() = default;
    ProblemDef(Kind kind, PolyField h, PolyField g, std::vector<GenPhase> phases, std::vector<ScalarEq> order, int K, double nu,
               std::vector<std::string> param_names)
        : kind_(kind), h_(std::move(h)), g_(std::move(g)), phases_(std::move(phases)), order_(std::move(order)), K_(K), nu_(nu),
          param_names_(std::move(param_names)) {
        n_ = h_.n_state();
        m_ = h_.n_param();
        if (h_.n_out() != n_) throw std::invalid_argument("vector field must map R^n to R^n");
        if (g_.n_out() > 0 && (g_.n_state() != 0 || g_.n_param() != m_))
            throw std::invalid_argument("algebraic map must depend on parameters only");
        if (static_cast<int>(phases_.size()) + g_.n_out() != m_)
            throw std::invalid_argument("equation count does not balance: " + std::to_string(phases_.size()) + " phase + " +
                                        std::to_string(g_.n_out()) + " algebraic != " + std::to_string(m_) + " parameters");
        if (static_cast<int>(order_.size()) != m_) throw std::invalid_argument("scalar equation order has wrong length");
        if (K_ < 1) throw std::invalid_argument("K must be >= 1");
        if (!(nu_ >= 1.0)) throw std::invalid_argument("nu must be >= 1");
        blocks_ = is_extended(kind_) ? 3 : 1;
        layout_ = Layout(n_, m_, K_, blocks_);
        if (param_names_.size() != static_cast<size_t>(m_)) param_names_.resize(m_);
        for (int v = 0; v < n_ + m_; ++v) dh_.push_back(differentiate(h_, v));
        if (g_.n_out() > 0)
            for (int j = 0; j < m_; ++j) dg_.push_back(differentiate(g_, j));
    }

    Kind kind() const { return kind_; }
    const PolyField& field() const { return h_; }
    const PolyField& algebraic() const { return g_; }
    const std::vector<GenPhase>& phases() const { return phases_; }
    const std::vector<ScalarEq>& order() const { return order_; }
    int K() const { return K_; }
    double nu() const { return nu_; }
    int n() const { return n_; }
    int m() const { return m_; }
    int blocks() const { return blocks_; }
    const Layout& layout() const { return layout_; }
    const std::vector<std::string>& param_names() const { return param_names_; }
    const std::vector<PolyField>& dh() const { return dh_; }
    const std::vector<PolyField>& dg() const { return dg_; }
    int degree() const { return h_.max_state_degree(); }

    int phase_index(const std::string& role) const {
        for (size_t i = 0; i < phases_.size(); ++i)
            if (phases_[i].role == role) return static_cast<int>(i);
        return -1;
    }
    int param_index(const std::string& name) const {
        for (int j = 0; j < m_; ++j)
            if (param_names_[j] == name) return j;
        return -1;
    }

    // same problem with new K (phase vectors are zero padded / truncated)
    ProblemDef with_K(int K) const {
        auto ph = phases_;
        for (auto& p : ph) {
            p.phi0 = p.phi0.resized(K);
            p.phi1 = p.phi1.resized(K);
        }
        return ProblemDef(kind_, h_, g_, ph, order_, K, nu_, param_names_);
    }
    ProblemDef with_phases(std::vector<GenPhase> ph) const {
        return ProblemDef(kind_, h_, g_, std::move(ph), order_, K_, nu_, param_names_);
    }

private:
    Kind kind_ = Kind::plain;
    PolyField h_, g_;
    std::vector<GenPhase> phases_;
    std::vector<ScalarEq> order_;
    int K_ = 1;
    double nu_ = 1.0;
    std::vector<std::string> param_names_;
    int n_ = 0, m_ = 0, blocks_ = 1;
    Layout layout_;
    std::vector<PolyField> dh_, dg_;
};

inline std::vector<std::string> hopf_param_names(int n, const std::vector<std::string>& rest) {
    std::vector<std::string> r{"tau", "a"};
    for (int i = 1; i <= n; ++i) r.push_back("y" + std::to_string(i));
    r.insert(r.end(), rest.begin(), rest.end());
    return r;
}

// plain: f~ over (u; tau, mu), scalar equations (phase, continuation)
inline ProblemDef make_plain(const PolyField& ftilde, const GenPhase& phase, const GenPhase& cont, int K, double nu,
                             std::vector<std::string> names = {"tau", "mu"}) {
    return ProblemDef(Kind::plain, ftilde, PolyField(0, 0, ftilde.n_param()), {phase, cont},
                      {{ScalarEq::Type::phase, 0}, {ScalarEq::Type::phase, 1}}, K, nu, std::move(names));
}

// hopf: f-bar over (ubar; tau, a, y, mu), g = f(y, mu); (phase, amplitude, g rows, continuation)
inline ProblemDef make_hopf(const PolyField& fbar, const PolyField& g, const GenPhase& phase, const GenPhase& amp,
                            const GenPhase& cont, int K, double nu, std::vector<std::string> names = {}) {
    if (fbar.n_param() != 3 + fbar.n_state()) throw std::invalid_argument("hopf kind requires parameters (tau, a, y, mu)");
    std::vector<ScalarEq> order{{ScalarEq::Type::phase, 0}, {ScalarEq::Type::phase, 1}};
    for (int l = 0; l < g.n_out(); ++l) order.push_back({ScalarEq::Type::algebraic, l});
    order.push_back({ScalarEq::Type::phase, 2});
    if (names.empty()) names = hopf_param_names(fbar.n_state(), {"mu"});
    return ProblemDef(Kind::hopf, fbar, g, {phase, amp, cont}, order, K, nu, std::move(names));
}

// Second-order extension of a plain or hopf problem.
inline ProblemDef make_extended(const ProblemDef& base) {
    if (is_extended(base.kind())) throw std::invalid_argument("problem is already extended");
    auto ext = extend_second_order(base.field(), base.algebraic());
    const int P = static_cast<int>(base.phases().size());
    const int mg = base.algebraic().n_out();
    std::vector<GenPhase> ph(3 * P);
    for (int q = 0; q < P; ++q) {
        auto e = extend_phases(base.phases()[q]);
        for (int b = 0; b < 3; ++b) ph[b * P + q] = e[b];
    }
    std::vector<ScalarEq> order;
    for (int b = 0; b < 3; ++b)
        for (const auto& e : base.order())
            order.push_back(e.type == ScalarEq::Type::phase ? ScalarEq{e.type, b * P + e.index} : ScalarEq{e.type, b * mg + e.index});
    std::vector<std::string> names;
    for (int b = 0; b < 3; ++b)
        for (const auto& s : base.param_names()) names.push_back(b == 0 ? s : s + std::string(b, '\''));
    return ProblemDef(base.kind() == Kind::plain ? Kind::extended_plain : Kind::extended_hopf, ext.h, ext.g, ph, order, base.K(),
                      base.nu(), names);
}

// H_s(x) with F on its full support deg*K.
template <class T, class S>
Residual<T> eval_H(const ProblemDef& p, const StatePoint<T>& x, const S& s) {
    if (x.n() != p.n() || x.m() != p.m()) throw std::invalid_argument("eval_H: dimension mismatch");
    Residual<T> r;
    auto hh = eval_fourier(p.field(), x);
    for (int i = 0; i < p.n(); ++i) {
        FourierSeq<T> F = apply_K(x.seqs[i], 1).resized(hh[i].K());
        F -= hh[i];
        r.F.push_back(std::move(F));
    }
    std::vector<T> gv;
    if (p.algebraic().n_out() > 0) gv = eval_point<T>(p.algebraic(), {}, x.params);
    for (const auto& e : p.order()) {
        if (e.type == ScalarEq::Type::phase)
            r.scalars.push_back(p.phases()[e.index].template eval<T>(x, s));
        else
            r.scalars.push_back(gv[e.index]);
    }
    return r;
}

// Galerkin projection of H_s onto |k| <= K, packed by the layout.
inline CVec galerkin_residual(const ProblemDef& p, const PointState& x, double s) {
    auto r = eval_H<cplx>(p, x.resized(p.K()), s);
    const Layout& L = p.layout();
    CVec v(L.size());
    for (int i = 0; i < p.n(); ++i)
        for (int k = -p.K(); k <= p.K(); ++k) v(L.seq(i, k)) = r.F[i].at(k);
    for (int e = 0; e < p.m(); ++e) v(L.param(e)) = r.scalars[e];
    return v;
}

// Derivative data of the field at one point: ds[var][i] = d h_i / d x_var
// as a sequence, dgv[var][l] = d g_l / d lambda_var.
template <class T>
struct FieldDerivs {
    std::vector<std::vector<FourierSeq<T>>> ds;
    std::vector<std::vector<T>> dgv;
};

template <class T>
FieldDerivs<T> field_derivatives(const ProblemDef& p, const StatePoint<T>& x) {
    FieldDerivs<T> d;
    std::vector<FourierSeq<T>> vars(x.seqs.begin(), x.seqs.end());
    for (const auto& q : x.params) vars.push_back(FourierSeq<T>::constant(q));
    FieldEvaluator<FourierSeq<T>> ev(vars, FourierSeq<T>::constant(T(1.0)),
                                     [](const FourierSeq<T>& v, const Coeff& c) { return v.scaled(coeff_as<T>(c)); });
    for (const auto& f : p.dh()) d.ds.push_back(ev.eval(f));
    for (const auto& f : p.dg()) d.dgv.push_back(eval_point<T>(f, {}, x.params));
    return d;
}

// Fills the Galerkin Jacobian given derivative data.  `with_diag` adds the
// ik diagonal; `phase_rows(e)` returns the phase vector for scalar row e (or
// nullptr when that row is algebraic / absent at this order).
template <class T, class Set, class PhaseRow>
void assemble_jacobian(const ProblemDef& p, const FieldDerivs<T>& d, bool with_diag, PhaseRow&& phase_row, Set&& set) {
    const Layout& L = p.layout();
    const int n = p.n(), m = p.m(), K = p.K();
    for (int i = 0; i < n; ++i) {
        for (int k = -K; k <= K; ++k) {
            int row = L.seq(i, k);
            for (int ip = 0; ip < n; ++ip) {
                const auto& a = d.ds[ip][i];
                if (a.K() == 0 && a[0] == T(0.0) && !(with_diag && ip == i)) continue;
                for (int kp = -K; kp <= K; ++kp) {
                    T v = -a.at(k - kp);
                    if (with_diag && ip == i && kp == k) v += times_i(T(static_cast<double>(k)));
                    set(row, L.seq(ip, kp), v);
                }
            }
            for (int j = 0; j < m; ++j) set(row, L.param(j), -d.ds[n + j][i].at(k));
        }
    }
    for (int e = 0; e < m; ++e) {
        int row = L.param(e);
        const auto& eq = p.order()[e];
        if (eq.type == ScalarEq::Type::phase) {
            const StatePoint<T>* q = phase_row(eq.index);
            if (!q) continue;
            for (int i = 0; i < n; ++i)
                for (int k = -K; k <= K; ++k) set(row, L.seq(i, k), q->seqs[i].at(k));
            for (int j = 0; j < m; ++j) set(row, L.param(j), q->params[j]);
        } else if (!d.dgv.empty()) {
            for (int j = 0; j < m; ++j) set(row, L.param(j), d.dgv[j][eq.index]);
        }
    }
}

inline CMat galerkin_jacobian(const ProblemDef& p, const PointState& x, double s) {
    const Layout& L = p.layout();
    CMat J = CMat::Zero(L.size(), L.size());
    auto d = field_derivatives<cplx>(p, x.resized(p.K()));
    std::vector<PointState> rows;
    for (const auto& ph : p.phases()) rows.push_back(to_mid(ph.phi_at(Interval(s))));
    assemble_jacobian<cplx>(
        p, d, true, [&](int idx) { return &rows[idx]; }, [&](int r, int c, cplx v) { J(r, c) = v; });
    return J;
}

// Upper blocks (equation block b, variable block b' > b) vanish identically.
inline bool is_block_lower_triangular(const CMat& J, const Layout& L) {
    for (int r = 0; r < J.rows(); ++r)
        for (int c = 0; c < J.cols(); ++c)
            if (L.block_of_index(c) > L.block_of_index(r) && J(r, c) != cplx(0.0)) return false;
    return true;
}

}  // namespace hopfval
