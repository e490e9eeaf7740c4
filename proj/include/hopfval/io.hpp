#pragma once

#include <boost/uuid/detail/sha1.hpp>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "gluing.hpp"

namespace hopfval::io {

using json = nlohmann::json;

// Exact shortest round-trip decimal of a double.
inline std::string exact(double x) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}
inline double parse_exact(const json& j) {
    if (j.is_number()) return j.get<double>();
    const std::string s = j.get<std::string>();
    double x = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw std::invalid_argument("bad number '" + s + "'");
    return x;
}

inline json to_json(const Interval& a) { return json::array({format_down(a.lo()), format_up(a.hi())}); }
// parse_down/parse_up widen once more, so the read interval contains the written one
inline Interval interval_from_json(const json& j) { return {parse_down(j.at(0).get<std::string>()), parse_up(j.at(1).get<std::string>())}; }

inline json to_json(const CInterval& z) {
    return json::array({format_down(z.re.lo()), format_up(z.re.hi()), format_down(z.im.lo()), format_up(z.im.hi())});
}
inline CInterval cinterval_from_json(const json& j) {
    return {Interval(parse_down(j.at(0).get<std::string>()), parse_up(j.at(1).get<std::string>())),
            Interval(parse_down(j.at(2).get<std::string>()), parse_up(j.at(3).get<std::string>()))};
}
// points keep their exact binary value: lo == hi
inline json to_json(const cplx& z) { return json::array({exact(z.real()), exact(z.real()), exact(z.imag()), exact(z.imag())}); }
inline cplx cplx_from_json(const json& j) {
    double re = parse_exact(j.at(0)), im = parse_exact(j.at(2));
    if (re != parse_exact(j.at(1)) || im != parse_exact(j.at(3))) throw std::invalid_argument("point coefficient is not degenerate");
    return {re, im};
}

inline json upper_bounds(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(format_up(x));
    return a;
}
inline std::vector<double> upper_bounds_from(const json& j) {
    std::vector<double> v;
    for (const auto& e : j) v.push_back(parse_up(e.get<std::string>()));
    return v;
}

template <class T>
json state_to_json(const StatePoint<T>& x, const std::vector<std::string>& names = {}) {
    json j;
    j["n"] = x.n();
    j["m"] = x.m();
    j["K"] = x.K();
    json seqs = json::array();
    for (const auto& s : x.seqs) {
        json c = json::array();
        for (int k = -s.K(); k <= s.K(); ++k) c.push_back(to_json(s[k]));
        seqs.push_back(c);
    }
    j["sequences"] = seqs;
    json ps = json::array();
    for (int p = 0; p < x.m(); ++p) {
        std::string nm = p < static_cast<int>(names.size()) ? names[p] : "p" + std::to_string(p);
        ps.push_back({{"name", nm}, {"value", to_json(x.params[p])}});
    }
    j["parameters"] = ps;
    return j;
}

template <class T>
StatePoint<T> state_from_json(const json& j) {
    int n = j.at("n"), m = j.at("m"), K = j.at("K");
    StatePoint<T> x(n, m, K);
    for (int i = 0; i < n; ++i) {
        const auto& c = j.at("sequences").at(i);
        if (static_cast<int>(c.size()) != 2 * K + 1) throw std::invalid_argument("sequence length does not match K");
        for (int k = -K; k <= K; ++k) {
            if constexpr (is_rigorous_v<T>)
                x.seqs[i][k] = cinterval_from_json(c.at(k + K));
            else
                x.seqs[i][k] = cplx_from_json(c.at(k + K));
        }
    }
    for (int p = 0; p < m; ++p) {
        const auto& v = j.at("parameters").at(p).at("value");
        if constexpr (is_rigorous_v<T>)
            x.params[p] = cinterval_from_json(v);
        else
            x.params[p] = cplx_from_json(v);
        x.labels.push_back(j.at("parameters").at(p).at("name"));
    }
    return x;
}

inline json coeff_to_json(const Coeff& c) {
    if (c.is_exact()) return c.exact()->str();
    return to_json(c.enclosure());
}
inline Coeff coeff_from_json(const json& j) {
    if (j.is_string()) return Coeff::parse(j.get<std::string>());
    return Coeff(interval_from_json(j));
}

inline json field_to_json(const PolyField& f) {
    json j;
    j["n_out"] = f.n_out();
    j["n_state"] = f.n_state();
    j["n_param"] = f.n_param();
    json terms = json::array();
    for (int i = 0; i < f.n_out(); ++i)
        for (const auto& m : f.component(i)) terms.push_back({{"out", i}, {"coeff", coeff_to_json(m.coeff)}, {"u", m.u}, {"p", m.p}});
    j["monomials"] = terms;
    return j;
}
inline PolyField field_from_json(const json& j) {
    PolyField f(j.at("n_out"), j.at("n_state"), j.at("n_param"));
    for (const auto& t : j.at("monomials"))
        f.add_term(t.at("out"), coeff_from_json(t.at("coeff")), t.at("u").get<std::vector<int>>(), t.at("p").get<std::vector<int>>());
    return f;
}

inline json phase_to_json(const GenPhase& g) {
    json j;
    j["role"] = g.role;
    j["phi0"] = state_to_json(g.phi0);
    j["s_dependent_vector"] = !g.phi0_equals_phi1;
    if (!g.phi0_equals_phi1) j["phi1"] = state_to_json(g.phi1);
    j["psi0"] = to_json(g.psi0);
    j["psi1"] = to_json(g.psi1);
    return j;
}
inline GenPhase phase_from_json(const json& j) {
    GenPhase g;
    g.role = j.at("role");
    g.phi0 = state_from_json<CInterval>(j.at("phi0"));
    g.phi0_equals_phi1 = !j.at("s_dependent_vector").get<bool>();
    g.phi1 = g.phi0_equals_phi1 ? g.phi0 : state_from_json<CInterval>(j.at("phi1"));
    g.psi0 = interval_from_json(j.at("psi0"));
    g.psi1 = interval_from_json(j.at("psi1"));
    return g;
}

inline json problem_to_json(const ProblemDef& p) {
    json j;
    j["kind"] = kind_name(p.kind());
    j["K"] = p.K();
    j["nu"] = exact(p.nu());
    j["parameter_names"] = p.param_names();
    j["field"] = field_to_json(p.field());
    j["algebraic"] = field_to_json(p.algebraic());
    json ph = json::array();
    for (const auto& g : p.phases()) ph.push_back(phase_to_json(g));
    j["scalar_equations"] = ph;
    json ord = json::array();
    for (const auto& e : p.order()) ord.push_back({{"type", e.type == ScalarEq::Type::phase ? "phase" : "algebraic"}, {"index", e.index}});
    j["order"] = ord;
    return j;
}
inline ProblemDef problem_from_json(const json& j) {
    std::vector<GenPhase> ph;
    for (const auto& g : j.at("scalar_equations")) ph.push_back(phase_from_json(g));
    std::vector<ScalarEq> ord;
    for (const auto& e : j.at("order"))
        ord.push_back({e.at("type") == "phase" ? ScalarEq::Type::phase : ScalarEq::Type::algebraic, e.at("index").get<int>()});
    return ProblemDef(kind_from_name(j.at("kind")), field_from_json(j.at("field")), field_from_json(j.at("algebraic")), std::move(ph),
                      std::move(ord), j.at("K"), parse_exact(j.at("nu")), j.at("parameter_names").get<std::vector<std::string>>());
}

inline json certificate_to_json(const Certificate& c, const std::string& config_hash = "") {
    json j;
    j["id"] = c.id;
    j["config_hash"] = config_hash;
    j["problem"] = problem_to_json(c.problem);
    j["K"] = c.problem.K();
    j["nu"] = exact(c.problem.nu());
    j["x0"] = state_to_json(c.x0, c.problem.param_names());
    j["x1"] = state_to_json(c.x1, c.problem.param_names());
    json w = json::array();
    for (double x : c.weights) w.push_back(exact(x));
    j["weights"] = w;
    j["r_hat"] = exact(c.r_hat);
    j["r_max"] = exact(c.r_max);
    j["s_pieces"] = c.s_pieces;
    j["Y"] = upper_bounds(c.bounds.Y);
    json Z = json::array();
    for (const auto& row : c.bounds.Z) Z.push_back(upper_bounds(row));
    j["Z"] = Z;
    j["checks"] = {{"smoothness", c.checks.smoothness}, {"phase_shift", c.checks.phase_shift}, {"injectivity", c.checks.injectivity}};
    j["wall_time"] = c.wall_time;
    j["bifurcations"] = json::array();
    return j;
}

inline Certificate certificate_from_json(const json& j) {
    Certificate c;
    c.id = j.at("id");
    c.problem = problem_from_json(j.at("problem"));
    c.x0 = state_from_json<cplx>(j.at("x0"));
    c.x1 = state_from_json<cplx>(j.at("x1"));
    c.x0.conj_symmetric = c.x1.conj_symmetric = true;
    for (const auto& w : j.at("weights")) c.weights.push_back(parse_exact(w));
    c.r_hat = parse_exact(j.at("r_hat"));
    c.r_max = parse_exact(j.at("r_max"));
    c.s_pieces = j.at("s_pieces");
    c.bounds.Y = upper_bounds_from(j.at("Y"));
    for (const auto& row : j.at("Z")) c.bounds.Z.push_back(upper_bounds_from(row));
    c.checks.smoothness = j.at("checks").at("smoothness");
    c.checks.phase_shift = j.at("checks").at("phase_shift");
    c.checks.injectivity = j.at("checks").at("injectivity");
    c.wall_time = j.value("wall_time", 0.0);
    if (c.x0.K() != c.problem.K() || c.x1.K() != c.problem.K()) throw std::invalid_argument("endpoint K differs from problem K");
    return c;
}

inline json verdict_to_json(const FoldVerdict& v) {
    return {{"type", "fold"},
            {"certified", v.certified},
            {"parameter", v.param_name},
            {"parameter_index", v.param},
            {"direction", direction_name(v.direction)},
            {"value", to_json(v.value)},
            {"source", v.source},
            {"reason", v.reason}};
}
inline json verdict_to_json(const HopfVerdict& v) {
    json y = json::array();
    for (const auto& e : v.y) y.push_back(to_json(e));
    return {{"type", "hopf"},
            {"certified", v.certified},
            {"a_crossing", v.a_crossing},
            {"direction", direction_name(v.direction)},
            {"mu", to_json(v.mu)},
            {"tau", to_json(v.tau)},
            {"y", y},
            {"source", v.source},
            {"reason", v.reason}};
}

inline json glue_to_json(const GlueRecord& g) {
    return {{"hopf_id", g.hopf_id}, {"plain_id", g.plain_id}, {"a", exact(g.a)},       {"vbar_norm", format_up(g.vbar_norm)},
            {"r_hopf", exact(g.r_hopf)}, {"r_plain", exact(g.r_plain)}, {"gap", format_up(g.gap)}, {"margin", to_json(g.margin)},
            {"ok", g.ok}};
}

inline json hopf_point_to_json(const HopfPoint& h) {
    auto iv = [](const std::vector<Interval>& v) {
        json a = json::array();
        for (const auto& e : v) a.push_back(to_json(e));
        return a;
    };
    return {{"validated", h.validated}, {"radius", format_up(h.radius)}, {"mu", to_json(h.Imu)}, {"beta", to_json(h.Ibeta)},
            {"y", iv(h.Iy)},           {"y1", iv(h.Iy1)},                 {"y2", iv(h.Iy2)},     {"reason", h.reason}};
}

// git-style object hash ("blob <size>\0<content>")
inline std::string git_hash(const std::string& content) {
    boost::uuids::detail::sha1 sha;
    std::string head = "blob " + std::to_string(content.size()) + '\0';
    sha.process_bytes(head.data(), head.size());
    sha.process_bytes(content.data(), content.size());
    boost::uuids::detail::sha1::digest_type d;
    sha.get_digest(d);
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (auto w : d) {
        if constexpr (sizeof(w) == 1)
            os << std::setw(2) << static_cast<unsigned>(static_cast<unsigned char>(w));
        else
            os << std::setw(8) << static_cast<std::uint32_t>(w);
    }
    return os.str();
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

// One CSV row per distinct branch point; consecutive certificates share an
// endpoint, which is written once.  Norms are upper bounds.
inline std::string export_branch_csv(const std::vector<Certificate>& certs) {
    if (certs.empty()) throw std::invalid_argument("cannot export an empty branch");
    const auto& p0 = certs.front().problem;
    bool hopf = p0.kind() == Kind::hopf || p0.kind() == Kind::extended_hopf;
    const int n = is_extended(p0.kind()) ? p0.n() / 3 : p0.n();
    std::ostringstream os;
    os << "index,segment,mu,tau";
    if (hopf) os << ",a";
    for (int i = 1; i <= n; ++i) os << ",norm_v" << i;
    os << ",r_hat\n";
    // equal up to exact zero padding
    auto same = [](const PointState& a, const PointState& b) {
        if (a.n() != b.n() || a.m() != b.m()) return false;
        const int K = std::max(a.K(), b.K());
        for (int i = 0; i < a.n(); ++i)
            if (a.seqs[i].resized(K).data() != b.seqs[i].resized(K).data()) return false;
        return a.params == b.params;
    };
    int idx = 0;
    auto row = [&](const Certificate& c, const PointState& x, int seg) {
        const auto& names = c.problem.param_names();
        auto pv = [&](const std::string& nm) {
            for (size_t j = 0; j < names.size(); ++j)
                if (names[j] == nm) return exact(x.params[j].real());
            return std::string();
        };
        os << idx++ << ',' << seg << ',' << pv("mu") << ',' << pv("tau");
        if (hopf) os << ',' << pv("a");
        IState xi = to_interval(x);
        NuWeights w(c.problem.nu(), x.K());
        for (int i = 0; i < n; ++i) os << ',' << format_up(nu_norm(xi.seqs[i], w).hi());
        os << ',' << exact(c.r_hat) << '\n';
    };
    for (size_t s = 0; s < certs.size(); ++s) {
        if (s == 0 || !same(certs[s - 1].x1, certs[s].x0)) row(certs[s], certs[s].x0, static_cast<int>(s));
        row(certs[s], certs[s].x1, static_cast<int>(s));
    }
    return os.str();
}

}  // namespace hopfval::io
