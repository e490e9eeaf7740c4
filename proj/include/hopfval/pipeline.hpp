#pragma once

#include <filesystem>
#include <iostream>

#include <toml.hpp>

#include "io.hpp"
#include "seed.hpp"

namespace hopfval {

// ---------------------------------------------------------------------------
// Run configuration (TOML).

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string name = "run";
    std::string mode;  // continue | fold | hopf | hopf-to-hopf
    std::string kind = "plain";
    std::vector<std::string> state_names;
    std::string param_name = "mu";
    PolyField field;

    int K_init = 5, K_cap = 80, K_min = 3;
    double nu = 1.1;
    double h_init = 1e-3, h_min = 1e-10, h_max = 0.1;
    int max_steps = 100;
    bool adapt_K = true;
    double newton_tol = 1e-12;
    double delta = 1e-3;   // half-length of extended segments
    double glue_h = 1e-3;  // step on each side of a junction

    std::string seed_type;
    std::vector<double> equilibrium;  // hopf-scan
    double scan_lo = 0.0, scan_hi = 0.0;
    int scan_steps = 60;
    int beta_sign = 1;
    std::vector<double> u0;  // integrate
    double seed_mu = 0.0;
    IntegrateOptions integrate;
    std::string series_file;  // time-series
    double series_period = 0.0;

    int direction = 1;
    std::string stop_param;
    double stop_lo = -1e300, stop_hi = 1e300;
    std::string fold_param;

    double glue_mu = 0.0, plain_stop_mu = 0.0;
    std::vector<double> far_equilibrium;
    int far_max_steps = 200;

    std::string out_dir;
    std::string source_path;
    std::string hash;
};

namespace detail {

inline std::string where(const toml::node& n, const std::string& field) {
    const auto& src = n.source();
    std::string s = "line " + std::to_string(src.begin.line);
    return s + ", field '" + field + "'";
}

template <class T>
T req(const toml::table& t, const std::string& key, const std::string& path) {
    const toml::node* n = t.get(key);
    if (!n) throw ConfigError("missing field '" + path + key + "'");
    if constexpr (std::is_same_v<T, double>) {
        if (auto v = n->value<double>()) return *v;
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (auto v = n->value<std::string>()) return *v;
    } else if constexpr (std::is_same_v<T, bool>) {
        if (auto v = n->value<bool>()) return *v;
    } else {
        if (n->is_integer()) return static_cast<T>(n->as_integer()->get());
    }
    throw ConfigError(where(*n, path + key) + ": wrong type");
}

template <class T>
T opt(const toml::table& t, const std::string& key, const std::string& path, T dflt) {
    return t.contains(key) ? req<T>(t, key, path) : dflt;
}

inline std::vector<double> num_list(const toml::table& t, const std::string& key, const std::string& path) {
    const toml::node* n = t.get(key);
    if (!n) throw ConfigError("missing field '" + path + key + "'");
    const toml::array* a = n->as_array();
    if (!a) throw ConfigError(where(*n, path + key) + ": expected an array of numbers");
    std::vector<double> v;
    for (const auto& e : *a) {
        auto d = e.value<double>();
        if (!d) throw ConfigError(where(e, path + key) + ": expected a number");
        v.push_back(*d);
    }
    return v;
}

inline const toml::table& sub(const toml::table& t, const std::string& key, bool required = true) {
    static const toml::table empty;
    const toml::node* n = t.get(key);
    if (!n) {
        if (required) throw ConfigError("missing section [" + key + "]");
        return empty;
    }
    if (!n->is_table()) throw ConfigError(where(*n, key) + ": expected a table");
    return *n->as_table();
}

// monomial list {out, coeff, u, p}
inline PolyField parse_field(const toml::table& prob, int n, int m) {
    const toml::node* fn = prob.get("field");
    if (!fn) throw ConfigError("missing field 'problem.field'");
    const toml::array* arr = fn->as_array();
    if (!arr || arr->empty()) throw ConfigError(where(*fn, "problem.field") + ": expected a nonempty array of monomials");
    PolyField f(n, n, m);
    int idx = 0;
    for (const auto& e : *arr) {
        std::string path = "problem.field[" + std::to_string(idx++) + "]";
        const toml::table* t = e.as_table();
        if (!t) throw ConfigError(where(e, path) + ": expected an inline table {out, coeff, u, p}");
        int out = req<int>(*t, "out", path + ".");
        if (out < 0 || out >= n) throw ConfigError(where(*t->get("out"), path + ".out") + ": output index out of range");
        Coeff c;
        const toml::node* cn = t->get("coeff");
        if (!cn) throw ConfigError(where(*t, path) + ": missing 'coeff'");
        try {
            if (auto s = cn->value<std::string>())
                c = Coeff::parse(*s);
            else if (cn->is_integer())
                c = Coeff(static_cast<std::int64_t>(cn->as_integer()->get()));
            else if (auto d = cn->value<double>())
                c = Coeff::from_double(*d);
            else
                throw std::invalid_argument("expected a number or a rational string");
        } catch (const std::invalid_argument& ex) {
            throw ConfigError(where(*cn, path + ".coeff") + ": " + ex.what());
        }
        auto exps = [&](const char* key, int len) {
            const toml::node* xn = t->get(key);
            std::string p = path + "." + key;
            if (!xn) {
                if (std::string(key) == "p") return std::vector<int>(len, 0);
                throw ConfigError(where(*t, path) + ": missing exponent list '" + key + "'");
            }
            const toml::array* xa = xn->as_array();
            if (!xa) throw ConfigError(where(*xn, p) + ": expected an array of exponents");
            if (static_cast<int>(xa->size()) != len)
                throw ConfigError(where(*xn, p) + ": expected " + std::to_string(len) + " exponents, got " + std::to_string(xa->size()));
            std::vector<int> v;
            for (const auto& x : *xa) {
                if (!x.is_integer() || x.as_integer()->get() < 0)
                    throw ConfigError(where(x, p) + ": exponents must be nonnegative integers");
                v.push_back(static_cast<int>(x.as_integer()->get()));
            }
            return v;
        };
        f.add_term(out, c, exps("u", n), exps("p", m));
    }
    return f;
}

}  // namespace detail

inline RunConfig parse_config_text(const std::string& text, const std::string& source = "config") {
    RunConfig c;
    c.source_path = source;
    c.hash = io::git_hash(text);
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        throw ConfigError("line " + std::to_string(e.source().begin.line) + ": " + std::string(e.description()));
    }
    using detail::opt;
    using detail::req;
    c.name = opt<std::string>(root, "name", "", c.name);
    c.mode = req<std::string>(root, "mode", "");
    if (c.mode != "continue" && c.mode != "fold" && c.mode != "hopf" && c.mode != "hopf-to-hopf")
        throw ConfigError(detail::where(*root.get("mode"), "mode") + ": expected continue, fold, hopf or hopf-to-hopf");

    const auto& prob = detail::sub(root, "problem");
    c.kind = opt<std::string>(prob, "kind", "problem.", "plain");
    if (c.kind != "plain" && c.kind != "hopf") throw ConfigError("problem.kind must be plain or hopf");
    const toml::node* sn = prob.get("state");
    if (!sn || !sn->is_array()) throw ConfigError("problem.state must list the state variable names");
    for (const auto& e : *sn->as_array()) {
        auto s = e.value<std::string>();
        if (!s) throw ConfigError(detail::where(e, "problem.state") + ": expected strings");
        c.state_names.push_back(*s);
    }
    const toml::node* pn = prob.get("parameters");
    if (!pn || !pn->is_array() || pn->as_array()->size() != 1 || !pn->as_array()->get(0)->value<std::string>())
        throw ConfigError("problem.parameters must name exactly one continuation parameter");
    c.param_name = *pn->as_array()->get(0)->value<std::string>();
    c.field = detail::parse_field(prob, static_cast<int>(c.state_names.size()), 1);

    const auto& num = detail::sub(root, "numerics", false);
    c.K_init = opt<int>(num, "K_init", "numerics.", c.K_init);
    c.K_cap = opt<int>(num, "K_cap", "numerics.", c.K_cap);
    c.K_min = opt<int>(num, "K_min", "numerics.", c.K_min);
    c.nu = opt<double>(num, "nu", "numerics.", c.nu);
    c.h_init = opt<double>(num, "h_init", "numerics.", c.h_init);
    c.h_min = opt<double>(num, "h_min", "numerics.", c.h_min);
    c.h_max = opt<double>(num, "h_max", "numerics.", c.h_max);
    c.max_steps = opt<int>(num, "max_steps", "numerics.", c.max_steps);
    c.adapt_K = opt<bool>(num, "adapt_K", "numerics.", c.adapt_K);
    c.newton_tol = opt<double>(num, "newton_tol", "numerics.", c.newton_tol);
    c.delta = opt<double>(num, "delta", "numerics.", c.delta);
    c.glue_h = opt<double>(num, "glue_h", "numerics.", c.glue_h);
    if (!(c.nu >= 1.0)) throw ConfigError("numerics.nu must be >= 1");
    if (c.K_init < 1) throw ConfigError("numerics.K_init must be >= 1");
    if (c.K_cap < c.K_init) throw ConfigError("numerics.K_cap must be >= K_init");
    if (!(c.h_init > 0.0) || !(c.h_min > 0.0) || !(c.delta > 0.0)) throw ConfigError("step sizes must be positive");

    const auto& seed = detail::sub(root, "seed");
    c.seed_type = req<std::string>(seed, "type", "seed.");
    if (c.seed_type == "hopf-scan") {
        c.equilibrium = detail::num_list(seed, "equilibrium", "seed.");
        auto r = detail::num_list(seed, "mu_range", "seed.");
        if (r.size() != 2) throw ConfigError("seed.mu_range must have two entries");
        c.scan_lo = r[0];
        c.scan_hi = r[1];
        c.scan_steps = opt<int>(seed, "steps", "seed.", c.scan_steps);
        c.beta_sign = opt<int>(seed, "beta_sign", "seed.", c.beta_sign);
        if (c.beta_sign != 1 && c.beta_sign != -1) throw ConfigError("seed.beta_sign must be 1 or -1");
        if (c.equilibrium.size() != c.state_names.size()) throw ConfigError("seed.equilibrium has wrong dimension");
    } else if (c.seed_type == "integrate") {
        c.u0 = detail::num_list(seed, "u0", "seed.");
        c.seed_mu = req<double>(seed, "mu", "seed.");
        c.integrate.dt = opt<double>(seed, "dt", "seed.", c.integrate.dt);
        c.integrate.transient = opt<double>(seed, "transient", "seed.", c.integrate.transient);
        c.integrate.samples = opt<int>(seed, "samples", "seed.", c.integrate.samples);
        if (c.u0.size() != c.state_names.size()) throw ConfigError("seed.u0 has wrong dimension");
    } else if (c.seed_type == "time-series") {
        c.series_file = req<std::string>(seed, "file", "seed.");
        c.series_period = req<double>(seed, "period", "seed.");
        c.seed_mu = req<double>(seed, "mu", "seed.");
    } else {
        throw ConfigError("seed.type must be hopf-scan, integrate or time-series");
    }
    bool hopf_seed = c.seed_type == "hopf-scan";
    if ((c.mode == "hopf" || c.mode == "hopf-to-hopf") && !hopf_seed) throw ConfigError("mode '" + c.mode + "' needs a hopf-scan seed");
    if (c.mode == "continue" && (c.kind == "hopf") != hopf_seed)
        throw ConfigError("problem.kind '" + c.kind + "' is not consistent with seed type '" + c.seed_type + "'");

    const auto& cont = detail::sub(root, "continuation", false);
    c.direction = opt<int>(cont, "direction", "continuation.", c.direction);
    c.stop_param = opt<std::string>(cont, "stop_param", "continuation.", "");
    c.stop_lo = opt<double>(cont, "stop_lo", "continuation.", c.stop_lo);
    c.stop_hi = opt<double>(cont, "stop_hi", "continuation.", c.stop_hi);
    if (c.mode == "hopf" && !cont.contains("max_steps"))
        c.max_steps = 0;
    else
        c.max_steps = opt<int>(cont, "max_steps", "continuation.", c.max_steps);

    if (c.mode == "fold") {
        const auto& fold = detail::sub(root, "fold", false);
        c.fold_param = opt<std::string>(fold, "parameter", "fold.", c.param_name);
    }
    if (c.mode == "hopf-to-hopf") {
        const auto& b = detail::sub(root, "balloon");
        c.glue_mu = req<double>(b, "glue_mu", "balloon.");
        c.plain_stop_mu = req<double>(b, "plain_stop_mu", "balloon.");
        c.far_equilibrium = detail::num_list(b, "far_equilibrium", "balloon.");
        c.far_max_steps = opt<int>(b, "max_steps", "balloon.", c.far_max_steps);
        if (c.far_equilibrium.size() != c.state_names.size()) throw ConfigError("balloon.far_equilibrium has wrong dimension");
    }
    const auto& out = detail::sub(root, "outputs", false);
    c.out_dir = opt<std::string>(out, "dir", "outputs.", "out/" + c.name);
    return c;
}

inline RunConfig parse_config(const std::string& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    auto c = parse_config_text(text, path);
    if (c.seed_type == "time-series" && !c.series_file.empty() && std::filesystem::path(c.series_file).is_relative())
        c.series_file = (std::filesystem::path(path).parent_path() / c.series_file).string();
    return c;
}

// ---------------------------------------------------------------------------
// Pipelines.

enum ExitCode { exit_ok = 0, exit_config = 2, exit_numerical = 3, exit_validation = 4 };

struct Stage : std::runtime_error {
    std::string stage;
    int code;
    Stage(std::string s, int c, const std::string& msg) : std::runtime_error(msg), stage(std::move(s)), code(c) {}
};

enum class LogLevel { error, warn, info, debug };
inline LogLevel log_level_from(const std::string& s) {
    if (s == "error") return LogLevel::error;
    if (s == "warn") return LogLevel::warn;
    if (s == "info") return LogLevel::info;
    if (s == "debug") return LogLevel::debug;
    throw ConfigError("unknown log level '" + s + "'");
}

struct RunOptions {
    std::string out_dir;  // overrides the config
    int jobs = 1;
    LogLevel level = LogLevel::info;
    bool write_files = true;
};

// Everything produced by a run, in chain order.
struct ChainEntry {
    std::string id;
    std::string link;  // relation to the previous entry: start, shared, glue, overlap
};

struct RunResult {
    int exit_code = exit_ok;
    std::string stage, message;
    std::vector<Certificate> certs;
    std::map<std::string, nlohmann::json> bifurcations;  // certificate id -> verdict list
    std::vector<GlueRecord> glue;
    std::vector<ChainEntry> chain;
    std::vector<std::pair<std::string, std::vector<Certificate>>> legs;  // branch legs for CSV
    nlohmann::json summary;
    std::vector<FoldVerdict> folds;
    std::vector<HopfVerdict> hopfs;
    std::vector<HopfPoint> hopf_points;
};

namespace detail {

struct Runner {
    const RunConfig& cfg;
    RunOptions ro;
    RunResult res;
    PolyField f;
    BranchSetup plain, hopf;

    void log(LogLevel l, const std::string& s) const {
        static const char* names[] = {"error", "warn", "info", "debug"};
        if (l <= ro.level) std::cerr << "[" << names[static_cast<int>(l)] << "] " << s << "\n";
    }
    std::function<void(const std::string&)> debug_log() const {
        return [this](const std::string& s) { log(LogLevel::debug, s); };
    }

    Runner(const RunConfig& c, RunOptions o) : cfg(c), ro(std::move(o)), f(c.field) {
        plain.kind = Kind::plain;
        plain.field = tilde(f);
        plain.names = {"tau", cfg.param_name};
        plain.nu = cfg.nu;
        plain.monitor = cfg.param_name;
        const int n = f.n_state();
        hopf.kind = Kind::hopf;
        hopf.field = desingularize(tilde(f));
        hopf.algebraic = equilibrium_map(f);
        hopf.names = hopf_param_names(n, {cfg.param_name});
        hopf.nu = cfg.nu;
        hopf.monitor = cfg.param_name;
    }

    ValidatorOptions vopt() const {
        ValidatorOptions v;
        v.jobs = ro.jobs;
        return v;
    }
    NewtonOptions nopt() const {
        NewtonOptions n;
        n.tol = cfg.newton_tol;
        return n;
    }
    BranchOptions bopt() const {
        BranchOptions b;
        b.h_init = cfg.h_init;
        b.h_min = cfg.h_min;
        b.h_max = cfg.h_max;
        b.max_steps = cfg.max_steps;
        b.K_cap = cfg.K_cap;
        b.K_min = std::min(cfg.K_min, cfg.K_init);
        b.adapt_K = cfg.adapt_K;
        b.stop_param = cfg.stop_param;
        b.stop_lo = cfg.stop_lo;
        b.stop_hi = cfg.stop_hi;
        b.validator = vopt();
        b.newton = nopt();
        b.log = debug_log();
        return b;
    }
    ExtendedSegmentOptions eopt() const {
        ExtendedSegmentOptions e;
        e.delta = cfg.delta;
        e.validator = vopt();
        e.newton = nopt();
        e.log = debug_log();
        return e;
    }
    GlueOptions gopt() const {
        GlueOptions g;
        g.h = cfg.glue_h;
        g.validator = vopt();
        g.newton = nopt();
        g.log = debug_log();
        return g;
    }

    template <class F>
    auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
        log(LogLevel::info, "stage " + name);
        try {
            return fn();
        } catch (const Stage&) {
            throw;
        } catch (const SeedError& e) {
            throw Stage(name, exit_numerical, e.what());
        } catch (const NewtonFailure& e) {
            throw Stage(name, exit_numerical, e.what());
        } catch (const SingularJacobian& e) {
            throw Stage(name, exit_numerical, e.what());
        } catch (const std::exception& e) {
            throw Stage(name, exit_numerical, e.what());
        }
    }

    void add_cert(Certificate c, const std::string& link) {
        res.chain.push_back({c.id, res.chain.empty() ? "start" : link});
        res.certs.push_back(std::move(c));
    }
    void add_leg(const std::string& prefix, BranchResult& br, const std::string& first_link) {
        for (size_t i = 0; i < br.certs.size(); ++i) {
            br.certs[i].id = prefix + "_" + std::to_string(i);
            add_cert(br.certs[i], i == 0 ? first_link : "shared");
        }
        res.legs.emplace_back(prefix, br.certs);
    }

    HopfPoint hopf_point(const std::vector<double>& guess, double lo, double hi, int beta_sign) {
        return stage("hopf-point", [&] {
            Eigen::VectorXd y0 = Eigen::Map<const Eigen::VectorXd>(guess.data(), static_cast<Eigen::Index>(guess.size()));
            y0 = solve_equilibrium(f, y0, lo);
            auto seed = scan_hopf(f, y0, lo, hi, cfg.scan_steps, beta_sign);
            if (!seed) throw Stage("hopf-point", exit_numerical, "no eigenvalue pair crosses the imaginary axis in the scan window");
            HopfPoint hp = locate_hopf_point(f, *seed);
            if (!hp.validated) throw Stage("hopf-point", exit_validation, "Hopf point not validated: " + hp.reason);
            res.hopf_points.push_back(hp);
            return hp;
        });
    }

    HopfVerdict hopf_verdict(const BranchPoint& at_zero, const std::string& id) {
        auto hr = stage("hopf-verdict", [&] { return localize_hopf(hopf, at_zero, eopt()); });
        if (!hr.segment.ok || !hr.verdict.certified)
            throw Stage("hopf-verdict", exit_validation, "Hopf bifurcation not certified: " + hr.verdict.reason);
        hr.segment.cert.id = id;
        hr.verdict.source = id;
        res.hopfs.push_back(hr.verdict);
        res.bifurcations[id].push_back(io::verdict_to_json(hr.verdict));
        add_cert(hr.segment.cert, "overlap");
        log(LogLevel::info, "Hopf verdict certified: mu in [" + format_down(hr.verdict.mu.lo()) + ", " + format_up(hr.verdict.mu.hi()) + "]");
        return hr.verdict;
    }

    BranchPoint plain_start() {
        return stage("seed", [&] {
            PointState x;
            if (cfg.seed_type == "integrate") {
                x = integrate_orbit(f, cfg.u0, cfg.seed_mu, cfg.K_init, cfg.integrate);
            } else {
                auto rows = read_time_series(cfg.series_file, f.n_state(), cfg.series_period);
                x = orbit_from_samples(rows, cfg.series_period, cfg.seed_mu, cfg.K_init);
            }
            return initialize_branch(plain, x, cfg.param_name, cfg.param_name, cfg.direction, nopt());
        });
    }

    BranchPoint hopf_start(const HopfPoint& hp) {
        return stage("seed", [&] { return initialize_branch(hopf, hopf_seed_state(hp, cfg.K_init), "a", "a", cfg.direction, nopt()); });
    }

    BranchResult branch(const BranchSetup& b, const BranchPoint& start, BranchOptions o, const std::string& name) {
        auto br = stage(name, [&] { return continue_branch(b, start, o); });
        log(LogLevel::info, name + ": " + std::to_string(br.certs.size()) + " segments, " + br.stop_reason);
        if (!br.ok) throw Stage(name, exit_validation, "continuation stopped: " + br.stop_reason);
        return br;
    }

    void run_continue() {
        if (cfg.kind == "plain") {
            auto br = branch(plain, plain_start(), bopt(), "continuation");
            add_leg("seg", br, "start");
        } else {
            auto hp = hopf_point(cfg.equilibrium, cfg.scan_lo, cfg.scan_hi, cfg.beta_sign);
            auto br = branch(hopf, hopf_start(hp), bopt(), "continuation");
            add_leg("seg", br, "start");
        }
        if (res.certs.empty()) throw Stage("continuation", exit_validation, "no segment was validated");
    }

    void run_fold() {
        if (cfg.seed_type == "hopf-scan") {
            // fold of a parameter of the desingularized family at a = 0
            auto hp = hopf_point(cfg.equilibrium, cfg.scan_lo, cfg.scan_hi, cfg.beta_sign);
            BranchPoint st = hopf_start(hp);
            int j = hopf_param_index(cfg.fold_param);
            auto accept = [j](const Certificate& c, std::string* why) {
                auto v = check_fold(c, j);
                if (!v.certified) {
                    if (why) *why = v.reason;
                    return false;
                }
                if (!check_hopf(c).a_crossing) {
                    if (why) *why = "amplitude crossing not verified";
                    return false;
                }
                return true;
            };
            auto seg = stage("fold-verdict", [&] { return extended_segment(hopf, st.x, st.t, eopt(), accept); });
            if (!seg.ok) throw Stage("fold-verdict", exit_validation, "fold not certified: " + seg.failure);
            seg.cert.id = "fold_" + cfg.fold_param;
            FoldVerdict v = check_fold(seg.cert, j);
            res.folds.push_back(v);
            res.bifurcations[seg.cert.id].push_back(io::verdict_to_json(v));
            nlohmann::json ac = {{"type", "amplitude-crossing"}, {"certified", check_hopf(seg.cert).a_crossing}};
            res.bifurcations[seg.cert.id].push_back(ac);
            add_cert(seg.cert, "start");
            log(LogLevel::info, "fold verdict certified: " + cfg.fold_param + " in [" + format_down(v.value.lo()) + ", " +
                                    format_up(v.value.hi()) + "]");
            if (cfg.max_steps > 0) {
                auto br = branch(hopf, st, bopt(), "continuation");
                add_leg("seg", br, "overlap");
            }
            return;
        }
        BranchOptions o = bopt();
        o.stop_at_fold = true;
        BranchSetup b = plain;
        b.monitor = cfg.fold_param;
        auto br = branch(b, plain_start(), o, "continuation");
        add_leg("seg", br, "start");
        if (br.fold_segments.empty()) throw Stage("fold-detection", exit_validation, "no fold detected along the branch");
        auto fr = stage("fold-verdict", [&] { return localize_fold(b, br, br.fold_segments[0], cfg.fold_param, eopt()); });
        if (!fr.segment.ok || !fr.verdict.certified) throw Stage("fold-verdict", exit_validation, "fold not certified: " + fr.verdict.reason);
        res.folds.push_back(fr.verdict);
        res.bifurcations[fr.segment.cert.id].push_back(io::verdict_to_json(fr.verdict));
        add_cert(fr.segment.cert, "overlap");
        log(LogLevel::info, "fold verdict certified: " + cfg.fold_param + " in [" + format_down(fr.verdict.value.lo()) + ", " +
                                format_up(fr.verdict.value.hi()) + "]");
    }

    int hopf_param_index(const std::string& name) const {
        for (size_t j = 0; j < hopf.names.size(); ++j)
            if (hopf.names[j] == name) return static_cast<int>(j);
        throw Stage("config", exit_config, "unknown parameter '" + name + "'");
    }

    void crossing(const HopfPoint& hp) {
        auto cd = stage("crossing-direction", [&] { return eigen_crossing_direction(f, hp); });
        res.summary["crossing_direction"].push_back({{"validated", cd.validated},
                                                     {"gamma_prime", io::to_json(cd.gamma_prime)},
                                                     {"sign", cd.sign},
                                                     {"reason", cd.reason}});
    }

    void run_hopf() {
        auto hp = hopf_point(cfg.equilibrium, cfg.scan_lo, cfg.scan_hi, cfg.beta_sign);
        crossing(hp);
        BranchPoint st = hopf_start(hp);
        hopf_verdict(st, "hopf");
        if (cfg.max_steps > 0) {
            auto br = branch(hopf, st, bopt(), "continuation");
            add_leg("seg", br, "overlap");
        }
    }

    void run_balloon() {
        const int n = f.n_state();
        auto hp = hopf_point(cfg.equilibrium, cfg.scan_lo, cfg.scan_hi, cfg.beta_sign);
        crossing(hp);
        BranchPoint st = hopf_start(hp);
        hopf_verdict(st, "hopf_first");

        // hopf leg until mu passes the junction value
        BranchOptions o1 = bopt();
        const double mu0 = hp.mu;
        o1.stop_param = cfg.param_name;
        (cfg.glue_mu < mu0 ? o1.stop_lo : o1.stop_hi) = cfg.glue_mu;
        auto leg1 = branch(hopf, st, o1, "hopf-leg-1");
        if (leg1.stop_reason.rfind("parameter", 0) != 0) throw Stage("hopf-leg-1", exit_validation, "junction value of mu not reached");
        add_leg("hopf1", leg1, "overlap");

        auto g1 = stage("glue-1", [&] { return glue_hopf_to_plain(hopf, plain, leg1.points.back(), gopt()); });
        if (!g1.ok) throw Stage("glue-1", exit_validation, "glue to the plain system failed: " + g1.failure);
        g1.hopf_cert.id = "glue1_hopf";
        g1.plain_cert.id = "glue1_plain";
        g1.record.hopf_id = g1.hopf_cert.id;
        g1.record.plain_id = g1.plain_cert.id;
        add_cert(g1.hopf_cert, "shared");
        add_cert(g1.plain_cert, "glue");
        res.glue.push_back(g1.record);

        BranchOptions o2 = bopt();
        o2.stop_param = cfg.param_name;
        const double mu1 = g1.next.x.params[1].real();
        (cfg.plain_stop_mu < mu1 ? o2.stop_lo : o2.stop_hi) = cfg.plain_stop_mu;
        auto leg2 = branch(plain, g1.next, o2, "plain-leg");
        if (leg2.stop_reason.rfind("parameter", 0) != 0) throw Stage("plain-leg", exit_validation, "end value of mu not reached");
        add_leg("plain", leg2, "shared");

        auto g2 = stage("glue-2", [&] { return glue_plain_to_hopf(plain, hopf, f, leg2.points.back(), cfg.far_equilibrium, gopt()); });
        if (!g2.ok) throw Stage("glue-2", exit_validation, "glue to the desingularized system failed: " + g2.failure);
        g2.hopf_cert.id = "glue2_hopf";
        g2.plain_cert.id = "glue2_plain";
        g2.record.hopf_id = g2.hopf_cert.id;
        g2.record.plain_id = g2.plain_cert.id;
        add_cert(g2.plain_cert, "shared");
        add_cert(g2.hopf_cert, "glue");
        res.glue.push_back(g2.record);

        // second hopf leg until the amplitude changes sign
        BranchOptions o3 = bopt();
        o3.max_steps = cfg.far_max_steps;
        o3.stop_param = "a";
        const double a0 = g2.next.x.params[1].real();
        (a0 > 0.0 ? o3.stop_lo : o3.stop_hi) = 0.0;
        auto leg3 = branch(hopf, g2.next, o3, "hopf-leg-2");
        if (leg3.stop_reason.rfind("parameter", 0) != 0) throw Stage("hopf-leg-2", exit_validation, "amplitude did not return to zero");
        add_leg("hopf2", leg3, "shared");

        PointState guess = leg3.points.back().x;
        guess.params[1] = 0.0;
        BranchPoint st2 = stage("seed", [&] { return initialize_branch(hopf, guess, "a", "a", a0 > 0.0 ? -1 : 1, nopt()); });
        {
            // the far Hopf point from the zero-amplitude orbit
            HopfPoint s;
            s.y = Eigen::VectorXd(n);
            Eigen::VectorXcd w(n);
            for (int i = 0; i < n; ++i) {
                s.y(i) = st2.x.params[2 + i].real();
                w(i) = 2.0 * st2.x.seqs[i][1];
            }
            s.mu = st2.x.params[2 + n].real();
            s.beta = 1.0 / st2.x.params[0].real();
            s.y1 = w.real();
            s.y2 = w.imag();
            Eigen::VectorXcd phi = w.conjugate() / w.squaredNorm();
            s.phi1 = phi.real();
            s.phi2 = phi.imag();
            HopfPoint hp2 = stage("hopf-point", [&] { return locate_hopf_point(f, s); });
            if (!hp2.validated) throw Stage("hopf-point", exit_validation, "far Hopf point not validated: " + hp2.reason);
            res.hopf_points.push_back(hp2);
            crossing(hp2);
        }
        hopf_verdict(st2, "hopf_second");
    }

    void run() {
        if (cfg.mode == "continue")
            run_continue();
        else if (cfg.mode == "fold")
            run_fold();
        else if (cfg.mode == "hopf")
            run_hopf();
        else
            run_balloon();
    }
};

}  // namespace detail

inline nlohmann::json certificates_json(const RunConfig& cfg, const RunResult& r) {
    nlohmann::json j;
    j["format"] = "hopfval-certificates/1";
    j["name"] = cfg.name;
    j["mode"] = cfg.mode;
    j["config_hash"] = cfg.hash;
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : r.certs) {
        auto cj = io::certificate_to_json(c, cfg.hash);
        if (auto it = r.bifurcations.find(c.id); it != r.bifurcations.end()) cj["bifurcations"] = it->second;
        cs.push_back(std::move(cj));
    }
    j["certificates"] = cs;
    nlohmann::json g = nlohmann::json::array();
    for (const auto& rec : r.glue) g.push_back(io::glue_to_json(rec));
    j["glue_records"] = g;
    nlohmann::json ch = nlohmann::json::array();
    for (const auto& e : r.chain) ch.push_back({{"id", e.id}, {"link", e.link}});
    j["chain"] = ch;
    return j;
}

inline RunResult run_pipeline(const RunConfig& cfg, const RunOptions& ro = {}) {
    detail::Runner rn(cfg, ro);
    auto& res = rn.res;
    res.summary["crossing_direction"] = nlohmann::json::array();
    try {
        rn.run();
    } catch (const Stage& s) {
        res.exit_code = s.code;
        res.stage = s.stage;
        res.message = s.what();
        rn.log(LogLevel::error, "stage " + s.stage + " failed: " + s.what());
    } catch (const std::exception& e) {
        res.exit_code = exit_numerical;
        res.stage = "internal";
        res.message = e.what();
        rn.log(LogLevel::error, std::string("internal failure: ") + e.what());
    }
    auto& S = res.summary;
    S["name"] = cfg.name;
    S["mode"] = cfg.mode;
    S["config_hash"] = cfg.hash;
    S["exit_code"] = res.exit_code;
    S["failed_stage"] = res.stage;
    S["message"] = res.message;
    S["certificate_count"] = res.certs.size();
    nlohmann::json v = nlohmann::json::array();
    for (const auto& fv : res.folds) v.push_back(io::verdict_to_json(fv));
    for (const auto& hv : res.hopfs) v.push_back(io::verdict_to_json(hv));
    S["verdicts"] = v;
    nlohmann::json hp = nlohmann::json::array();
    for (const auto& h : res.hopf_points) hp.push_back(io::hopf_point_to_json(h));
    S["hopf_points"] = hp;
    nlohmann::json g = nlohmann::json::array();
    for (const auto& rec : res.glue) g.push_back(io::glue_to_json(rec));
    S["glue_records"] = g;

    if (ro.write_files) {
        namespace fs = std::filesystem;
        fs::path dir = ro.out_dir.empty() ? fs::path(cfg.out_dir) : fs::path(ro.out_dir);
        fs::create_directories(dir);
        io::write_file((dir / "certificates.json").string(), certificates_json(cfg, res).dump(1) + "\n");
        io::write_file((dir / "summary.json").string(), S.dump(2) + "\n");
        for (const auto& [name, certs] : res.legs) {
            if (certs.empty()) continue;
            std::string file = res.legs.size() == 1 ? "branch.csv" : "branch_" + name + ".csv";
            io::write_file((dir / file).string(), io::export_branch_csv(certs));
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Independent re-verification of a certificates file.

struct RecheckSummary {
    bool ok = true;
    std::vector<std::string> lines;
    void fail(const std::string& s) {
        ok = false;
        lines.push_back("FAIL " + s);
    }
    void pass(const std::string& s) { lines.push_back("ok   " + s); }
};

namespace detail {

// bitwise equality up to exact zero padding (the mode count may grow at a
// shared endpoint)
inline bool same_point(const PointState& a, const PointState& b) {
    if (a.n() != b.n() || a.m() != b.m()) return false;
    const int K = std::max(a.K(), b.K());
    PointState ra = a.resized(K), rb = b.resized(K);
    for (int i = 0; i < a.n(); ++i)
        if (ra.seqs[i].data() != rb.seqs[i].data()) return false;
    return a.params == b.params;
}

// parameter box of a segment: endpoint hull padded by the component radius
inline Interval param_hull(const Certificate& c, int j) {
    double r = BlockScale::radius(c, c.problem.n() + j);
    double a = c.x0.params[j].real(), b = c.x1.params[j].real();
    return {rnd::sub_down(std::min(a, b), r), rnd::add_up(std::max(a, b), r)};
}

// the extended certificate's base-parameter boxes meet the neighbour's boxes
inline bool overlaps(const Certificate& ext, const Certificate& c) {
    const int mb = ext.problem.m() / 3;
    if (c.problem.m() != mb || is_extended(c.problem.kind())) return false;
    for (int j = 0; j < mb; ++j) {
        Interval e = ext_enclosure(ext_param(ext, j)), h = param_hull(c, j);
        if (e.hi() < h.lo() || h.hi() < e.lo()) return false;
    }
    return true;
}

}  // namespace detail

inline RecheckSummary recheck_file(const nlohmann::json& doc, bool full = true) {
    RecheckSummary out;
    std::vector<Certificate> certs;
    std::vector<nlohmann::json> raw;
    if (doc.contains("certificates")) {
        for (const auto& c : doc.at("certificates")) raw.push_back(c);
    } else {
        raw.push_back(doc);
    }
    std::map<std::string, size_t> by_id;
    for (const auto& cj : raw) {
        Certificate c = io::certificate_from_json(cj);
        auto r = recheck(c, full);
        std::string tag = "certificate " + c.id;
        // the stored check flags must be reproduced, and smoothness must hold
        bool flags = r.smoothness && r.phase_shift == c.checks.phase_shift;
        if (!r.ok() || !flags) {
            out.fail(tag + ": radii " + (r.radii ? "ok" : "violated") + ", at r_max " + (r.radii_at_max ? "ok" : "violated") +
                     ", recomputed " + (r.recomputed ? (r.recomputed_ok ? "ok" : "violated") : "skipped") + ", smoothness " +
                     (r.smoothness ? "ok" : "violated") + ", phase shift " + (r.phase_shift == c.checks.phase_shift ? "ok" : "differs"));
        } else {
            out.pass(tag);
        }
        for (const auto& v : cj.value("bifurcations", nlohmann::json::array())) {
            const std::string type = v.at("type");
            if (type == "fold") {
                auto fv = check_fold(c, v.at("parameter_index").get<int>());
                Interval stored = io::interval_from_json(v.at("value"));
                bool good = fv.certified == v.at("certified").get<bool>() && stored.lo() <= fv.value.lo() && fv.value.hi() <= stored.hi();
                good ? out.pass(tag + " fold verdict") : out.fail(tag + " fold verdict does not re-verify: " + fv.reason);
            } else if (type == "hopf") {
                auto hv = check_hopf(c);
                Interval stored = io::interval_from_json(v.at("mu"));
                bool good = hv.certified == v.at("certified").get<bool>() && stored.lo() <= hv.mu.lo() && hv.mu.hi() <= stored.hi();
                good ? out.pass(tag + " hopf verdict") : out.fail(tag + " hopf verdict does not re-verify: " + hv.reason);
            } else if (type == "amplitude-crossing") {
                bool good = check_hopf(c).a_crossing == v.at("certified").get<bool>();
                good ? out.pass(tag + " amplitude crossing") : out.fail(tag + " amplitude crossing does not re-verify");
            }
        }
        by_id[c.id] = certs.size();
        certs.push_back(std::move(c));
    }
    if (!doc.contains("certificates")) return out;

    for (const auto& g : doc.value("glue_records", nlohmann::json::array())) {
        std::string h = g.at("hopf_id"), p = g.at("plain_id");
        if (!by_id.count(h) || !by_id.count(p)) {
            out.fail("glue " + h + "/" + p + ": unknown certificate");
            continue;
        }
        const Certificate &ch = certs[by_id[h]], &cp = certs[by_id[p]];
        // the junction is the hopf end facing the plain segment in chain order
        bool hopf_first = true;
        const auto& ch_list = doc.value("chain", nlohmann::json::array());
        for (size_t i = 0; i + 1 < ch_list.size(); ++i)
            if (ch_list[i].at("id") == p && ch_list[i + 1].at("id") == h) hopf_first = false;
        const PointState& xb = hopf_first ? ch.x1 : ch.x0;
        const PointState& xp = hopf_first ? cp.x0 : cp.x1;
        GlueRecord rec = check_inclusion(xb.params[glue_idx::a].real(), max_seq_norm(xb, ch.problem.nu()), ch.r_hat, cp.r_max,
                                         junction_gap(xb, xp, cp.problem.nu()));
        rec.ok ? out.pass("glue " + h + " -> " + p) : out.fail("glue " + h + " -> " + p + ": inclusion does not re-verify");
    }

    // chain connectivity
    const auto& chain = doc.value("chain", nlohmann::json::array());
    for (size_t i = 1; i < chain.size(); ++i) {
        std::string a = chain[i - 1].at("id"), b = chain[i].at("id"), link = chain[i].at("link");
        if (!by_id.count(a) || !by_id.count(b)) {
            out.fail("chain " + a + " -> " + b + ": unknown certificate");
            continue;
        }
        const Certificate &ca = certs[by_id[a]], &cb = certs[by_id[b]];
        bool good = false;
        if (link == "shared") {
            good = detail::same_point(ca.x1, cb.x0);
        } else if (link == "glue") {
            for (const auto& g : doc.value("glue_records", nlohmann::json::array()))
                if ((g.at("hopf_id") == a && g.at("plain_id") == b) || (g.at("hopf_id") == b && g.at("plain_id") == a)) good = true;
        } else if (link == "overlap") {
            if (is_extended(ca.problem.kind()))
                good = detail::overlaps(ca, cb);
            else if (is_extended(cb.problem.kind()))
                good = detail::overlaps(cb, ca);
        }
        good ? out.pass("chain " + a + " -> " + b + " (" + link + ")") : out.fail("chain " + a + " -> " + b + " (" + link + ") not connected");
    }
    return out;
}

}  // namespace hopfval
