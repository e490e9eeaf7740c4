// Acceptance runner: one PASS/FAIL line per criterion.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>

#include "../tests/properties.hpp"
#include "hopfval/pipeline.hpp"

using namespace hopfval;
namespace fs = std::filesystem;

namespace {

const std::string src = HOPFVAL_SOURCE_DIR;

struct Check {
    bool ok = true;
    std::string detail;
    void require(bool c, const std::string& what) {
        if (!c) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string show(const Interval& I) { return "[" + format_down(I.lo()) + ", " + format_up(I.hi()) + "]"; }

Interval around(double c, double r) { return {c - r, c + r}; }

RunResult run(const std::string& name) {
    auto cfg = parse_config(src + "/configs/" + name + ".toml");
    RunOptions o;
    o.level = LogLevel::warn;
    o.write_files = false;
    return run_pipeline(cfg, o);
}

Check c1_rychkov() {
    Check c;
    auto r = run("rychkov");
    c.require(r.exit_code == exit_ok, "exit " + std::to_string(r.exit_code) + " " + r.message);
    c.require(r.folds.size() == 1 && r.folds[0].certified, "no certified fold");
    if (!r.folds.empty()) {
        const auto& v = r.folds[0].value;
        c.detail = "mu* in " + show(v);
        c.require(v.intersects(Interval(0.2248930, 0.2250170)), "misses reference");
        c.require(v.width() <= 5e-4, "too wide");
    }
    return c;
}

Check c2_hopf1() {
    Check c;
    auto r = run("lorenz84_hopf1");
    c.require(r.exit_code == exit_ok && r.hopfs.size() == 1, "run failed: " + r.message);
    if (r.hopfs.size() == 1) {
        const auto& v = r.hopfs[0].mu;
        c.detail = "mu* in " + show(v);
        c.require(v.intersects(around(0.05684121, 9.1e-6)), "misses reference");
        c.require(v.width() <= 1e-4, "too wide");
    }
    auto q = run("lorenz84_hopf1_refined");
    c.require(q.exit_code == exit_ok && q.hopfs.size() == 1, "refined run failed: " + q.message);
    if (q.hopfs.size() == 1) {
        const auto& v = q.hopfs[0].mu;
        c.detail += ", refined " + show(v);
        c.require(v.contains(0.056841207164), "refined misses reference");
        c.require(v.width() <= 1e-6, "refined too wide");
    }
    return c;
}

Check c3_hopf2() {
    Check c;
    auto r = run("lorenz84_hopf2");
    c.require(r.exit_code == exit_ok && r.hopfs.size() == 1, "run failed: " + r.message);
    if (r.hopfs.size() == 1) {
        const auto& v = r.hopfs[0].mu;
        c.detail = "mu* in " + show(v);
        c.require(v.intersects(around(0.010900160, 3.1e-7)), "misses reference");
        c.require(v.width() <= 1e-4, "too wide");
    }
    return c;
}

Check c4_hyperchaotic() {
    Check c;
    auto r = run("hyperchaotic");
    c.require(r.exit_code == exit_ok && r.hopfs.size() == 1, "run failed: " + r.message);
    if (r.hopfs.size() == 1) {
        const auto& v = r.hopfs[0];
        c.detail = "mu* in " + show(v.mu) + ", tau* in " + show(v.tau);
        c.require(v.mu.intersects(around(-1.01551372619, 2.5e-9)), "mu misses reference");
        c.require(v.mu.width() <= 1e-5, "mu too wide");
        c.require(v.tau.intersects(around(0.68299909941, 2.5e-9)), "tau misses reference");
    }
    return c;
}

// mu enclosure of a validated certificate over its whole segment
Interval mu_enclosure(const Certificate& c) {
    if (is_extended(c.problem.kind())) {
        const int mb = c.problem.m() / 3;
        return detail::ext_enclosure(detail::ext_param(c, mb - 1));
    }
    return detail::param_hull(c, c.problem.m() - 1);
}

Check c5_hamiltonian() {
    Check c;
    auto r = run("hamiltonian");
    c.require(r.exit_code == exit_ok && r.folds.size() == 1 && r.folds[0].certified, "run failed: " + r.message);
    if (r.folds.size() == 1) {
        const auto& v = r.folds[0].value;
        c.detail = "tau* in " + show(v);
        c.require(v.contains(1.0), "misses 1");
        c.require(v.width() <= 1e-3, "too wide");
    }
    int bad = 0;
    for (const auto& cert : r.certs)
        if (!mu_enclosure(cert).contains(0.0)) ++bad;
    c.require(!r.certs.empty() && bad == 0, std::to_string(bad) + " segments exclude mu = 0");
    c.detail += ", " + std::to_string(r.certs.size()) + " segments with mu ~ 0";
    return c;
}

Check c6_locator() {
    Check c;
    auto r = run("lorenz84_hopf1");
    c.require(!r.hopf_points.empty() && r.hopf_points[0].validated, "no validated Hopf point");
    if (!r.hopf_points.empty()) {
        const auto& h = r.hopf_points[0];
        const double ref[4] = {1.197556, -0.033525, 0.203229, -0.400337};
        for (int i = 0; i < 4; ++i) c.require(h.Iy[i].intersects(around(ref[i], 1.6e-4)), "y" + std::to_string(i + 1) + " misses");
        c.require(h.Ibeta.intersects(around(-0.5300219, 4.6e-5)), "eigenvalue misses");
        c.detail = "beta in " + show(h.Ibeta);
    }
    return c;
}

Check c7_properties() {
    Check c;
    auto add = [&](const std::string& name, const props::Outcome& o) {
        c.require(o.ok, name + ": " + o.detail);
    };
    add("interval", props::interval_properties(1, 10000));
    add("banach", props::banach_algebra(2, 1000));
    add("convolution", props::convolution_oracle(3, 200));
    add("conjugation", props::conj_equivariance(4, 10));
    add("extended-fd", props::extended_fd_oracle(5, 6));
    add("block-triangular", props::block_triangularity(6, 4));
    // Monte-Carlo subsumption on the two junctions of the balloon
    auto cfg = parse_config(src + "/configs/lorenz84_balloon.toml");
    RunOptions o;
    o.level = LogLevel::warn;
    o.write_files = false;
    auto r = run_pipeline(cfg, o);
    auto find = [&](const std::string& id) -> const Certificate* {
        for (const auto& x : r.certs)
            if (x.id == id) return &x;
        return nullptr;
    };
    auto g1h = find("glue1_hopf"), g1p = find("glue1_plain"), g2p = find("glue2_plain"), g2h = find("glue2_hopf");
    c.require(g1h && g1p && g2p && g2h, "balloon junction certificates missing");
    if (g1h && g1p && g2p && g2h) {
        add("glue1", props::glue_monte_carlo(*g1h, *g1p, true, true, 7, 2000));
        add("glue2", props::glue_monte_carlo(*g2h, *g2p, false, false, 8, 2000));
    }
    int files = 0;
    for (const auto& e : fs::directory_iterator(src + "/certificates")) {
        fs::path f = e.path() / "certificates.json";
        if (!fs::exists(f)) continue;
        ++files;
        auto rc = recheck_file(nlohmann::json::parse(io::read_file(f.string())));
        c.require(rc.ok, "recheck failed for " + f.parent_path().filename().string());
    }
    c.require(files >= 7, "expected 7 shipped certificate files");
    c.detail = std::to_string(files) + " shipped files rechecked" + (c.detail.empty() ? "" : "; " + c.detail);
    return c;
}

Check c8_balloon() {
    Check c;
    auto cfg = parse_config(src + "/configs/lorenz84_balloon.toml");
    RunOptions o;
    o.level = LogLevel::warn;
    o.write_files = false;
    auto r = run_pipeline(cfg, o);
    c.require(r.exit_code == exit_ok, "exit " + std::to_string(r.exit_code) + " " + r.message);
    int glued = 0;
    for (const auto& g : r.glue) glued += g.ok;
    c.require(r.glue.size() == 2 && glued == 2, "expected two true glue records");
    int hopf = 0;
    for (const auto& h : r.hopfs) hopf += h.certified;
    c.require(hopf == 2, "expected two Hopf verdicts");
    c.require(!r.chain.empty() && r.chain.size() == r.certs.size(), "chain does not cover every certificate");
    int glue_links = 0;
    for (size_t i = 1; i < r.chain.size(); ++i) {
        c.require(r.chain[i].link != "start", "chain broken at " + r.chain[i].id);
        glue_links += r.chain[i].link == "glue";
    }
    c.require(glue_links == 2, "expected two glue links");
    auto rc = recheck_file(certificates_json(cfg, r));
    c.require(rc.ok, "recheck failed");
    if (r.hopfs.size() == 2)
        c.detail = std::to_string(r.certs.size()) + " certificates, Hopf mu in " + show(r.hopfs[0].mu) + " and " + show(r.hopfs[1].mu);
    return c;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
        {"1 Rychkov fold", c1_rychkov},
        {"2 Lorenz-84 Hopf #1", c2_hopf1},
        {"3 Lorenz-84 Hopf #2", c3_hopf2},
        {"4 Hyperchaotic Hopf", c4_hyperchaotic},
        {"5 Hamiltonian fold in tau", c5_hamiltonian},
        {"6 Hopf point locator", c6_locator},
        {"7 Property suites and recheck", c7_properties},
        {"8 Balloon end to end", c8_balloon},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        Check c;
        try {
            c = fn();
        } catch (const std::exception& e) {
            c.ok = false;
            c.detail = std::string("exception: ") + e.what();
        }
        double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %s (%.1f s): %s\n", c.ok ? "PASS" : "FAIL", name.c_str(), s, c.detail.c_str());
        std::fflush(stdout);
        failed += !c.ok;
    }
    return failed == 0 ? 0 : 1;
}
