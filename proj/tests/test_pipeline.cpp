#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "hopfval/pipeline.hpp"

using namespace hopfval;
namespace fs = std::filesystem;

namespace {

const std::string src = HOPFVAL_SOURCE_DIR;

std::string config_text(const std::string& name) { return io::read_file(src + "/configs/" + name + ".toml"); }

// replace the first occurrence of a line fragment
std::string edit(std::string text, const std::string& from, const std::string& to) {
    auto p = text.find(from);
    if (p == std::string::npos) throw std::runtime_error("fragment not found: " + from);
    return text.replace(p, from.size(), to);
}

RunOptions quiet() {
    RunOptions o;
    o.level = LogLevel::error;
    o.write_files = false;
    return o;
}

fs::path scratch(const std::string& name) {
    fs::path d = fs::temp_directory_path() / ("hopfval_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int run_verify(const std::string& args) {
    std::string cmd = std::string(HOPFVAL_VERIFY_BIN) + " " + args + " > /dev/null 2>&1";
    int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

nlohmann::json without_timing(nlohmann::json j) {
    for (auto& c : j["certificates"]) c.erase("wall_time");
    return j;
}

}  // namespace

TEST(Config, ShippedConfigsParse) {
    for (const auto& e : fs::directory_iterator(src + "/configs")) {
        if (e.path().extension() != ".toml") continue;
        EXPECT_NO_THROW(parse_config(e.path().string())) << e.path();
    }
}

TEST(Config, MalformedExponentListNamesLineAndField) {
    std::string bad = edit(config_text("lorenz84_hopf2"), "u = [0, 0, 2, 0] }", "u = [0, 2, 0] }");
    try {
        parse_config_text(bad, "bad.toml");
        FAIL() << "expected a ConfigError";
    } catch (const ConfigError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("line 12"), std::string::npos) << msg;
        EXPECT_NE(msg.find("problem.field[1].u"), std::string::npos) << msg;
    }
    fs::path d = scratch("badcfg");
    io::write_file((d / "bad.toml").string(), bad);
    EXPECT_EQ(run_verify("run " + (d / "bad.toml").string() + " --out " + d.string()), 2);
}

TEST(Config, RejectsInvalidValues) {
    const std::string base = config_text("lorenz84_hopf2");
    EXPECT_THROW(parse_config_text(edit(base, "nu = 1.1", "nu = 0.9")), ConfigError);
    EXPECT_THROW(parse_config_text(edit(base, "K_init = 5", "K_init = 0")), ConfigError);
    EXPECT_THROW(parse_config_text(edit(base, "coeff = \"-0.25\"", "coeff = \"1/0\"")), ConfigError);
    EXPECT_THROW(parse_config_text(edit(base, "out = 3, coeff = \"-1.04\"", "out = 4, coeff = \"-1.04\"")), ConfigError);
    EXPECT_THROW(parse_config_text(edit(base, "type = \"hopf-scan\"", "type = \"guess\"")), ConfigError);
    EXPECT_THROW(log_level_from("loud"), ConfigError);
}

TEST(Config, HashTracksContent) {
    const std::string base = config_text("lorenz84_hopf2");
    auto a = parse_config_text(base), b = parse_config_text(base);
    auto c = parse_config_text(edit(base, "delta = 1e-3", "delta = 2e-3"));
    EXPECT_EQ(a.hash, b.hash);
    EXPECT_NE(a.hash, c.hash);
    EXPECT_EQ(a.hash.size(), 40u);
}

TEST(Cli, UsageErrorsExitWithConfigCode) {
    EXPECT_EQ(run_verify(""), 2);
    EXPECT_EQ(run_verify("run /nonexistent.toml"), 2);
    EXPECT_EQ(run_verify("run " + src + "/configs/lorenz84_hopf2.toml --jobs 0"), 2);
    EXPECT_EQ(run_verify("run " + src + "/configs/lorenz84_hopf2.toml --log-level loud"), 2);
    EXPECT_EQ(run_verify("recheck /nonexistent.json"), 2);
}

TEST(Pipeline, HopfRunWithShortLegChainsAndExportsCsv) {
    auto cfg = parse_config_text(config_text("lorenz84_hopf2") + "\n[continuation]\nmax_steps = 3\n");
    auto res = run_pipeline(cfg, quiet());
    ASSERT_EQ(res.exit_code, exit_ok) << res.stage << ": " << res.message;
    ASSERT_EQ(res.hopfs.size(), 1u);
    EXPECT_TRUE(res.hopfs[0].mu.intersects(Interval(0.010900160 - 3.1e-7, 0.010900160 + 3.1e-7)));
    ASSERT_EQ(res.certs.size(), 4u);
    ASSERT_EQ(res.chain.size(), 4u);
    EXPECT_EQ(res.chain[0].link, "start");
    EXPECT_EQ(res.chain[1].link, "overlap");
    EXPECT_EQ(res.chain[2].link, "shared");
    ASSERT_EQ(res.legs.size(), 1u);
    // three segments give four distinct points
    std::string csv = io::export_branch_csv(res.legs[0].second);
    std::istringstream is(csv);
    std::string line;
    int rows = 0;
    std::getline(is, line);
    EXPECT_EQ(line.rfind("index,segment,mu,tau,a", 0), 0u) << line;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 4);
    auto rc = recheck_file(certificates_json(cfg, res));
    EXPECT_TRUE(rc.ok);
}

TEST(Pipeline, RunsAreDeterministic) {
    fs::path d1 = scratch("det1"), d2 = scratch("det2");
    const std::string cfg = src + "/configs/lorenz84_hopf2.toml";
    ASSERT_EQ(run_verify("run " + cfg + " --out " + d1.string()), 0);
    ASSERT_EQ(run_verify("run " + cfg + " --out " + d2.string() + " --jobs 2"), 0);
    auto a = nlohmann::json::parse(io::read_file((d1 / "certificates.json").string()));
    auto b = nlohmann::json::parse(io::read_file((d2 / "certificates.json").string()));
    EXPECT_EQ(without_timing(a), without_timing(b));
    EXPECT_TRUE(fs::exists(d1 / "summary.json"));
    EXPECT_EQ(run_verify("recheck " + (d1 / "certificates.json").string()), 0);
}

TEST(Pipeline, EmptyScanWindowIsNumericalFailure) {
    auto cfg = parse_config_text(edit(config_text("lorenz84_hopf2"), "mu_range = [0.0, 0.02]", "mu_range = [0.03, 0.035]"));
    auto res = run_pipeline(cfg, quiet());
    EXPECT_EQ(res.exit_code, exit_numerical);
    EXPECT_EQ(res.stage, "hopf-point");
    EXPECT_EQ(res.summary["failed_stage"], "hopf-point");
}

TEST(Pipeline, StepUnderflowIsValidationFailure) {
    auto text = edit(config_text("lorenz84_hopf2"), "delta = 1e-3", "delta = 1e-3\nh_init = 5.0\nh_min = 3.0");
    auto cfg = parse_config_text(text + "\n[continuation]\nmax_steps = 2\n");
    auto res = run_pipeline(cfg, quiet());
    EXPECT_EQ(res.exit_code, exit_validation);
    EXPECT_EQ(res.stage, "continuation");
}

TEST(Recheck, TamperedFileFails) {
    auto cfg = parse_config_text(config_text("lorenz84_hopf2"));
    auto res = run_pipeline(cfg, quiet());
    ASSERT_EQ(res.exit_code, exit_ok);
    auto doc = certificates_json(cfg, res);
    ASSERT_TRUE(recheck_file(doc).ok);
    // claim a narrower Hopf enclosure than the certificate supports
    auto& v = doc["certificates"][0]["bifurcations"][0];
    ASSERT_EQ(v["type"], "hopf");
    v["mu"] = io::to_json(Interval(0.0200, 0.0201));
    EXPECT_FALSE(recheck_file(doc).ok);
    fs::path d = scratch("tamper");
    io::write_file((d / "c.json").string(), doc.dump());
    EXPECT_EQ(run_verify("recheck " + (d / "c.json").string()), 4);
}

TEST(Recheck, ShippedCertificates) {
    fs::path root = src + "/certificates";
    ASSERT_TRUE(fs::exists(root));
    int n = 0;
    for (const auto& e : fs::directory_iterator(root)) {
        fs::path f = e.path() / "certificates.json";
        if (!fs::exists(f)) continue;
        ++n;
        auto rc = recheck_file(nlohmann::json::parse(io::read_file(f.string())));
        EXPECT_TRUE(rc.ok) << f;
    }
    EXPECT_GE(n, 7);
}
