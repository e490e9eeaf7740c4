#include <CLI11.hpp>

#include "hopfval/pipeline.hpp"

using namespace hopfval;

namespace {

int do_run(const std::string& path, int jobs, const std::string& out, const std::string& level) {
    RunConfig cfg;
    RunOptions ro;
    try {
        ro.level = log_level_from(level);
        cfg = parse_config(path);
    } catch (const ConfigError& e) {
        std::cerr << "[error] stage config failed: " << path << ": " << e.what() << "\n";
        return exit_config;
    }
    ro.jobs = std::max(1, jobs);
    ro.out_dir = out;
    RunResult r = run_pipeline(cfg, ro);
    if (r.exit_code == exit_ok) {
        for (const auto& v : r.summary["verdicts"]) {
            std::cout << v["type"].get<std::string>() << " verdict: ";
            if (v["type"] == "fold")
                std::cout << v["parameter"].get<std::string>() << " in [" << v["value"][0].get<std::string>() << ", "
                          << v["value"][1].get<std::string>() << "], direction " << v["direction"].get<std::string>() << "\n";
            else
                std::cout << "mu in [" << v["mu"][0].get<std::string>() << ", " << v["mu"][1].get<std::string>() << "], tau in ["
                          << v["tau"][0].get<std::string>() << ", " << v["tau"][1].get<std::string>() << "]\n";
        }
        std::cout << r.certs.size() << " certificates, " << r.glue.size() << " glue records\n";
    }
    return r.exit_code;
}

int do_recheck(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(io::read_file(path));
    } catch (const std::exception& e) {
        std::cerr << "[error] cannot read " << path << ": " << e.what() << "\n";
        return exit_config;
    }
    RecheckSummary s;
    try {
        s = recheck_file(doc, true);
    } catch (const std::exception& e) {
        std::cerr << "[error] malformed certificate file: " << e.what() << "\n";
        return exit_config;
    }
    for (const auto& l : s.lines) std::cout << l << "\n";
    std::cout << (s.ok ? "recheck passed" : "recheck FAILED") << "\n";
    return s.ok ? exit_ok : exit_validation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rigorous continuation of periodic orbits through Hopf bifurcations"};
    app.require_subcommand(1);

    std::string config, out, level = "info", cert;
    int jobs = 1;
    auto* run = app.add_subcommand("run", "run the pipeline described by a config");
    run->add_option("config", config, "TOML run configuration")->required();
    run->add_option("--jobs", jobs, "parallel candidate weightings per segment")->check(CLI::PositiveNumber);
    run->add_option("--out", out, "output directory (overrides outputs.dir)");
    run->add_option("--log-level", level, "error, warn, info or debug")->check(CLI::IsMember({"error", "warn", "info", "debug"}));

    auto* rc = app.add_subcommand("recheck", "re-verify the inequalities stored in a certificate file");
    rc->add_option("certificate", cert, "certificates.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }
    if (*run) return do_run(config, jobs, out, level);
    return do_recheck(cert);
}
