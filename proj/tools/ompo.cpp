#include "ompo/harness/config.hpp"
#include "ompo/harness/experiment.hpp"
#include "ompo/harness/golden.hpp"
#include "ompo/harness/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace {

using namespace ompo;

struct RunArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::vector<std::uint64_t> seeds;
    std::string ablation;
    std::string out;
    std::vector<std::string> overrides;
    bool no_checkpoint = false;
};

harness::ScenarioConfig resolve(const RunArgs& a) {
    auto cfg = harness::parse_config(a.config_path);
    for (const auto& kv : a.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw harness::ConfigError("--set expects key=value, got '" + kv + "'");
        harness::apply_override(cfg, harness::detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
    }
    if (!a.ablation.empty()) harness::apply_override(cfg, "ablation", a.ablation);
    if (a.seed) cfg.seed = *a.seed;
    if (!a.out.empty()) cfg.output_dir = a.out;
    cfg.validate();
    return cfg;
}

std::string summary(const harness::ScenarioConfig& cfg, const harness::ExperimentResult& r) {
    std::ostringstream os;
    os << "seed " << cfg.seed << ": final return " << harness::detail::fmt(r.final_return) << ", "
       << r.log.counters.merge_events << " merges, metrics " << r.metrics_path.string();
    if (!r.ok())
        for (const auto& f : r.invariant_failures) os << "\n  invariant failed: " << f;
    os << "\n";
    return os.str();
}

int run_one(const harness::ScenarioConfig& cfg, bool checkpoint) {
    harness::ExperimentOptions opt;
    opt.write_checkpoint = checkpoint;
    const auto result = harness::run_experiment(cfg, opt);
    const auto text = summary(cfg, result);
    // single write so concurrent children never interleave within a line
    if (::write(STDOUT_FILENO, text.data(), text.size()) < 0) return 1;
    return result.ok() ? 0 : 2;
}

int cmd_run(const RunArgs& a) {
    const auto base = resolve(a);
    if (a.seeds.empty()) return run_one(base, !a.no_checkpoint);

    std::vector<pid_t> children;
    for (auto s : a.seeds) {
        auto cfg = base;
        cfg.seed = s;
        cfg.output_dir = (std::filesystem::path(base.output_dir) / ("seed_" + std::to_string(s))).string();
        std::fflush(nullptr);
        const pid_t pid = ::fork();
        if (pid < 0) throw std::runtime_error("fork failed");
        if (pid == 0) {
            int code = 1;
            try {
                code = run_one(cfg, !a.no_checkpoint);
            } catch (const std::exception& e) {
                std::cerr << "seed " << s << ": " << e.what() << "\n";
            }
            std::fflush(nullptr);
            ::_exit(code);
        }
        children.push_back(pid);
    }
    int worst = 0;
    for (auto pid : children) {
        int status = 0;
        ::waitpid(pid, &status, 0);
        const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 1;
        worst = std::max(worst, code);
    }
    return worst;
}

int cmd_verify(std::uint64_t seed) {
    const auto results = harness::run_verify_suite(seed);
    std::size_t width = 0;
    for (const auto& r : results) width = std::max(width, r.name.size());
    bool all = true;
    for (const auto& r : results) {
        all = all && r.passed;
        std::cout << (r.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(static_cast<int>(width)) << r.name
                  << "  " << r.detail << "  (" << std::fixed << std::setprecision(2) << r.seconds << " s)\n";
    }
    std::cout << (all ? "all checks passed" : "some checks failed") << "\n";
    return all ? 0 : 1;
}

int cmd_compare(const std::string& metrics, const std::string& golden, double abs_tol, double rel_tol) {
    harness::GoldenTolerances tol{{abs_tol, rel_tol}, {abs_tol, rel_tol}};
    const auto report = harness::golden_compare(metrics, golden, tol);
    for (const auto& m : report.mismatches) std::cout << m << "\n";
    std::cout << (report.passed ? "PASS" : "FAIL") << ": " << report.rows_compared << " rows compared, "
              << report.mismatches.size() << " mismatches\n";
    return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
    // Large matrices otherwise go through mmap/munmap on every update step.
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
    CLI::App app{"Occupancy-matching policy optimization: training runs, self-checks and golden comparison"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Train one configuration and write metrics, manifest and checkpoint");
    run_cmd->add_option("config", run.config_path, "Scenario config file")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--seed", run.seed, "Override the config seed");
    run_cmd->add_option("--seeds", run.seeds, "Fork one independent run per seed into <out>/seed_<N>")
        ->delimiter(',');
    run_cmd->add_option("--ablation", run.ablation, "none | no-discriminator | raw-reward");
    run_cmd->add_option("--out", run.out, "Output directory (overrides output.dir)");
    run_cmd->add_option("--set", run.overrides, "Override a config key, key=value (repeatable)");
    run_cmd->add_flag("--no-checkpoint", run.no_checkpoint, "Skip writing the final checkpoint");

    std::uint64_t verify_seed = 2024;
    auto* verify_cmd = app.add_subcommand("verify", "Run the oracle, conjugate and gradient checks");
    verify_cmd->add_option("--seed", verify_seed, "Seed for the random fixtures");

    std::string metrics, golden;
    double abs_tol = 1e-6, rel_tol = 1e-6;
    auto* compare_cmd = app.add_subcommand("compare", "Compare a metrics CSV against a golden CSV");
    compare_cmd->add_option("metrics", metrics, "Metrics CSV")->required();
    compare_cmd->add_option("golden", golden, "Golden CSV")->required();
    compare_cmd->add_option("--abs", abs_tol, "Absolute tolerance for real-valued columns");
    compare_cmd->add_option("--rel", rel_tol, "Relative tolerance for real-valued columns");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run_cmd) return cmd_run(run);
        if (*verify_cmd) return cmd_verify(verify_seed);
        if (*compare_cmd) return cmd_compare(metrics, golden, abs_tol, rel_tol);
    } catch (const harness::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 3;
    } catch (const harness::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
