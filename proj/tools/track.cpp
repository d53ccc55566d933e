// track: scenario runner, metrics recomputation and config validation.

#include "bmdtrack/config.hpp"
#include "bmdtrack/runner.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAllFailed = 3;
constexpr int kExitOther = 1;

void print_aggregate(const std::filesystem::path& out) {
    std::ifstream in(out / "aggregate.csv");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) std::cout << "  " << line << '\n';
}

int finish(const std::filesystem::path& out, int reps, int failed) {
    std::cout << "wrote " << out.string() << " (" << reps << " replications, " << failed << " failed)\n";
    print_aggregate(out);
    if (failed == reps) {
        std::cerr << "error: every replication failed\n";
        return kExitAllFailed;
    }
    return kExitOk;
}

int replication_count(const std::filesystem::path& out) {
    std::ifstream in(out / "run.json");
    return bmd::io::json::parse(in).at("reps").get<int>();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ballistic multi-target tracking simulator"};
    app.require_subcommand(1);

    std::string scenario, filter, out;
    int reps = 1, jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::uint64_t seed = 1;

    CLI::App* run = app.add_subcommand("run", "Run a scenario and write logs and metrics");
    run->add_option("--scenario", scenario, "Scenario JSON file")->required();
    run->add_option("--filter", filter, "Override the tracker filter")->check(CLI::IsMember({"ekf", "ukf"}));
    run->add_option("--reps", reps, "Replication count")->check(CLI::PositiveNumber);
    run->add_option("--seed", seed, "Base seed");
    run->add_option("--out", out, "Output directory")->required();
    run->add_option("--jobs", jobs, "Parallel replications")->check(CLI::PositiveNumber);

    CLI::App* metrics = app.add_subcommand("metrics", "Recompute metrics from the logs of a run");
    metrics->add_option("--out", out, "Run directory")->required();

    CLI::App* validate = app.add_subcommand("validate", "Check a scenario file");
    validate->add_option("--scenario", scenario, "Scenario JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*validate) {
            const bmd::ScenarioFile f = bmd::load_scenario(scenario);
            std::cout << scenario << ": ok (" << f.scenario.objects.size() << " objects, "
                      << f.scenario.rf_sensors.size() << " rf sensors"
                      << (f.scenario.seeker ? ", ir seeker" : "") << (f.scenario.remote ? ", remote cues" : "")
                      << ")\n";
            return kExitOk;
        }
        if (*metrics) {
            const int failed = bmd::write_metrics(out);
            return finish(out, replication_count(out), failed);
        }
        bmd::ScenarioFile f = bmd::load_scenario(scenario);
        if (filter == "ekf") f.tracker.filter.kind = bmd::FilterKind::Ekf;
        if (filter == "ukf") f.tracker.filter.kind = bmd::FilterKind::Ukf;
        bmd::RunOptions opt;
        opt.out = out;
        opt.reps = reps;
        opt.seed = seed;
        opt.jobs = jobs;
        opt.scenario_path = scenario;
        const int failed = bmd::run_all(f, opt);
        return finish(out, reps, failed);
    } catch (const bmd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitOther;
    }
}
