#include "blowup/harness.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

using namespace blowup;

namespace {

RunConfig configure(const std::string& path, const std::string& out, int threads, double stride)
{
    RunConfig c = RunConfig::load(path);
    if (!out.empty()) c.output = out;
    if (threads > 0) c.threads = threads;
    if (stride > 0.0) {
        c.solver.stride = stride;
        const double q = stride / c.solver.ds;
        if (std::abs(q - std::round(q)) > 1e-9 * q || q < 1.0)
            throw ConfigError({"--stride: must be a multiple of solver.ds"});
    }
    return c;
}

int finish(const RunManifest& m, double seconds)
{
    std::cout << report(m);
    std::cerr << "elapsed " << seconds << " s\n";
    return m.passed() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"blow-up profile experiments"};
    app.require_subcommand(1);

    std::string config, out;
    int threads = 0;
    double stride = 0.0;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory (overrides the config)");
        sub->add_option("--threads", threads, "worker threads for parallel sweeps")->check(CLI::PositiveNumber);
        sub->add_option("--stride", stride, "stride between stored records")->check(CLI::PositiveNumber);
    };
    CLI::App* run_cmd = app.add_subcommand("run", "run the tagged experiment");
    common(run_cmd);
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "exit map over the search box of a shoot config");
    common(sweep_cmd);

    std::string a, b;
    CLI::App* diff_cmd = app.add_subcommand("diff", "compare two manifests");
    diff_cmd->add_option("a", a, "manifest or run directory")->required();
    diff_cmd->add_option("b", b, "manifest or run directory")->required();

    std::string manifest;
    CLI::App* report_cmd = app.add_subcommand("report", "summarize a manifest");
    report_cmd->add_option("manifest", manifest, "manifest or run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const auto t0 = std::chrono::steady_clock::now();
        auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
        if (*run_cmd || *sweep_cmd) {
            const RunConfig c = configure(config, out, threads, stride);
            const RunManifest m = *run_cmd ? run(c) : run_sweep(c);
            return finish(m, elapsed());
        }
        if (*diff_cmd) {
            std::cout << diff_runs(RunManifest::load(a), RunManifest::load(b));
            return 0;
        }
        const RunManifest m = RunManifest::load(manifest);
        std::cout << report(m);
        return m.passed() ? 0 : 1;
    } catch (const ConfigError& e) {
        for (const auto& line : e.errors()) std::cerr << "config error: " << line << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
