// SPDX-License-Identifier: Apache-2.0
#include <toa/cli.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace
{
int fail(const std::exception& e, const std::optional<std::filesystem::path>& out_dir)
{
    const auto report = toa::cli::error_report(e).dump();
    std::cerr << report << '\n';
    if (out_dir)
    {
        try
        {
            std::filesystem::create_directories(*out_dir);
            auto file = std::ofstream { *out_dir / "error.json" };
            file << report << '\n';
        }
        catch (const std::exception&)
        {
        }
    }
    return toa::cli::exit_code_for(e);
}
} // namespace

int main(int argc, char** argv)
{
    auto app = CLI::App { "Multi-agent sampling strategies with reward-guided tree search" };
    app.require_subcommand(1);

    auto run = toa::cli::RunOptions {};
    auto strategy = std::string {};
    auto n = 0LL;
    auto seed = std::uint64_t { 0 };
    auto* run_cmd = app.add_subcommand("run", "Generate samples for every prompt");
    run_cmd->add_option("--config", run.config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--prompts", run.prompts_path, "Prompts JSONL")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--out", run.out_dir, "Output directory")->required();
    auto* strategy_opt = run_cmd->add_option("--strategy", strategy, "Override the configured strategy");
    auto* n_opt = run_cmd->add_option("--n", n, "Override the sample budget N");
    auto* seed_opt = run_cmd->add_option("--seed", seed, "Override the master seed");
    run_cmd->add_option("--workers", run.workers, "Prompts processed concurrently")->check(CLI::PositiveNumber);

    auto analyze = toa::cli::AnalyzeOptions {};
    auto report = std::string {};
    auto analyze_out = std::string {};
    auto pattern = std::string {};
    auto* analyze_cmd = app.add_subcommand("analyze", "Produce CSV/DOT reports from run directories");
    analyze_cmd->add_option("--run-dir", analyze.run_dirs, "Run directory (repeatable)")->required();
    analyze_cmd->add_option("--report", report, "Report kind")
        ->required()
        ->check(CLI::IsMember({ "paths", "transitions", "layers", "scaling", "select" }));
    auto* analyze_out_opt = analyze_cmd->add_option("--out", analyze_out, "Output directory");
    analyze_cmd->add_option("--top-k", analyze.top_k, "k for top-k mean reward")->check(CLI::PositiveNumber);
    analyze_cmd->add_option("--top-paths", analyze.top_paths, "Rows in the path frequency table")
        ->check(CLI::PositiveNumber);
    auto* pattern_opt = analyze_cmd->add_option("--answer-regex", pattern, "Answer extraction regex");

    auto points = std::filesystem::path {};
    auto fit_out = std::string {};
    auto* fit_cmd = app.add_subcommand("fit", "Fit R = a*log10(C)^2 + b*log10(C) + c to compute,reward points");
    fit_cmd->add_option("--points", points, "CSV of compute,reward")->required()->check(CLI::ExistingFile);
    auto* fit_out_opt = fit_cmd->add_option("--out", fit_out, "Output CSV");

    CLI11_PARSE(app, argc, argv);

    if (run_cmd->parsed())
    {
        try
        {
            if (*strategy_opt)
                run.strategy = strategy;
            if (*n_opt)
                run.n = n;
            if (*seed_opt)
                run.seed = seed;
            const auto manifest = toa::cli::cmd_run(run);
            std::cout << "run " << manifest.run_id << " wrote " << (run.out_dir / toa::cli::ManifestFile).string()
                      << '\n';
            return 0;
        }
        catch (const std::exception& e)
        {
            return fail(e, run.out_dir);
        }
    }
    if (analyze_cmd->parsed())
    {
        try
        {
            analyze.report = *toa::cli::parse_report(report);
            if (*analyze_out_opt)
                analyze.out_dir = analyze_out;
            if (*pattern_opt)
                analyze.answer_pattern = pattern;
            for (const auto& path: toa::cli::cmd_analyze(analyze))
                std::cout << path.string() << '\n';
            return 0;
        }
        catch (const std::exception& e)
        {
            return fail(e, std::nullopt);
        }
    }
    try
    {
        const auto fit = toa::cli::cmd_fit(
            points, *fit_out_opt ? std::optional<std::filesystem::path> { fit_out } : std::nullopt);
        std::cout << "a=" << toa::format_double(fit.a) << " b=" << toa::format_double(fit.b)
                  << " c=" << toa::format_double(fit.c) << " rmse=" << toa::format_double(fit.rmse) << '\n';
        return 0;
    }
    catch (const std::exception& e)
    {
        return fail(e, std::nullopt);
    }
}
