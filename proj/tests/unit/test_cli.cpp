// SPDX-License-Identifier: Apache-2.0
#include "config_docs.hpp"
#include "oracles.hpp"

#include <toa/cli.hpp>
#include <toa/errors.hpp>
#include <toa/io.hpp>

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace toa;
namespace fs = std::filesystem;

namespace
{
/// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir
{
  public:
    ScratchDir()
    {
        static std::atomic<int> counter { 0 };
        _path = fs::temp_directory_path() / ("toa-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(_path);
        fs::create_directories(_path);
    }
    ~ScratchDir() { fs::remove_all(_path); }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    [[nodiscard]] const fs::path& path() const noexcept { return _path; }

  private:
    fs::path _path;
};

const char* const ThreePrompts = R"({"prompt_id": "a", "question": "What is 6 * 7?", "answer": "42"}
{"prompt_id": "b", "question": "What is 8 * 9?", "answer": 72}

{"prompt_id": "c", "question": "Name a prime."}
)";

cli::RunOptions write_inputs(const fs::path& dir, const nlohmann::json& config, const std::string& prompts = ThreePrompts)
{
    io::write_text_file(dir / "config.json", config.dump(2));
    io::write_text_file(dir / "prompts.jsonl", prompts);
    auto options = cli::RunOptions {};
    options.config_path = dir / "config.json";
    options.prompts_path = dir / "prompts.jsonl";
    options.out_dir = dir / "run";
    return options;
}
} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("prompts file parsing")
    {
        const auto dir = ScratchDir {};
        io::write_text_file(dir.path() / "p.jsonl", ThreePrompts);
        const auto prompts = io::read_prompts(dir.path() / "p.jsonl");
        REQUIRE(prompts.size() == 3);
        CHECK(prompts[0].answer == std::string { "42" });
        CHECK(prompts[1].answer == std::string { "72" });
        CHECK_FALSE(prompts[2].answer);

        io::write_text_file(dir.path() / "dup.jsonl", "{\"prompt_id\":\"x\",\"question\":\"q\"}\n"
                                                      "{\"prompt_id\":\"x\",\"question\":\"q\"}\n");
        CHECK_THROWS_AS((void)io::read_prompts(dir.path() / "dup.jsonl"), IoError);
        io::write_text_file(dir.path() / "bad.jsonl", "{not json\n");
        CHECK_THROWS_AS((void)io::read_prompts(dir.path() / "bad.jsonl"), IoError);
    }

    TEST_CASE("ensemble run writes one group of N samples per prompt")
    {
        const auto dir = ScratchDir {};
        const auto options = write_inputs(dir.path(), fixtures::mock_config(2, 4, "parallel_ensemble"));
        const auto manifest = cli::cmd_run(options);
        CHECK(manifest.n == 4);
        const auto sets = io::read_samples_jsonl(options.out_dir / "samples.jsonl", Strategy::parallel_ensemble);
        REQUIRE(sets.size() == 3);
        for (const auto& set: sets)
            CHECK(set.size() == 4);
        CHECK(sets[0].prompt_id() == "a");
        CHECK(io::read_text_file(options.out_dir / "config.json") == io::read_text_file(options.config_path));
        const auto ledger = io::read_json_file(options.out_dir / "ledger.json");
        CHECK(ledger.at("per_prompt").size() == 3);
        CHECK(ledger.at("total").at("total_flops").get<double>() == doctest::Approx(manifest.total_flops));
        CHECK(manifest.tree_files.empty());
    }

    TEST_CASE("run outputs do not depend on the worker count")
    {
        const auto dir = ScratchDir {};
        auto options = write_inputs(dir.path(), fixtures::mock_config(3, 12, "toa"));
        options.workers = 1;
        (void)cli::cmd_run(options);
        auto parallel = options;
        parallel.out_dir = dir.path() / "run2";
        parallel.workers = 3;
        (void)cli::cmd_run(parallel);
        for (const auto* name: { "samples.jsonl", "ledger.json", "trees/tree_0000.json", "trees/tree_0002.json" })
            CHECK(io::read_text_file(options.out_dir / name) == io::read_text_file(parallel.out_dir / name));
    }

    TEST_CASE("overrides change strategy, budget and seed")
    {
        const auto dir = ScratchDir {};
        auto options = write_inputs(dir.path(), fixtures::mock_config(2, 4, "parallel_ensemble"));
        options.strategy = "sequential_refine";
        options.n = 6;
        options.seed = 99;
        const auto manifest = cli::cmd_run(options);
        CHECK(manifest.strategy == Strategy::sequential_refine);
        CHECK(manifest.n == 6);
        const auto m = io::read_json_file(options.out_dir / cli::ManifestFile);
        CHECK(m.at("master_seed") == 99);
    }

    TEST_CASE("TOA trees round-trip through JSON")
    {
        const auto dir = ScratchDir {};
        const auto options = write_inputs(dir.path(), fixtures::mock_config(4, 16, "toa"));
        const auto manifest = cli::cmd_run(options);
        REQUIRE(manifest.tree_files.size() == 3);
        const auto j = io::read_json_file(options.out_dir / manifest.tree_files[0]);
        const auto doc = io::tree_from_json(j);
        CHECK(doc.tree.response_count() == 16);
        CHECK(doc.params.max_width == 5);
        CHECK(oracle::structural_problems(doc.tree, doc.params).empty());
        auto log = std::vector<SimulationStep> {};
        for (const auto& [path, r]: doc.simulations)
            log.push_back(SimulationStep { .path = path, .reward = r });
        CHECK(io::tree_to_json(doc.prompt_id, doc.params, doc.tree, log) == j);
    }

    TEST_CASE("ledger JSON round-trips")
    {
        auto ledger = BudgetLedger { 3.0 };
        (void)ledger.record("a", 100, 1, 2);
        (void)ledger.record(BudgetLedger::RewardKey, 50, 3, 0);
        CHECK(io::ledger_from_json(io::ledger_to_json(ledger)) == ledger);
    }

    TEST_CASE("analyze reports over runs")
    {
        const auto dir = ScratchDir {};
        auto options = write_inputs(dir.path(), fixtures::mock_config(4, 16, "toa"));
        (void)cli::cmd_run(options);

        auto analyze = cli::AnalyzeOptions {};
        analyze.run_dirs = { options.out_dir };
        for (auto report: { cli::Report::paths, cli::Report::transitions, cli::Report::layers, cli::Report::select })
        {
            analyze.report = report;
            const auto files = cli::cmd_analyze(analyze);
            CHECK_FALSE(files.empty());
            for (const auto& f: files)
                CHECK(fs::exists(f));
        }
        CHECK(fs::exists(options.out_dir / "analysis" / "paths_top.csv"));
        CHECK(fs::exists(options.out_dir / "analysis" / "select_summary.csv"));

        auto runs = std::vector<fs::path> {};
        for (long long n: { 8, 16, 32 })
        {
            auto o = options;
            o.n = n;
            o.strategy = "parallel_ensemble";
            o.out_dir = dir.path() / ("ens" + std::to_string(n));
            (void)cli::cmd_run(o);
            runs.push_back(o.out_dir);
        }
        analyze.run_dirs = runs;
        analyze.report = cli::Report::scaling;
        analyze.top_k = 4;
        analyze.out_dir = dir.path() / "scaling";
        (void)cli::cmd_analyze(analyze);
        CHECK(fs::exists(dir.path() / "scaling" / "scaling_fit.csv"));

        analyze.run_dirs = { runs[0] };
        analyze.report = cli::Report::layers;
        CHECK_THROWS_AS((void)cli::cmd_analyze(analyze), MissingArtifact);
    }

    TEST_CASE("fit command reads compute,reward points")
    {
        const auto dir = ScratchDir {};
        auto csv = std::string { "compute,reward\n" };
        for (double x: { 10.0, 11.0, 12.0, 13.0, 14.0 })
            csv += std::to_string(std::pow(10.0, x)) + "," + std::to_string(-0.0031 * x * x + 0.11 * x - 0.71) + "\n";
        io::write_text_file(dir.path() / "points.csv", csv);
        const auto fit = cli::cmd_fit(dir.path() / "points.csv", dir.path() / "fit.csv");
        CHECK(fit.a == doctest::Approx(-0.0031).epsilon(1e-4));
        CHECK(fit.points_used == 5);
        CHECK(fs::exists(dir.path() / "fit.csv"));
    }

    TEST_CASE("errors map to exit codes and JSON reports")
    {
        const auto dir = ScratchDir {};
        const auto options = write_inputs(dir.path(), fixtures::mock_config(4, 6, "moa"));
        try
        {
            (void)cli::cmd_run(options);
            FAIL("expected ConfigError");
        }
        catch (const ConfigError& e)
        {
            CHECK(cli::exit_code_for(e) == 2);
            const auto report = cli::error_report(e);
            CHECK(report.at("error") == "ConfigError");
            CHECK_FALSE(report.at("violations").empty());
        }
        CHECK(cli::exit_code_for(BackendUnavailable("x")) == 3);
        CHECK(cli::exit_code_for(SearchExhausted("x")) == 4);
        CHECK(cli::exit_code_for(MissingArtifact("x")) == 5);
        CHECK(cli::exit_code_for(std::runtime_error("x")) == 1);
        CHECK(cli::parse_report("layers") == cli::Report::layers);
        CHECK_FALSE(cli::parse_report("nope"));
    }
}
