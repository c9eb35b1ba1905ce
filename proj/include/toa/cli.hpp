// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <toa/compute.hpp>
#include <toa/config.hpp>
#include <toa/core.hpp>
#include <toa/search.hpp>

#include <nlohmann/json.hpp>

#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace toa::cli
{

/// Everything one prompt produced under the configured strategy.
struct PromptOutcome
{
    SampleSet samples;
    BudgetLedger ledger;
    /// TOA only.
    std::optional<SearchTree> tree;
    std::vector<SimulationStep> log;
};

[[nodiscard]] PromptOutcome run_prompt(const AgentPool& pool, const ValidatedRunConfig& cfg,
                                       const PromptContext& prompt, std::size_t workers = 1);

struct RunOptions
{
    std::filesystem::path config_path;
    std::filesystem::path prompts_path;
    std::filesystem::path out_dir;
    std::optional<std::string> strategy;
    std::optional<long long> n;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
};

struct RunManifest
{
    std::string run_id;
    std::filesystem::path config_snapshot;
    std::string started_at;
    std::string finished_at;
    Strategy strategy = Strategy::parallel_ensemble;
    std::size_t n = 0;
    std::filesystem::path samples_file;
    std::filesystem::path ledger_file;
    std::vector<std::filesystem::path> tree_files;
    double total_flops = 0.0;
    double generation_flops = 0.0;
    double reward_flops = 0.0;
};

inline constexpr const char* ManifestFile = "manifest.json";

/// Runs the strategy over every prompt and writes samples.jsonl, ledger.json,
/// trees/ (TOA), a byte-identical config snapshot, a copy of the prompts and
/// manifest.json into `out_dir`. Every file except the manifest depends only
/// on the inputs.
RunManifest cmd_run(const RunOptions& options);

enum class Report
{
    paths,
    transitions,
    layers,
    scaling,
    select,
};

[[nodiscard]] std::optional<Report> parse_report(std::string_view name) noexcept;

struct AnalyzeOptions
{
    std::vector<std::filesystem::path> run_dirs;
    Report report = Report::paths;
    /// Defaults to <first run dir>/analysis.
    std::optional<std::filesystem::path> out_dir;
    std::size_t top_k = 10;
    std::size_t top_paths = 20;
    /// Regex for answer extraction in the select report; \boxed{} or the last number when empty.
    std::optional<std::string> answer_pattern;
};

/// Writes the report's CSV/DOT files and returns their paths.
std::vector<std::filesystem::path> cmd_analyze(const AnalyzeOptions& options);

/// Fits the scaling curve to a CSV with `compute,reward` columns (header
/// optional) and writes a one-row `a,b,c,rmse,points` CSV next to it or to `out`.
ScalingFit cmd_fit(const std::filesystem::path& points_csv, const std::optional<std::filesystem::path>& out);

/// Machine-readable description of a failure: {"error", "message", "violations"?}.
[[nodiscard]] nlohmann::json error_report(const std::exception& e);

/// Process exit code for a failure: 2 config, 3 backend or reward, 4 search,
/// 5 artifact or I/O, 1 anything else.
[[nodiscard]] int exit_code_for(const std::exception& e) noexcept;

} // namespace toa::cli
