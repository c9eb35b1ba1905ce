// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <toa/compute.hpp>
#include <toa/core.hpp>
#include <toa/params.hpp>
#include <toa/search.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace toa::io
{

inline constexpr int TreeFormatVersion = 1;

struct PromptRecord
{
    std::string prompt_id;
    std::string question;
    std::optional<std::string> answer;
};

/// JSONL of {prompt_id, question, optional answer}. Blank lines are skipped;
/// malformed lines and duplicate ids raise IoError naming the line.
[[nodiscard]] std::vector<PromptRecord> read_prompts(const std::filesystem::path& path);

[[nodiscard]] nlohmann::json sample_to_json(const std::string& prompt_id, const Sample& s);

/// One line per sample, in index order.
void write_samples_jsonl(std::ostream& out, const SampleSet& set);

/// Groups records by prompt_id in order of first appearance. Questions are
/// not part of the sample records and come back empty.
[[nodiscard]] std::vector<SampleSet> read_samples_jsonl(const std::filesystem::path& path, Strategy strategy);

[[nodiscard]] nlohmann::json ledger_to_json(const BudgetLedger& ledger);
[[nodiscard]] BudgetLedger ledger_from_json(const nlohmann::json& j);

struct TreeDocument
{
    std::string prompt_id;
    ToaParams params;
    SearchTree tree;
    /// (path, reward) per simulation, in order.
    std::vector<std::pair<std::vector<NodeId>, double>> simulations;
};

[[nodiscard]] nlohmann::json tree_to_json(const std::string& prompt_id, const ToaParams& params,
                                          const SearchTree& tree, const std::vector<SimulationStep>& log);

/// Rebuilds the tree node by node and checks the stored ids line up.
[[nodiscard]] TreeDocument tree_from_json(const nlohmann::json& j);

[[nodiscard]] nlohmann::json read_json_file(const std::filesystem::path& path);

/// Writes through a temporary file and renames, so readers never observe a
/// half-written artifact.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);

} // namespace toa::io
