// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <toa/core.hpp>
#include <toa/search.hpp>

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace toa::analysis
{

// --- Best-of-N selection -----------------------------------------------------

/// Highest-reward sample; ties go to the lowest sample index.
[[nodiscard]] const Sample& best_of_n(const SampleSet& set);

/// Mean of the k largest rewards.
[[nodiscard]] double top_k_mean(const SampleSet& set, std::size_t k);

using AnswerExtractor = std::function<std::optional<std::string>(std::string_view)>;

/// Contents of the last \boxed{...} group, else the last number token.
[[nodiscard]] std::optional<std::string> default_extract_answer(std::string_view text);

/// Extractor returning the last match of `pattern` (capture group 1 when present).
[[nodiscard]] AnswerExtractor regex_extractor(const std::string& pattern);

/// Most frequent answer among samples with index < first_n. Among tied
/// answers, the one whose count reached the winning level at the lowest
/// sample index wins. Unextractable samples are skipped.
[[nodiscard]] std::string majority_vote(const SampleSet& set, const AnswerExtractor& extractor,
                                        std::size_t first_n);

// --- Workflow analyses over search trees ------------------------------------

struct RefinementPath
{
    std::vector<std::string> agent_sequence;
    double terminal_reward = 0.0;
    std::string prompt_id;

    [[nodiscard]] std::string key() const;
};

/// Agent sequence along the refinement lineage of the tree's best response
/// (ties to the lowest sample index). The lineage starts at the nearest
/// fresh generation.
[[nodiscard]] RefinementPath best_path(const SearchTree& tree, std::string prompt_id = {});

struct PathCount
{
    std::string path;
    std::size_t count = 0;
};

struct PathFrequencies
{
    /// Sorted by count descending, then path lexicographically; at most `top` rows.
    std::vector<PathCount> ranked;
    /// Number of distinct agents used in a path -> number of paths.
    std::map<std::size_t, std::size_t> distinct_models;
    std::size_t total = 0;
};

[[nodiscard]] PathFrequencies path_frequencies(std::span<const RefinementPath> paths, std::size_t top);

struct TransitionStats
{
    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    std::map<std::pair<std::string, std::string>, double> row_proportions;

    /// Mean over predecessor rows of the same-agent proportion.
    [[nodiscard]] double mean_diagonal(std::span<const std::string> agents) const;
    /// Mean over every (pred, succ != pred) cell of the proportion.
    [[nodiscard]] double mean_off_diagonal(std::span<const std::string> agents) const;
};

[[nodiscard]] TransitionStats transition_proportions(std::span<const RefinementPath> paths);

struct LayerRecord
{
    NodeId model_node = 0;
    std::string agent_id;
    /// Response-layer depth of the node's children (root children -> 1).
    std::size_t depth = 0;
    double max_reward = 0.0;
};

struct LayerStats
{
    std::vector<LayerRecord> records;
    /// depth -> 1 when the tree's best response sits at that depth, else 0.
    std::map<std::size_t, int> holds_best;
};

[[nodiscard]] LayerStats layer_reward_stats(const SearchTree& tree);

/// Trailing mean over min(window, i + 1) elements.
[[nodiscard]] std::vector<double> moving_average(std::span<const double> series, std::size_t window);

/// DOT digraph; the root-to-best-response path is drawn in red.
[[nodiscard]] std::string export_dot(const SearchTree& tree);

} // namespace toa::analysis
