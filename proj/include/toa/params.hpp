// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>

namespace toa
{

struct RandomSingleParams
{
    /// Agent to sample from; the first agent in the pool when empty.
    std::optional<std::string> agent_id;
};

struct MoaParams
{
    std::size_t num_layers = 3;
    std::string aggregate_template_ref = "aggregate_many";
};

/// Whether model nodes copied from the root's children refine their parent
/// response or generate from scratch.
enum class RootMergeMode
{
    fresh,
    refine,
};

struct ToaParams
{
    double alpha = 0.01;
    std::size_t max_width = 1;
    std::optional<std::size_t> max_depth;
    RootMergeMode root_merge_mode = RootMergeMode::refine;
    /// Classical UCT: ln(parent visits) instead of ln(N) in the exploration term.
    bool ucb_parent_visits = false;
    std::size_t N = 1;
};

/// Default layer width: floor(N / 3), at least 1.
[[nodiscard]] constexpr std::size_t default_toa_width(std::size_t n) noexcept
{
    return n / 3 > 0 ? n / 3 : 1;
}

} // namespace toa
