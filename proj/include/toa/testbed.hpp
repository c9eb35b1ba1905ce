// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace toa::testbed
{

/// Offline stand-in for one generator. Quality of a fresh sample is
/// base_quality plus noise; a refinement closes `refine_gain` of the gap to
/// the quality cap.
struct MockAgentParams
{
    std::string agent_id;
    double base_quality = 0.5;
    double refine_gain = 0.5;
    double noise = 0.0;
};

struct LandscapeConfig
{
    std::vector<MockAgentParams> agents;
    /// Fraction of the refinement gain lost when an agent refines its own output.
    double cross_model_bonus = 0.0;
    double quality_cap = 1.0;

    [[nodiscard]] const MockAgentParams* find(std::string_view agent_id) const noexcept;
};

/// Quality of a new sample by `agent`. Fresh generation when `parent_quality`
/// is empty, refinement of a sample by `parent_agent` otherwise.
[[nodiscard]] double mock_quality(const LandscapeConfig& landscape, const MockAgentParams& agent,
                                  std::optional<double> parent_quality,
                                  const std::optional<std::string>& parent_agent, std::uint64_t rng_seed);

/// Reward observed for a sample of the given true quality.
[[nodiscard]] double mock_reward(double quality, double reward_noise, std::uint64_t rng_seed);

/// Self-describing header at the start of every mock response:
///   [mock agent=<id> q=<quality> from=<parent agent or -> depth=<chain length>]
struct MockTag
{
    std::string agent_id;
    double quality = 0.0;
    std::optional<std::string> parent_agent;
    int depth = 1;
};

[[nodiscard]] std::string encode_tag(const MockTag& tag);

/// Parses a tag at the very start of `text`.
[[nodiscard]] std::optional<MockTag> parse_leading_tag(std::string_view text);

/// Every well-formed tag anywhere in `text`, in order of appearance.
[[nodiscard]] std::vector<MockTag> find_tags(std::string_view text);

} // namespace toa::testbed
