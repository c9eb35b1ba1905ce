// SPDX-License-Identifier: Apache-2.0
#include <toa/core.hpp>
#include <toa/testbed.hpp>

#include <algorithm>
#include <charconv>
#include <random>

namespace toa::testbed
{

namespace
{
    constexpr std::string_view TagOpen = "[mock agent=";

    double gaussian(double stddev, std::uint64_t seed)
    {
        if (stddev == 0.0)
            return 0.0;
        auto rng = std::mt19937_64 { seed };
        auto dist = std::normal_distribution<double> { 0.0, stddev };
        return dist(rng);
    }

    // Reads "key=value" where value runs to the next space or ']'.
    std::optional<std::string_view> read_field(std::string_view& rest, std::string_view key)
    {
        if (!rest.starts_with(key))
            return std::nullopt;
        rest.remove_prefix(key.size());
        auto end = rest.find_first_of(" ]");
        if (end == std::string_view::npos || end == 0)
            return std::nullopt;
        auto value = rest.substr(0, end);
        rest.remove_prefix(end);
        return value;
    }
} // namespace

const MockAgentParams* LandscapeConfig::find(std::string_view agent_id) const noexcept
{
    auto it = std::find_if(agents.begin(), agents.end(), [&](const auto& a) { return a.agent_id == agent_id; });
    return it == agents.end() ? nullptr : &*it;
}

double mock_quality(const LandscapeConfig& landscape, const MockAgentParams& agent,
                    std::optional<double> parent_quality, const std::optional<std::string>& parent_agent,
                    std::uint64_t rng_seed)
{
    const auto cap = landscape.quality_cap;
    const auto eps = gaussian(agent.noise, rng_seed);
    if (!parent_quality)
        return std::clamp(agent.base_quality + eps, 0.0, cap);

    const auto base = std::max(*parent_quality, agent.base_quality);
    const auto same_agent = parent_agent && *parent_agent == agent.agent_id;
    const auto g = same_agent ? 1.0 - landscape.cross_model_bonus : 1.0;
    return std::clamp(base + agent.refine_gain * (cap - base) * g + eps, 0.0, cap);
}

double mock_reward(double quality, double reward_noise, std::uint64_t rng_seed)
{
    return quality + gaussian(reward_noise, rng_seed);
}

std::string encode_tag(const MockTag& tag)
{
    return std::string { TagOpen } + tag.agent_id + " q=" + format_double(tag.quality)
           + " from=" + tag.parent_agent.value_or("-") + " depth=" + std::to_string(tag.depth) + "]";
}

std::optional<MockTag> parse_leading_tag(std::string_view text)
{
    if (!text.starts_with(TagOpen))
        return std::nullopt;
    auto rest = text.substr(TagOpen.size() - std::string_view { "agent=" }.size());

    auto tag = MockTag {};
    auto agent = read_field(rest, "agent=");
    if (!agent)
        return std::nullopt;
    tag.agent_id = std::string { *agent };

    auto q = read_field(rest, " q=");
    if (!q)
        return std::nullopt;
    auto [qend, qec] = std::from_chars(q->data(), q->data() + q->size(), tag.quality);
    if (qec != std::errc {} || qend != q->data() + q->size())
        return std::nullopt;

    auto from = read_field(rest, " from=");
    if (!from)
        return std::nullopt;
    if (*from != "-")
        tag.parent_agent = std::string { *from };

    auto depth = read_field(rest, " depth=");
    if (!depth)
        return std::nullopt;
    auto [dend, dec] = std::from_chars(depth->data(), depth->data() + depth->size(), tag.depth);
    if (dec != std::errc {} || dend != depth->data() + depth->size())
        return std::nullopt;

    if (!rest.starts_with("]"))
        return std::nullopt;
    return tag;
}

std::vector<MockTag> find_tags(std::string_view text)
{
    auto tags = std::vector<MockTag> {};
    for (auto pos = text.find(TagOpen); pos != std::string_view::npos; pos = text.find(TagOpen, pos + 1))
        if (auto tag = parse_leading_tag(text.substr(pos)))
            tags.push_back(std::move(*tag));
    return tags;
}

} // namespace toa::testbed
