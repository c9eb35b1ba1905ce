// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <toa/analysis.hpp>
#include <toa/backends.hpp>
#include <toa/pool.hpp>
#include <toa/reward.hpp>
#include <toa/samplers.hpp>
#include <toa/search.hpp>
#include <toa/testbed.hpp>

#include <memory>
#include <string>
#include <vector>

namespace toa::fixtures
{

struct LandscapeSpec
{
    std::vector<double> base_qualities { 0.45, 0.50, 0.55, 0.60 };
    double refine_gain = 0.5;
    double noise = 0.02;
    double cross_model_bonus = 0.1;
    double reward_noise = 0.0;
    std::uint64_t param_count = 8'000'000'000ULL;
};

inline std::string agent_name(std::size_t i) { return "agent" + std::to_string(i); }

inline std::shared_ptr<const testbed::LandscapeConfig> make_landscape(const LandscapeSpec& spec)
{
    auto lc = testbed::LandscapeConfig {};
    lc.cross_model_bonus = spec.cross_model_bonus;
    for (std::size_t i = 0; i < spec.base_qualities.size(); ++i)
        lc.agents.push_back({ agent_name(i), spec.base_qualities[i], spec.refine_gain, spec.noise });
    return std::make_shared<const testbed::LandscapeConfig>(std::move(lc));
}

/// A pool of mock agents over the landscape, scored by the mock reward model.
inline AgentPool make_pool(const LandscapeSpec& spec, std::uint64_t master_seed)
{
    const auto landscape = make_landscape(spec);
    auto agents = std::vector<AgentSpec> {};
    auto backends = std::vector<std::shared_ptr<GenerationBackend>> {};
    for (const auto& a: landscape->agents)
    {
        agents.push_back({ a.agent_id, spec.param_count, a.agent_id, a.agent_id });
        auto d = BackendDescriptor {};
        d.mock_params_ref = a.agent_id;
        backends.push_back(make_backend(d, landscape, nullptr));
    }
    auto rb = RewardBackendDescriptor {};
    rb.reward_noise = spec.reward_noise;
    return AgentPool { std::move(agents), std::move(backends), make_reward_model(rb), TemplateSet::defaults(),
                       DecodingParams {},  master_seed };
}

inline LandscapeSpec uniform_landscape(std::size_t k)
{
    auto spec = LandscapeSpec {};
    spec.base_qualities.clear();
    for (std::size_t i = 0; i < k; ++i)
        spec.base_qualities.push_back(0.4 + 0.2 * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(k - 1, 1)));
    return spec;
}

inline PromptContext prompt(std::size_t i)
{
    return { "p" + std::to_string(i), "Question number " + std::to_string(i) + ": what is 2 + " + std::to_string(i) + "?" };
}

} // namespace toa::fixtures
