// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <toa/backends.hpp>
#include <toa/compute.hpp>
#include <toa/core.hpp>
#include <toa/reward.hpp>

#include <atomic>
#include <exception>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace toa
{

struct PromptContext
{
    std::string prompt_id;
    std::string question;
};

/// The K generator agents bound to their backends, plus the reward model.
/// Produces fully scored samples; strategies decide only who generates and
/// from which context.
class AgentPool
{
  public:
    AgentPool(std::vector<AgentSpec> agents, std::vector<std::shared_ptr<GenerationBackend>> backends,
              std::shared_ptr<RewardModel> reward, TemplateSet templates, DecodingParams decoding,
              std::uint64_t master_seed, double flops_multiplier = 2.0);

    [[nodiscard]] std::size_t size() const noexcept { return _agents.size(); }
    [[nodiscard]] const AgentSpec& agent(std::size_t index) const { return _agents.at(index); }
    [[nodiscard]] const std::vector<AgentSpec>& agents() const noexcept { return _agents; }
    [[nodiscard]] std::size_t index_of(std::string_view agent_id) const;
    [[nodiscard]] const TemplateSet& templates() const noexcept { return _templates; }
    [[nodiscard]] std::uint64_t master_seed() const noexcept { return _master_seed; }
    [[nodiscard]] double flops_multiplier() const noexcept { return _flops_multiplier; }

    /// Renders the template for `mode`, generates with agent `agent_index`
    /// using the seed derived for `sample_index`, scores the result and
    /// charges both calls to `ledger`. Lineage fields are left to the caller.
    [[nodiscard]] Sample produce(std::size_t agent_index, const PromptContext& prompt, TemplateMode mode,
                                 std::span<const std::string> priors, std::size_t sample_index,
                                 BudgetLedger& ledger) const;

  private:
    std::vector<AgentSpec> _agents;
    std::vector<std::shared_ptr<GenerationBackend>> _backends;
    std::shared_ptr<RewardModel> _reward;
    TemplateSet _templates;
    DecodingParams _decoding;
    std::uint64_t _master_seed;
    double _flops_multiplier;
};

/// Runs fn(0..count-1) on up to `workers` threads. The first exception thrown
/// is rethrown after all threads join.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn)
{
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1)
    {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }

    auto next = std::atomic<std::size_t> { 0 };
    auto failure = std::exception_ptr {};
    auto failure_mutex = std::mutex {};
    auto body = [&] {
        for (auto i = next.fetch_add(1); i < count; i = next.fetch_add(1))
        {
            try
            {
                fn(i);
            }
            catch (...)
            {
                auto lock = std::lock_guard { failure_mutex };
                if (!failure)
                    failure = std::current_exception();
                next.store(count);
            }
        }
    };
    {
        auto threads = std::vector<std::jthread> {};
        threads.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            threads.emplace_back(body);
    }
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace toa
