// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <toa/compute.hpp>
#include <toa/core.hpp>
#include <toa/params.hpp>
#include <toa/pool.hpp>

#include <cstdint>
#include <vector>

namespace toa
{

/// What every strategy hands back: the prompt's samples and what they cost.
struct StrategyRun
{
    SampleSet samples;
    BudgetLedger ledger;
};

/// N fresh samples from one agent.
[[nodiscard]] StrategyRun random_single(const AgentPool& pool, const PromptContext& prompt, std::size_t n,
                                        const RandomSingleParams& params = {}, std::size_t workers = 1);

/// N/K fresh samples per agent. Sample i is generated by agent i mod K so
/// any prefix of the set stays balanced across agents.
[[nodiscard]] StrategyRun parallel_ensemble(const AgentPool& pool, const PromptContext& prompt, std::size_t n,
                                            std::size_t workers = 1);

/// N/K independent chains, each visiting the K agents in its own random
/// order; every step refines the previous step's sample. Samples are laid
/// out chain-major: chain c occupies indices [cK, cK + K).
[[nodiscard]] StrategyRun sequential_refine(const AgentPool& pool, const PromptContext& prompt, std::size_t n,
                                            std::size_t workers = 1);

/// Layered fusion. Each pass emits K fresh samples, then L-1 layers in which
/// every agent aggregates all K outputs of the previous layer. Passes repeat
/// (independently) until N samples exist; the last pass is cut layer by layer.
[[nodiscard]] StrategyRun mixture_of_agents(const AgentPool& pool, const PromptContext& prompt, std::size_t n,
                                            const MoaParams& params, std::size_t workers = 1);

/// Agent order for chain `chain_index`: Fisher-Yates over 0..k-1 driven by
/// the chain's derived seed.
[[nodiscard]] std::vector<std::size_t> chain_permutation(std::size_t k, std::uint64_t master_seed,
                                                         std::string_view prompt_id, std::size_t chain_index);

/// Layer (1-based) and pass (0-based) of MoA sample `index`.
struct MoaPosition
{
    std::size_t pass = 0;
    std::size_t layer = 1;
    std::size_t agent = 0;
};
[[nodiscard]] MoaPosition moa_position(std::size_t index, std::size_t k, std::size_t layers) noexcept;

/// Regenerates every sample from its recorded provenance (agent, parent or
/// MoA context, sample index) and returns the indices whose text or reward
/// differ from what was recorded.
[[nodiscard]] std::vector<std::size_t> replay_mismatches(const AgentPool& pool, const SampleSet& set);

} // namespace toa
