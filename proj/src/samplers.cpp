// SPDX-License-Identifier: Apache-2.0
#include <toa/samplers.hpp>
#include <toa/seed.hpp>

#include <random>

namespace toa
{

namespace
{
    void require_divisible(std::size_t n, std::size_t k, std::string_view strategy)
    {
        if (n == 0 || n % k != 0)
            throw ConfigError("N", std::string { strategy } + " requires N (" + std::to_string(n)
                                           + ") to be a positive multiple of K (" + std::to_string(k) + ")");
    }

    /// Registers pre-built samples in index order and merges their ledgers in
    /// the same order, so results do not depend on thread scheduling.
    StrategyRun assemble(const AgentPool& pool, const PromptContext& prompt, Strategy strategy, std::size_t n,
                         std::vector<Sample>& samples, std::vector<BudgetLedger>& ledgers)
    {
        auto run = StrategyRun { SampleSet { prompt.prompt_id, prompt.question, strategy, n },
                                 BudgetLedger { pool.flops_multiplier() } };
        for (auto& s: samples)
            run.samples.register_sample(std::move(s));
        for (const auto& l: ledgers)
            run.ledger.merge(l);
        return run;
    }
} // namespace

StrategyRun random_single(const AgentPool& pool, const PromptContext& prompt, std::size_t n,
                          const RandomSingleParams& params, std::size_t workers)
{
    if (n == 0)
        throw ConfigError("N", "must be at least 1");
    const auto agent = params.agent_id ? pool.index_of(*params.agent_id) : 0;

    auto samples = std::vector<Sample>(n);
    auto ledgers = std::vector<BudgetLedger>(n, BudgetLedger { pool.flops_multiplier() });
    parallel_for(n, workers, [&](std::size_t i) {
        samples[i] = pool.produce(agent, prompt, TemplateMode::fresh, {}, i, ledgers[i]);
    });
    return assemble(pool, prompt, Strategy::random_single, n, samples, ledgers);
}

StrategyRun parallel_ensemble(const AgentPool& pool, const PromptContext& prompt, std::size_t n, std::size_t workers)
{
    const auto k = pool.size();
    require_divisible(n, k, "parallel_ensemble");

    auto samples = std::vector<Sample>(n);
    auto ledgers = std::vector<BudgetLedger>(n, BudgetLedger { pool.flops_multiplier() });
    parallel_for(n, workers, [&](std::size_t i) {
        samples[i] = pool.produce(i % k, prompt, TemplateMode::fresh, {}, i, ledgers[i]);
    });
    return assemble(pool, prompt, Strategy::parallel_ensemble, n, samples, ledgers);
}

std::vector<std::size_t> chain_permutation(std::size_t k, std::uint64_t master_seed, std::string_view prompt_id,
                                           std::size_t chain_index)
{
    auto order = std::vector<std::size_t>(k);
    for (std::size_t i = 0; i < k; ++i)
        order[i] = i;
    auto rng = std::mt19937_64 { derive_chain_seed(master_seed, prompt_id, chain_index) };
    for (std::size_t i = k; i > 1; --i)
    {
        auto pick = std::uniform_int_distribution<std::size_t> { 0, i - 1 }(rng);
        std::swap(order[i - 1], order[pick]);
    }
    return order;
}

StrategyRun sequential_refine(const AgentPool& pool, const PromptContext& prompt, std::size_t n, std::size_t workers)
{
    const auto k = pool.size();
    require_divisible(n, k, "sequential_refine");
    const auto chains = n / k;

    auto samples = std::vector<Sample>(n);
    auto ledgers = std::vector<BudgetLedger>(chains, BudgetLedger { pool.flops_multiplier() });
    parallel_for(chains, workers, [&](std::size_t c) {
        const auto order = chain_permutation(k, pool.master_seed(), prompt.prompt_id, c);
        for (std::size_t step = 0; step < k; ++step)
        {
            const auto index = c * k + step;
            if (step == 0)
                samples[index] = pool.produce(order[step], prompt, TemplateMode::fresh, {}, index, ledgers[c]);
            else
            {
                const auto prior = std::vector<std::string> { samples[index - 1].text };
                samples[index] = pool.produce(order[step], prompt, TemplateMode::refine_one, prior, index, ledgers[c]);
                samples[index].parent_index = index - 1;
            }
        }
    });
    return assemble(pool, prompt, Strategy::sequential_refine, n, samples, ledgers);
}

MoaPosition moa_position(std::size_t index, std::size_t k, std::size_t layers) noexcept
{
    const auto per_pass = k * layers;
    return MoaPosition {
        .pass = index / per_pass,
        .layer = (index % per_pass) / k + 1,
        .agent = index % k,
    };
}

StrategyRun mixture_of_agents(const AgentPool& pool, const PromptContext& prompt, std::size_t n,
                              const MoaParams& params, std::size_t workers)
{
    const auto k = pool.size();
    require_divisible(n, k, "moa");
    if (params.num_layers == 0)
        throw ConfigError("strategy_params.num_layers", "must be at least 1");

    auto samples = std::vector<Sample>(n);
    auto ledgers = std::vector<BudgetLedger>(n, BudgetLedger { pool.flops_multiplier() });

    // Layer-major: a layer is a strict barrier; its K generations run concurrently.
    for (std::size_t layer_start = 0; layer_start < n; layer_start += k)
    {
        const auto pos = moa_position(layer_start, k, params.num_layers);
        auto context = std::vector<std::size_t> {};
        auto priors = std::vector<std::string> {};
        if (pos.layer > 1)
            for (std::size_t j = 0; j < k; ++j)
            {
                context.push_back(layer_start - k + j);
                priors.push_back(samples[layer_start - k + j].text);
            }

        parallel_for(k, workers, [&](std::size_t agent) {
            const auto index = layer_start + agent;
            if (context.empty())
                samples[index] = pool.produce(agent, prompt, TemplateMode::fresh, {}, index, ledgers[index]);
            else
            {
                samples[index] =
                    pool.produce(agent, prompt, TemplateMode::aggregate_many, priors, index, ledgers[index]);
                samples[index].moa_context_indices = context;
                samples[index].parent_index = index - k;
            }
        });
    }
    return assemble(pool, prompt, Strategy::moa, n, samples, ledgers);
}

std::vector<std::size_t> replay_mismatches(const AgentPool& pool, const SampleSet& set)
{
    const auto prompt = PromptContext { set.prompt_id(), set.question() };
    auto mismatches = std::vector<std::size_t> {};
    for (const auto& s: set.samples())
    {
        auto scratch = BudgetLedger { pool.flops_multiplier() };
        auto priors = std::vector<std::string> {};
        auto mode = TemplateMode::fresh;
        if (!s.moa_context_indices.empty())
        {
            mode = TemplateMode::aggregate_many;
            for (auto i: s.moa_context_indices)
                priors.push_back(set.at(i).text);
        }
        else if (s.parent_index)
        {
            mode = TemplateMode::refine_one;
            priors.push_back(set.at(*s.parent_index).text);
        }
        const auto again = pool.produce(pool.index_of(s.agent_id), prompt, mode, priors, s.sample_index, scratch);
        if (again.text != s.text || again.reward != s.reward)
            mismatches.push_back(s.sample_index);
    }
    return mismatches;
}

} // namespace toa
