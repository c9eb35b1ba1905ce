// SPDX-License-Identifier: Apache-2.0
#include <toa/pool.hpp>
#include <toa/seed.hpp>

namespace toa
{

AgentPool::AgentPool(std::vector<AgentSpec> agents, std::vector<std::shared_ptr<GenerationBackend>> backends,
                     std::shared_ptr<RewardModel> reward, TemplateSet templates, DecodingParams decoding,
                     std::uint64_t master_seed, double flops_multiplier):
    _agents(std::move(agents)),
    _backends(std::move(backends)),
    _reward(std::move(reward)),
    _templates(std::move(templates)),
    _decoding(decoding),
    _master_seed(master_seed),
    _flops_multiplier(flops_multiplier)
{
    if (_agents.empty())
        throw std::invalid_argument("agent pool needs at least one agent");
    if (_agents.size() != _backends.size())
        throw std::invalid_argument("every agent needs exactly one backend");
    if (!_reward)
        throw std::invalid_argument("agent pool needs a reward model");
}

std::size_t AgentPool::index_of(std::string_view agent_id) const
{
    for (std::size_t i = 0; i < _agents.size(); ++i)
        if (_agents[i].agent_id == agent_id)
            return i;
    throw std::out_of_range("unknown agent '" + std::string { agent_id } + "'");
}

Sample AgentPool::produce(std::size_t agent_index, const PromptContext& prompt, TemplateMode mode,
                          std::span<const std::string> priors, std::size_t sample_index, BudgetLedger& ledger) const
{
    const auto& agent = _agents.at(agent_index);
    const auto rendered = render_prompt(_templates.for_mode(mode), prompt.question, priors);

    const auto seeds = [&](int attempt) {
        return derive_call_seed(_master_seed, prompt.prompt_id, sample_index, static_cast<std::uint64_t>(attempt));
    };
    auto decoding = _decoding;
    decoding.seed = seeds(1);

    auto record = _backends[agent_index]->generate(agent, rendered, decoding, seeds);
    ledger.record(agent.agent_id, agent.param_count, record.prompt_tokens, record.completion_tokens);

    const auto reward = _reward->score(prompt.question, record.text);
    ledger.record(BudgetLedger::RewardKey, _reward->param_count(),
                  count_whitespace_tokens(prompt.question) + count_whitespace_tokens(record.text), 0);

    auto sample = Sample {};
    sample.sample_index = sample_index;
    sample.text = std::move(record.text);
    sample.agent_id = agent.agent_id;
    sample.reward = reward;
    sample.prompt_tokens = record.prompt_tokens;
    sample.completion_tokens = record.completion_tokens;
    sample.seed = decoding.seed;
    return sample;
}

} // namespace toa
