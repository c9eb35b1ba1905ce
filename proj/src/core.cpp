// SPDX-License-Identifier: Apache-2.0
#include <toa/core.hpp>

#include <array>
#include <cctype>
#include <charconv>

namespace toa
{

namespace
{
    std::string describe(const std::vector<ConfigViolation>& violations)
    {
        auto message = std::string { "invalid configuration:" };
        for (const auto& v: violations)
            message += " [" + v.field + ": " + v.reason + "]";
        return message;
    }
} // namespace

ConfigError::ConfigError(std::vector<ConfigViolation> violations):
    Error("ConfigError", describe(violations)), _violations(std::move(violations))
{
}

ConfigError::ConfigError(std::string field, std::string reason):
    ConfigError(std::vector<ConfigViolation> { { std::move(field), std::move(reason) } })
{
}

std::string_view to_string(Strategy s) noexcept
{
    switch (s)
    {
        case Strategy::random_single: return "random_single";
        case Strategy::parallel_ensemble: return "parallel_ensemble";
        case Strategy::sequential_refine: return "sequential_refine";
        case Strategy::moa: return "moa";
        case Strategy::toa: return "toa";
    }
    return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) noexcept
{
    for (auto s: { Strategy::random_single, Strategy::parallel_ensemble, Strategy::sequential_refine, Strategy::moa,
                   Strategy::toa })
        if (to_string(s) == name)
            return s;
    return std::nullopt;
}

SampleSet::SampleSet(std::string prompt_id, std::string question, Strategy strategy, std::size_t capacity):
    _prompt_id(std::move(prompt_id)), _question(std::move(question)), _strategy(strategy), _capacity(capacity)
{
    _samples.reserve(capacity);
}

std::size_t SampleSet::register_sample(Sample s)
{
    if (full())
        throw BudgetExhausted("sample set for prompt '" + _prompt_id + "' already holds "
                              + std::to_string(_capacity) + " samples");
    s.sample_index = _samples.size();
    if (s.parent_index && *s.parent_index >= s.sample_index)
        throw std::logic_error("parent_index must precede the sample it refines");
    for (auto ctx: s.moa_context_indices)
        if (ctx >= s.sample_index)
            throw std::logic_error("moa context must precede the sample it feeds");
    _samples.push_back(std::move(s));
    return _samples.back().sample_index;
}

std::uint64_t count_whitespace_tokens(std::string_view text) noexcept
{
    std::uint64_t count = 0;
    bool in_token = false;
    for (unsigned char c: text)
    {
        if (std::isspace(c))
            in_token = false;
        else if (!in_token)
        {
            in_token = true;
            ++count;
        }
    }
    return count;
}

std::string format_double(double value)
{
    auto buffer = std::array<char, 64> {};
    auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
    return std::string(buffer.data(), end);
}

} // namespace toa
