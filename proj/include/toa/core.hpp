// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <toa/errors.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace toa
{

struct AgentSpec
{
    std::string agent_id;
    std::uint64_t param_count = 0;
    std::string backend_ref;
    std::string display_name;
};

struct DecodingParams
{
    double temperature = 0.7;
    double top_p = 1.0;
    int max_tokens = 1024;
    std::uint64_t seed = 0;
};

enum class Strategy
{
    random_single,
    parallel_ensemble,
    sequential_refine,
    moa,
    toa,
};

[[nodiscard]] std::string_view to_string(Strategy s) noexcept;
[[nodiscard]] std::optional<Strategy> parse_strategy(std::string_view name) noexcept;

struct Sample
{
    std::size_t sample_index = 0;
    std::string text;
    std::string agent_id;
    std::optional<std::size_t> parent_index;
    /// MoA only: every layer-(l-1) sample the aggregator consumed.
    std::vector<std::size_t> moa_context_indices;
    std::optional<double> reward;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    std::uint64_t seed = 0;
};

/// Ordered samples for one prompt, capped at the run's budget N.
///
/// Single writer per prompt; once a sample is registered it is never mutated.
class SampleSet
{
  public:
    SampleSet(std::string prompt_id, std::string question, Strategy strategy, std::size_t capacity);

    /// Appends `s`, overwriting its sample_index with the next free slot.
    /// Throws BudgetExhausted when the set already holds `capacity()` samples.
    std::size_t register_sample(Sample s);

    [[nodiscard]] const std::string& prompt_id() const noexcept { return _prompt_id; }
    [[nodiscard]] const std::string& question() const noexcept { return _question; }
    [[nodiscard]] Strategy strategy() const noexcept { return _strategy; }
    [[nodiscard]] std::size_t capacity() const noexcept { return _capacity; }
    [[nodiscard]] std::size_t size() const noexcept { return _samples.size(); }
    [[nodiscard]] bool full() const noexcept { return _samples.size() >= _capacity; }
    [[nodiscard]] const std::vector<Sample>& samples() const noexcept { return _samples; }
    [[nodiscard]] const Sample& at(std::size_t index) const { return _samples.at(index); }

  private:
    std::string _prompt_id;
    std::string _question;
    Strategy _strategy;
    std::size_t _capacity;
    std::vector<Sample> _samples;
};

/// Number of whitespace-separated tokens; the token count used by mocks.
[[nodiscard]] std::uint64_t count_whitespace_tokens(std::string_view text) noexcept;

/// Shortest decimal representation that round-trips to the same double.
[[nodiscard]] std::string format_double(double value);

} // namespace toa
