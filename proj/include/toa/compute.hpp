// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>

namespace toa
{

/// Inference FLOPs of one call: multiplier * params * (prompt + completion tokens).
/// The default multiplier of 2 is the forward-pass term of the usual
/// transformer accounting.
[[nodiscard]] double call_flops(std::uint64_t param_count, std::uint64_t prompt_tokens,
                                std::uint64_t completion_tokens, double multiplier = 2.0);

struct AgentUsage
{
    std::uint64_t calls = 0;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    double flops = 0.0;

    AgentUsage& operator+=(const AgentUsage& other) noexcept;
    bool operator==(const AgentUsage&) const = default;
};

/// Cumulative compute per agent. Reward-model calls are kept under
/// `RewardKey` so they stay separable from generation.
///
/// Merge is associative and commutative up to floating-point summation
/// order; each worker keeps a private ledger and merges at the end.
class BudgetLedger
{
  public:
    static constexpr std::string_view RewardKey = "@reward";

    explicit BudgetLedger(double flops_multiplier = 2.0): _multiplier(flops_multiplier) {}

    /// Records one call and returns its FLOPs.
    double record(std::string_view agent_id, std::uint64_t param_count, std::uint64_t prompt_tokens,
                  std::uint64_t completion_tokens);

    void merge(const BudgetLedger& other);

    /// Adds previously recorded usage wholesale, e.g. when reloading a ledger.
    void restore(std::string_view agent_id, const AgentUsage& usage);

    [[nodiscard]] const std::map<std::string, AgentUsage, std::less<>>& per_agent() const noexcept
    {
        return _per_agent;
    }
    [[nodiscard]] double total_flops() const noexcept { return _total_flops; }
    [[nodiscard]] double generation_flops() const noexcept;
    [[nodiscard]] double reward_flops() const noexcept;
    [[nodiscard]] double flops_multiplier() const noexcept { return _multiplier; }

    bool operator==(const BudgetLedger&) const = default;

  private:
    double _multiplier;
    std::map<std::string, AgentUsage, std::less<>> _per_agent;
    double _total_flops = 0.0;
};

struct ScalingPoint
{
    double compute = 0.0;
    double reward = 0.0;
};

/// R = a * log10(C)^2 + b * log10(C) + c
struct ScalingFit
{
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double rmse = 0.0;
    std::size_t points_used = 0;
    /// Standard errors of (a, b, c); zero when the fit is exact or has no
    /// residual degrees of freedom.
    std::array<double, 3> std_errors {};

    [[nodiscard]] double predict(double compute) const noexcept;
};

/// Ordinary least squares on features (log10(C)^2, log10(C), 1).
/// Throws DegenerateFit with fewer than three distinct compute values.
[[nodiscard]] ScalingFit fit_scaling_curve(std::span<const ScalingPoint> points);

} // namespace toa
