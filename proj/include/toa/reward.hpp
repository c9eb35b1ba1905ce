// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <toa/backends.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace toa
{

enum class RewardKind
{
    http_scalar,
    mock,
};

struct RewardBackendDescriptor
{
    RewardKind kind = RewardKind::mock;
    std::optional<std::string> endpoint_url;
    double reward_noise = 0.0;
    int retry_limit = 2;
    int timeout_ms = 60000;
    /// Declared size of the reward model; scoring FLOPs are charged against it.
    std::uint64_t param_count = 0;
};

/// Stateless scorer R(x, y). Implementations are safe to call concurrently.
class RewardModel
{
  public:
    virtual ~RewardModel() = default;
    virtual double score(std::string_view question, std::string_view response) const = 0;
    [[nodiscard]] virtual std::uint64_t param_count() const noexcept = 0;
};

/// Reads the quality from a testbed response's tag and applies reward noise
/// seeded by the (question, response) pair.
class MockRewardModel final: public RewardModel
{
  public:
    explicit MockRewardModel(double reward_noise, std::uint64_t param_count = 0):
        _noise(reward_noise), _param_count(param_count)
    {
    }
    double score(std::string_view question, std::string_view response) const override;
    [[nodiscard]] std::uint64_t param_count() const noexcept override { return _param_count; }

  private:
    double _noise;
    std::uint64_t _param_count;
};

/// POST {"question", "response"} and read {"reward": <number>}.
class HttpRewardModel final: public RewardModel
{
  public:
    HttpRewardModel(RewardBackendDescriptor descriptor, std::shared_ptr<ConcurrencyLimiter> limiter = nullptr);
    double score(std::string_view question, std::string_view response) const override;
    [[nodiscard]] std::uint64_t param_count() const noexcept override { return _descriptor.param_count; }

  private:
    RewardBackendDescriptor _descriptor;
    std::shared_ptr<ConcurrencyLimiter> _limiter;
};

[[nodiscard]] std::shared_ptr<RewardModel> make_reward_model(const RewardBackendDescriptor& descriptor,
                                                             std::shared_ptr<ConcurrencyLimiter> limiter = nullptr);

[[nodiscard]] double score(const RewardBackendDescriptor& rb, std::string_view question, std::string_view response);

} // namespace toa
