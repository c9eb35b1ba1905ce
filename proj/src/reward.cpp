// SPDX-License-Identifier: Apache-2.0
#include <toa/reward.hpp>
#include <toa/seed.hpp>
#include <toa/testbed.hpp>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cmath>

namespace toa
{

double MockRewardModel::score(std::string_view question, std::string_view response) const
{
    if (response.empty())
        throw std::invalid_argument("cannot score an empty response");
    auto tag = testbed::parse_leading_tag(response);
    if (!tag)
        throw UnparsableMockSample("response does not start with a testbed tag");
    const auto seed = hash_combine(fnv1a64(question), fnv1a64(response));
    return testbed::mock_reward(tag->quality, _noise, seed);
}

HttpRewardModel::HttpRewardModel(RewardBackendDescriptor descriptor, std::shared_ptr<ConcurrencyLimiter> limiter):
    _descriptor(std::move(descriptor)), _limiter(std::move(limiter))
{
    if (!_descriptor.endpoint_url)
        throw std::invalid_argument("http_scalar reward backend requires endpoint_url");
}

double HttpRewardModel::score(std::string_view question, std::string_view response) const
{
    using nlohmann::json;
    if (response.empty())
        throw std::invalid_argument("cannot score an empty response");

    auto [base, path] = split_endpoint(*_descriptor.endpoint_url);
    const auto payload = json { { "question", question }, { "response", response } }.dump();
    const auto attempts = std::max(0, _descriptor.retry_limit) + 1;
    auto last_error = std::string {};

    for (int attempt = 1; attempt <= attempts; ++attempt)
    {
        auto client = httplib::Client { base };
        const auto timeout = std::chrono::milliseconds { _descriptor.timeout_ms };
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);

        auto result = [&] {
            const auto permit = ConcurrencyLimiter::Permit { _limiter.get() };
            return client.Post(path, payload, "application/json");
        }();
        if (!result)
        {
            last_error = "transport error: " + httplib::to_string(result.error());
            continue;
        }
        if (result->status != 200)
        {
            last_error = "HTTP " + std::to_string(result->status);
            continue;
        }
        auto body = json::parse(result->body, nullptr, false);
        if (body.is_discarded() || !body.contains("reward") || !body["reward"].is_number())
        {
            last_error = "response lacks a numeric 'reward'";
            continue;
        }
        auto reward = body["reward"].get<double>();
        if (!std::isfinite(reward))
        {
            last_error = "non-finite reward";
            continue;
        }
        return reward;
    }
    throw RewardUnavailable(last_error + " after " + std::to_string(attempts) + " attempt(s)");
}

std::shared_ptr<RewardModel> make_reward_model(const RewardBackendDescriptor& descriptor,
                                               std::shared_ptr<ConcurrencyLimiter> limiter)
{
    if (descriptor.kind == RewardKind::http_scalar)
        return std::make_shared<HttpRewardModel>(descriptor, std::move(limiter));
    return std::make_shared<MockRewardModel>(descriptor.reward_noise, descriptor.param_count);
}

double score(const RewardBackendDescriptor& rb, std::string_view question, std::string_view response)
{
    return make_reward_model(rb)->score(question, response);
}

} // namespace toa
