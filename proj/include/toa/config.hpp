// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <toa/backends.hpp>
#include <toa/core.hpp>
#include <toa/params.hpp>
#include <toa/pool.hpp>
#include <toa/reward.hpp>
#include <toa/testbed.hpp>

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace toa
{

/// TOA knobs as written in the config; unset values get their defaults
/// during validation (width floor(N/3), alpha 0.01).
struct ToaSettings
{
    std::optional<double> alpha;
    std::optional<long long> max_width;
    std::optional<long long> max_depth;
    RootMergeMode root_merge_mode = RootMergeMode::refine;
    bool ucb_parent_visits = false;
};

struct TemplateSelection
{
    std::string fresh = "fresh";
    std::string refine_one = "refine_one";
    std::string aggregate_many = "aggregate_many";
};

struct RunConfig
{
    std::vector<AgentSpec> agents;
    std::map<std::string, BackendDescriptor, std::less<>> backends;
    std::string reward_backend_ref = "mock";
    std::map<std::string, RewardBackendDescriptor, std::less<>> reward_backends;
    long long N = 1;
    Strategy strategy = Strategy::parallel_ensemble;
    RandomSingleParams random_single;
    long long moa_layers = 3;
    std::optional<std::string> moa_aggregate_template;
    ToaSettings toa;
    DecodingParams decoding;
    std::uint64_t master_seed = 0;
    std::map<std::string, PromptTemplate, std::less<>> templates;
    TemplateSelection template_selection;
    std::optional<testbed::LandscapeConfig> testbed;
    long long max_concurrency = 8;
    double flops_multiplier = 2.0;
};

/// A config that passed every rule, with defaults filled in.
struct ValidatedRunConfig
{
    RunConfig config;
    std::size_t n = 1;
    ToaParams toa;
    MoaParams moa;
    TemplateSet templates;
};

/// Checks every rule and throws one ConfigError listing all violations.
[[nodiscard]] ValidatedRunConfig validate_config(const RunConfig& cfg);

/// Reads the JSON config document. Shape and type problems are appended to
/// `violations` rather than thrown, so they can be reported together with
/// semantic ones.
[[nodiscard]] RunConfig parse_config(const nlohmann::json& doc, std::vector<ConfigViolation>& violations);

/// parse_config + validate_config; throws ConfigError with every problem found.
[[nodiscard]] ValidatedRunConfig load_config(const nlohmann::json& doc);
[[nodiscard]] ValidatedRunConfig load_config_file(const std::filesystem::path& path);

[[nodiscard]] std::shared_ptr<const testbed::LandscapeConfig> landscape_of(const ValidatedRunConfig& cfg);

/// Instantiates backends and the reward model and binds them into a pool.
[[nodiscard]] AgentPool build_pool(const ValidatedRunConfig& cfg,
                                   std::shared_ptr<ConcurrencyLimiter> limiter = nullptr);

} // namespace toa
