// SPDX-License-Identifier: Apache-2.0
#include <toa/config.hpp>

#include <nlohmann/json.hpp>

#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace toa
{

using nlohmann::json;

namespace
{
    /// Field reader that records type problems instead of throwing.
    class Reader
    {
      public:
        explicit Reader(std::vector<ConfigViolation>& out): _out(out) {}

        void fail(std::string field, std::string reason) { _out.push_back({ std::move(field), std::move(reason) }); }

        template <typename T>
        void read(const json& obj, const char* key, const std::string& field, T& target)
        {
            if (!obj.is_object())
                return;
            auto it = obj.find(key);
            if (it == obj.end() || it->is_null())
                return;
            try
            {
                if constexpr (std::is_same_v<T, std::uint64_t>)
                {
                    if (it->is_number_float())
                    {
                        const auto d = it->get<double>();
                        if (d < 0 || d != std::floor(d) || d > 1.8e19)
                            return fail(field, "must be a nonnegative integer");
                        target = static_cast<std::uint64_t>(d);
                        return;
                    }
                    if (it->is_number_integer() && it->get<long long>() < 0 && !it->is_number_unsigned())
                        return fail(field, "must be a nonnegative integer");
                }
                if constexpr (std::is_same_v<T, long long>)
                    if (it->is_number_float())
                    {
                        const auto d = it->get<double>();
                        if (d != std::floor(d))
                            return fail(field, "must be an integer");
                        target = static_cast<long long>(d);
                        return;
                    }
                if constexpr (std::is_same_v<T, std::string>)
                    if (!it->is_string())
                        return fail(field, "must be a string");
                if constexpr (std::is_arithmetic_v<T> && !std::is_same_v<T, bool>)
                    if (!it->is_number())
                        return fail(field, "must be a number");
                target = it->get<T>();
            }
            catch (const json::exception& e)
            {
                fail(field, e.what());
            }
        }

        template <typename T>
        void read(const json& obj, const char* key, const std::string& field, std::optional<T>& target)
        {
            if (!obj.is_object() || !obj.contains(key) || obj[key].is_null())
                return;
            auto value = T {};
            const auto before = _out.size();
            read(obj, key, field, value);
            if (_out.size() == before)
                target = std::move(value);
        }

      private:
        std::vector<ConfigViolation>& _out;
    };

    constexpr int MockTagTokens = 5;

    bool valid_agent_id(std::string_view id)
    {
        if (id.empty() || id.front() == '@')
            return false;
        return std::none_of(id.begin(), id.end(),
                            [](unsigned char c) { return std::isspace(c) || c == ']' || c == '[' || c == ','; });
    }

    std::optional<TemplateMode> parse_mode(std::string_view s)
    {
        for (auto m: { TemplateMode::fresh, TemplateMode::refine_one, TemplateMode::aggregate_many })
            if (to_string(m) == s)
                return m;
        return std::nullopt;
    }
} // namespace

RunConfig parse_config(const json& doc, std::vector<ConfigViolation>& violations)
{
    auto cfg = RunConfig {};
    auto r = Reader { violations };
    if (!doc.is_object())
    {
        r.fail("<root>", "config must be a JSON object");
        return cfg;
    }

    r.read(doc, "N", "N", cfg.N);
    if (doc.contains("strategy"))
    {
        auto name = std::string {};
        r.read(doc, "strategy", "strategy", name);
        if (auto s = parse_strategy(name))
            cfg.strategy = *s;
        else
            r.fail("strategy", "unknown strategy '" + name + "'");
    }
    r.read(doc, "master_seed", "master_seed", cfg.master_seed);
    r.read(doc, "max_concurrency", "max_concurrency", cfg.max_concurrency);
    r.read(doc, "flops_multiplier", "flops_multiplier", cfg.flops_multiplier);

    if (auto it = doc.find("agents"); it != doc.end())
    {
        if (!it->is_array())
            r.fail("agents", "must be an array");
        else
            for (std::size_t i = 0; i < it->size(); ++i)
            {
                const auto& a = (*it)[i];
                const auto field = "agents[" + std::to_string(i) + "]";
                auto spec = AgentSpec {};
                r.read(a, "agent_id", field + ".agent_id", spec.agent_id);
                r.read(a, "param_count", field + ".param_count", spec.param_count);
                r.read(a, "backend_ref", field + ".backend_ref", spec.backend_ref);
                r.read(a, "display_name", field + ".display_name", spec.display_name);
                if (spec.display_name.empty())
                    spec.display_name = spec.agent_id;
                cfg.agents.push_back(std::move(spec));
            }
    }

    if (auto it = doc.find("backends"); it != doc.end() && it->is_object())
        for (const auto& [name, b]: it->items())
        {
            const auto field = "backends." + name;
            auto d = BackendDescriptor {};
            auto kind = std::string { "mock" };
            r.read(b, "kind", field + ".kind", kind);
            if (kind == "http_chat")
                d.kind = BackendKind::http_chat;
            else if (kind != "mock")
                r.fail(field + ".kind", "unknown backend kind '" + kind + "'");
            r.read(b, "endpoint_url", field + ".endpoint_url", d.endpoint_url);
            r.read(b, "auth_env_var", field + ".auth_env_var", d.auth_env_var);
            r.read(b, "mock_params_ref", field + ".mock_params_ref", d.mock_params_ref);
            r.read(b, "model", field + ".model", d.model);
            r.read(b, "retry_limit", field + ".retry_limit", d.retry_limit);
            r.read(b, "timeout_ms", field + ".timeout_ms", d.timeout_ms);
            cfg.backends.emplace(name, std::move(d));
        }

    r.read(doc, "reward_backend", "reward_backend", cfg.reward_backend_ref);
    if (auto it = doc.find("reward_backends"); it != doc.end() && it->is_object())
        for (const auto& [name, b]: it->items())
        {
            const auto field = "reward_backends." + name;
            auto d = RewardBackendDescriptor {};
            auto kind = std::string { "mock" };
            r.read(b, "kind", field + ".kind", kind);
            if (kind == "http_scalar")
                d.kind = RewardKind::http_scalar;
            else if (kind != "mock")
                r.fail(field + ".kind", "unknown reward backend kind '" + kind + "'");
            r.read(b, "endpoint_url", field + ".endpoint_url", d.endpoint_url);
            r.read(b, "reward_noise", field + ".reward_noise", d.reward_noise);
            r.read(b, "retry_limit", field + ".retry_limit", d.retry_limit);
            r.read(b, "timeout_ms", field + ".timeout_ms", d.timeout_ms);
            r.read(b, "param_count", field + ".param_count", d.param_count);
            cfg.reward_backends.emplace(name, std::move(d));
        }
    if (cfg.reward_backends.empty() && cfg.reward_backend_ref == "mock")
        cfg.reward_backends.emplace("mock", RewardBackendDescriptor {});

    if (auto it = doc.find("strategy_params"); it != doc.end() && it->is_object())
    {
        const auto& sp = *it;
        if (auto rs = sp.find("random_single"); rs != sp.end())
            r.read(*rs, "agent", "strategy_params.random_single.agent", cfg.random_single.agent_id);
        if (auto moa = sp.find("moa"); moa != sp.end())
        {
            r.read(*moa, "num_layers", "strategy_params.moa.num_layers", cfg.moa_layers);
            r.read(*moa, "aggregate_template", "strategy_params.moa.aggregate_template", cfg.moa_aggregate_template);
        }
        if (auto t = sp.find("toa"); t != sp.end())
        {
            r.read(*t, "alpha", "strategy_params.toa.alpha", cfg.toa.alpha);
            r.read(*t, "max_width", "strategy_params.toa.max_width", cfg.toa.max_width);
            r.read(*t, "max_depth", "strategy_params.toa.max_depth", cfg.toa.max_depth);
            r.read(*t, "ucb_parent_visits", "strategy_params.toa.ucb_parent_visits", cfg.toa.ucb_parent_visits);
            auto mode = std::string {};
            r.read(*t, "root_merge_mode", "strategy_params.toa.root_merge_mode", mode);
            if (mode == "fresh")
                cfg.toa.root_merge_mode = RootMergeMode::fresh;
            else if (mode == "refine")
                cfg.toa.root_merge_mode = RootMergeMode::refine;
            else if (!mode.empty())
                r.fail("strategy_params.toa.root_merge_mode", "must be 'fresh' or 'refine'");
        }
    }

    if (auto it = doc.find("decoding"); it != doc.end())
    {
        r.read(*it, "temperature", "decoding.temperature", cfg.decoding.temperature);
        r.read(*it, "top_p", "decoding.top_p", cfg.decoding.top_p);
        r.read(*it, "max_tokens", "decoding.max_tokens", cfg.decoding.max_tokens);
    }

    for (const auto& t: { TemplateSet::defaults().fresh, TemplateSet::defaults().refine_one,
                          TemplateSet::defaults().aggregate_many })
        cfg.templates.emplace(t.name, t);
    if (auto it = doc.find("templates"); it != doc.end() && it->is_object())
        for (const auto& [name, t]: it->items())
        {
            const auto field = "templates." + name;
            auto tpl = PromptTemplate { .name = name };
            auto mode = std::string {};
            r.read(t, "mode", field + ".mode", mode);
            if (auto m = parse_mode(mode))
                tpl.mode = *m;
            else
                r.fail(field + ".mode", "must be fresh, refine_one or aggregate_many");
            r.read(t, "body", field + ".body", tpl.body);
            r.read(t, "separator", field + ".separator", tpl.separator);
            cfg.templates.insert_or_assign(name, std::move(tpl));
        }
    if (auto it = doc.find("template_selection"); it != doc.end())
    {
        r.read(*it, "fresh", "template_selection.fresh", cfg.template_selection.fresh);
        r.read(*it, "refine_one", "template_selection.refine_one", cfg.template_selection.refine_one);
        r.read(*it, "aggregate_many", "template_selection.aggregate_many", cfg.template_selection.aggregate_many);
    }

    if (auto it = doc.find("testbed"); it != doc.end() && it->is_object())
    {
        auto lc = testbed::LandscapeConfig {};
        r.read(*it, "cross_model_bonus", "testbed.cross_model_bonus", lc.cross_model_bonus);
        r.read(*it, "quality_cap", "testbed.quality_cap", lc.quality_cap);
        if (auto agents = it->find("agents"); agents != it->end() && agents->is_array())
            for (std::size_t i = 0; i < agents->size(); ++i)
            {
                const auto field = "testbed.agents[" + std::to_string(i) + "]";
                auto p = testbed::MockAgentParams {};
                r.read((*agents)[i], "agent_id", field + ".agent_id", p.agent_id);
                r.read((*agents)[i], "base_quality", field + ".base_quality", p.base_quality);
                r.read((*agents)[i], "refine_gain", field + ".refine_gain", p.refine_gain);
                r.read((*agents)[i], "noise", field + ".noise", p.noise);
                lc.agents.push_back(std::move(p));
            }
        cfg.testbed = std::move(lc);
    }
    return cfg;
}

ValidatedRunConfig validate_config(const RunConfig& cfg)
{
    auto errors = std::vector<ConfigViolation> {};
    auto fail = [&](std::string field, std::string reason) { errors.push_back({ std::move(field), std::move(reason) }); };

    if (cfg.N < 1)
        fail("N", "must be at least 1");

    if (cfg.testbed)
    {
        const auto& lc = *cfg.testbed;
        if (lc.cross_model_bonus < 0.0)
            fail("testbed.cross_model_bonus", "must be nonnegative");
        if (!(lc.quality_cap > 0.0))
            fail("testbed.quality_cap", "must be positive");
        auto ids = std::set<std::string> {};
        for (std::size_t i = 0; i < lc.agents.size(); ++i)
        {
            const auto& p = lc.agents[i];
            const auto field = "testbed.agents[" + std::to_string(i) + "]";
            if (!ids.insert(p.agent_id).second)
                fail(field + ".agent_id", "duplicate testbed agent '" + p.agent_id + "'");
            if (p.base_quality < 0.0 || p.base_quality > 1.0)
                fail(field + ".base_quality", "must lie in [0, 1]");
            if (p.refine_gain < 0.0 || p.refine_gain > 1.0)
                fail(field + ".refine_gain", "must lie in [0, 1]");
            if (p.noise < 0.0)
                fail(field + ".noise", "must be nonnegative");
        }
    }

    for (const auto& [name, b]: cfg.backends)
    {
        const auto field = "backends." + name;
        if (b.kind == BackendKind::http_chat && !b.endpoint_url)
            fail(field + ".endpoint_url", "required for http_chat backends");
        if (b.kind == BackendKind::mock)
        {
            if (!b.mock_params_ref)
                fail(field + ".mock_params_ref", "required for mock backends");
            else if (!cfg.testbed || !cfg.testbed->find(*b.mock_params_ref))
                fail(field + ".mock_params_ref", "no testbed agent named '" + *b.mock_params_ref + "'");
        }
        if (b.retry_limit < 0 || b.retry_limit > 10)
            fail(field + ".retry_limit", "must lie in [0, 10]");
        if (b.timeout_ms <= 0)
            fail(field + ".timeout_ms", "must be positive");
    }

    if (cfg.agents.empty())
        fail("agents", "at least one agent is required");
    auto agent_ids = std::set<std::string> {};
    for (std::size_t i = 0; i < cfg.agents.size(); ++i)
    {
        const auto& a = cfg.agents[i];
        const auto field = "agents[" + std::to_string(i) + "]";
        if (!valid_agent_id(a.agent_id))
            fail(field + ".agent_id", "must be nonempty, not start with '@', and contain no whitespace or brackets");
        else if (!agent_ids.insert(a.agent_id).second)
            fail(field + ".agent_id", "duplicate agent '" + a.agent_id + "'");
        if (a.param_count == 0)
            fail(field + ".param_count", "must be positive");
        if (!cfg.backends.contains(a.backend_ref))
            fail(field + ".backend_ref", "no backend named '" + a.backend_ref + "'");
    }

    if (auto it = cfg.reward_backends.find(cfg.reward_backend_ref); it == cfg.reward_backends.end())
        fail("reward_backend", "no reward backend named '" + cfg.reward_backend_ref + "'");
    else
    {
        const auto& rb = it->second;
        const auto field = "reward_backends." + cfg.reward_backend_ref;
        if (rb.kind == RewardKind::http_scalar && !rb.endpoint_url)
            fail(field + ".endpoint_url", "required for http_scalar reward backends");
        if (rb.kind == RewardKind::mock && !cfg.testbed)
            fail(field + ".kind", "mock reward backend requires a testbed table");
        if (rb.reward_noise < 0.0)
            fail(field + ".reward_noise", "must be nonnegative");
        if (rb.retry_limit < 0 || rb.retry_limit > 10)
            fail(field + ".retry_limit", "must lie in [0, 10]");
    }

    if (cfg.decoding.temperature < 0.0)
        fail("decoding.temperature", "must be nonnegative");
    if (!(cfg.decoding.top_p > 0.0 && cfg.decoding.top_p <= 1.0))
        fail("decoding.top_p", "must lie in (0, 1]");
    if (cfg.decoding.max_tokens <= 0)
        fail("decoding.max_tokens", "must be positive");
    else if (cfg.decoding.max_tokens < MockTagTokens
             && std::any_of(cfg.backends.begin(), cfg.backends.end(),
                            [](const auto& b) { return b.second.kind == BackendKind::mock; }))
        fail("decoding.max_tokens", "mock backends need at least " + std::to_string(MockTagTokens)
                                        + " tokens for the quality tag");
    if (cfg.max_concurrency < 1)
        fail("max_concurrency", "must be at least 1");
    if (!(cfg.flops_multiplier > 0.0))
        fail("flops_multiplier", "must be positive");

    auto out = ValidatedRunConfig { .config = cfg };

    auto resolve = [&](const std::string& name, TemplateMode mode, const std::string& field) -> PromptTemplate {
        auto it = cfg.templates.find(name);
        if (it == cfg.templates.end())
        {
            fail(field, "no template named '" + name + "'");
            return {};
        }
        if (it->second.mode != mode)
            fail(field, "template '" + name + "' has mode " + std::string { to_string(it->second.mode) }
                            + ", expected " + std::string { to_string(mode) });
        for (const auto& problem: template_problems(it->second))
            fail("templates." + name, problem);
        return it->second;
    };
    out.templates.fresh = resolve(cfg.template_selection.fresh, TemplateMode::fresh, "template_selection.fresh");
    out.templates.refine_one =
        resolve(cfg.template_selection.refine_one, TemplateMode::refine_one, "template_selection.refine_one");
    const auto aggregate_name = cfg.moa_aggregate_template.value_or(cfg.template_selection.aggregate_many);
    out.templates.aggregate_many = resolve(aggregate_name, TemplateMode::aggregate_many,
                                           cfg.moa_aggregate_template ? "strategy_params.moa.aggregate_template"
                                                                      : "template_selection.aggregate_many");

    const auto k = static_cast<long long>(cfg.agents.size());
    const auto n = std::max<long long>(cfg.N, 1);
    out.n = static_cast<std::size_t>(n);
    switch (cfg.strategy)
    {
        case Strategy::random_single:
            if (cfg.random_single.agent_id && !agent_ids.contains(*cfg.random_single.agent_id))
                fail("strategy_params.random_single.agent", "no agent named '" + *cfg.random_single.agent_id + "'");
            break;
        case Strategy::parallel_ensemble:
        case Strategy::sequential_refine:
        case Strategy::moa:
            if (k > 0 && cfg.N >= 1 && cfg.N % k != 0)
                fail("N", std::string { to_string(cfg.strategy) } + " requires N (" + std::to_string(cfg.N)
                              + ") to be divisible by the number of agents K (" + std::to_string(k) + ")");
            break;
        case Strategy::toa: break;
    }

    if (cfg.moa_layers < 1)
        fail("strategy_params.moa.num_layers", "must be at least 1");
    out.moa.num_layers = static_cast<std::size_t>(std::max<long long>(cfg.moa_layers, 1));
    out.moa.aggregate_template_ref = aggregate_name;

    out.toa.N = out.n;
    out.toa.alpha = cfg.toa.alpha.value_or(0.01);
    if (!(out.toa.alpha > 0.0))
        fail("strategy_params.toa.alpha", "must be positive");
    if (cfg.toa.max_width && *cfg.toa.max_width < 1)
        fail("strategy_params.toa.max_width", "must be at least 1");
    out.toa.max_width = cfg.toa.max_width && *cfg.toa.max_width >= 1 ? static_cast<std::size_t>(*cfg.toa.max_width)
                                                                      : default_toa_width(out.n);
    if (cfg.toa.max_depth)
    {
        if (*cfg.toa.max_depth < 1)
            fail("strategy_params.toa.max_depth", "must be at least 1");
        else
            out.toa.max_depth = static_cast<std::size_t>(*cfg.toa.max_depth);
    }
    out.toa.root_merge_mode = cfg.toa.root_merge_mode;
    out.toa.ucb_parent_visits = cfg.toa.ucb_parent_visits;

    if (!errors.empty())
        throw ConfigError(std::move(errors));
    return out;
}

ValidatedRunConfig load_config(const json& doc)
{
    auto violations = std::vector<ConfigViolation> {};
    auto cfg = parse_config(doc, violations);
    try
    {
        auto validated = validate_config(cfg);
        if (!violations.empty())
            throw ConfigError(std::move(violations));
        return validated;
    }
    catch (const ConfigError& e)
    {
        violations.insert(violations.end(), e.violations().begin(), e.violations().end());
        throw ConfigError(std::move(violations));
    }
}

ValidatedRunConfig load_config_file(const std::filesystem::path& path)
{
    auto in = std::ifstream { path };
    if (!in)
        throw IoError("cannot read config '" + path.string() + "'");
    auto doc = json::parse(in, nullptr, false);
    if (doc.is_discarded())
        throw ConfigError("<file>", "'" + path.string() + "' is not valid JSON");
    return load_config(doc);
}

std::shared_ptr<const testbed::LandscapeConfig> landscape_of(const ValidatedRunConfig& cfg)
{
    if (!cfg.config.testbed)
        return nullptr;
    return std::make_shared<const testbed::LandscapeConfig>(*cfg.config.testbed);
}

AgentPool build_pool(const ValidatedRunConfig& cfg, std::shared_ptr<ConcurrencyLimiter> limiter)
{
    if (!limiter)
        limiter = std::make_shared<ConcurrencyLimiter>(static_cast<int>(cfg.config.max_concurrency));
    const auto landscape = landscape_of(cfg);
    auto backends = std::vector<std::shared_ptr<GenerationBackend>> {};
    for (const auto& agent: cfg.config.agents)
        backends.push_back(make_backend(cfg.config.backends.at(agent.backend_ref), landscape, limiter));
    auto reward = make_reward_model(cfg.config.reward_backends.at(cfg.config.reward_backend_ref), limiter);
    return AgentPool { cfg.config.agents, std::move(backends), std::move(reward), cfg.templates,
                       cfg.config.decoding,  cfg.config.master_seed, cfg.config.flops_multiplier };
}

} // namespace toa
