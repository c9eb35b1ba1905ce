// SPDX-License-Identifier: Apache-2.0
#include <toa/backends.hpp>
#include <toa/seed.hpp>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <random>
#include <thread>

namespace toa
{

namespace
{
    constexpr std::string_view PhQuestion = "{question}";
    constexpr std::string_view PhPrior = "{prior_response}";
    constexpr std::string_view PhPriorsJoined = "{prior_responses_joined}";

    std::string_view placeholder_at(std::string_view body, std::size_t pos)
    {
        for (auto ph: { PhQuestion, PhPrior, PhPriorsJoined })
            if (body.substr(pos).starts_with(ph))
                return ph;
        return {};
    }

    bool contains(std::string_view hay, std::string_view needle)
    {
        return hay.find(needle) != std::string_view::npos;
    }

    AttemptSeeds constant_seeds(std::uint64_t seed)
    {
        return [seed](int attempt) { return attempt <= 1 ? seed : hash_combine(seed, std::uint64_t(attempt)); };
    }
} // namespace

std::string_view to_string(TemplateMode m) noexcept
{
    switch (m)
    {
        case TemplateMode::fresh: return "fresh";
        case TemplateMode::refine_one: return "refine_one";
        case TemplateMode::aggregate_many: return "aggregate_many";
    }
    return "unknown";
}

std::vector<std::string> template_problems(const PromptTemplate& t)
{
    auto problems = std::vector<std::string> {};
    const auto has_prior = contains(t.body, PhPrior);
    const auto has_joined = contains(t.body, PhPriorsJoined);
    if (!contains(t.body, PhQuestion))
        problems.emplace_back("template must contain {question}");
    switch (t.mode)
    {
        case TemplateMode::fresh:
            if (has_prior || has_joined)
                problems.emplace_back("fresh template must not reference prior responses");
            break;
        case TemplateMode::refine_one:
            if (!has_prior)
                problems.emplace_back("refine_one template must contain {prior_response}");
            break;
        case TemplateMode::aggregate_many:
            if (!has_joined)
                problems.emplace_back("aggregate_many template must contain {prior_responses_joined}");
            break;
    }
    return problems;
}

std::string render_prompt(const PromptTemplate& t, std::string_view question, std::span<const std::string> priors)
{
    const auto arity_ok = [&] {
        switch (t.mode)
        {
            case TemplateMode::fresh: return priors.empty();
            case TemplateMode::refine_one: return priors.size() == 1;
            case TemplateMode::aggregate_many: return !priors.empty();
        }
        return false;
    }();
    if (!arity_ok)
        throw TemplateArityError("template '" + t.name + "' (" + std::string { to_string(t.mode) } + ") got "
                                 + std::to_string(priors.size()) + " prior response(s)");

    auto joined = std::string {};
    if (t.mode == TemplateMode::aggregate_many)
        for (std::size_t i = 0; i < priors.size(); ++i)
        {
            if (i > 0)
                joined += t.separator;
            joined += priors[i];
        }

    auto out = std::string {};
    out.reserve(t.body.size() + question.size() + joined.size());
    const std::string_view body = t.body;
    for (std::size_t pos = 0; pos < body.size();)
    {
        auto ph = body[pos] == '{' ? placeholder_at(body, pos) : std::string_view {};
        if (ph.empty())
        {
            out += body[pos++];
            continue;
        }
        if (ph == PhQuestion)
            out += question;
        else if (ph == PhPrior)
            out += priors.empty() ? std::string_view {} : std::string_view { priors.front() };
        else
            out += joined;
        pos += ph.size();
    }
    return out;
}

TemplateSet TemplateSet::defaults()
{
    return TemplateSet {
        .fresh = { "fresh", "{question}", TemplateMode::fresh, "\n---\n" },
        .refine_one = { "refine_one",
                        "Question:\n{question}\n\nHere is a previous answer to the question:\n{prior_response}\n\n"
                        "Improve the previous answer: fix any mistakes and make it more helpful. "
                        "Reply with the improved answer only.",
                        TemplateMode::refine_one, "\n---\n" },
        .aggregate_many = { "aggregate_many",
                            "Question:\n{question}\n\nHere are answers from several assistants:\n"
                            "{prior_responses_joined}\n\n"
                            "Critically evaluate these answers and synthesize them into a single, improved answer. "
                            "Reply with the answer only.",
                            TemplateMode::aggregate_many, "\n---\n" },
    };
}

const PromptTemplate& TemplateSet::for_mode(TemplateMode m) const noexcept
{
    switch (m)
    {
        case TemplateMode::fresh: return fresh;
        case TemplateMode::refine_one: return refine_one;
        case TemplateMode::aggregate_many: return aggregate_many;
    }
    return fresh;
}

ConcurrencyLimiter::ConcurrencyLimiter(int max_concurrent):
    _capacity(std::max(1, max_concurrent)), _slots(std::max(1, max_concurrent))
{
}

GenerationRecord GenerationBackend::generate(const AgentSpec& agent, std::string_view rendered_prompt,
                                             const DecodingParams& decoding) const
{
    return generate(agent, rendered_prompt, decoding, constant_seeds(decoding.seed));
}

// ---------------------------------------------------------------------------
// Mock

MockBackend::MockBackend(std::shared_ptr<const testbed::LandscapeConfig> landscape, testbed::MockAgentParams params):
    _landscape(std::move(landscape)), _params(std::move(params))
{
    if (!_landscape)
        throw std::invalid_argument("mock backend requires a landscape");
}

GenerationRecord MockBackend::generate(const AgentSpec& agent, std::string_view rendered_prompt,
                                       const DecodingParams& decoding, const AttemptSeeds& seeds) const
{
    const auto seed = hash_combine(hash_combine(fnv1a64(agent.agent_id), fnv1a64(rendered_prompt)), seeds(1));

    // The best tagged response in the prompt is the one being refined.
    auto priors = testbed::find_tags(rendered_prompt);
    const testbed::MockTag* parent = nullptr;
    for (const auto& tag: priors)
        if (!parent || tag.quality > parent->quality)
            parent = &tag;

    auto params = _params;
    params.agent_id = agent.agent_id;
    auto tag = testbed::MockTag { .agent_id = agent.agent_id };
    if (parent)
    {
        tag.parent_agent = parent->agent_id;
        tag.depth = parent->depth + 1;
        tag.quality = testbed::mock_quality(*_landscape, params, parent->quality, parent->agent_id, seed);
    }
    else
        tag.quality = testbed::mock_quality(*_landscape, params, std::nullopt, std::nullopt, seed);

    auto text = testbed::encode_tag(tag);
    const auto tag_tokens = count_whitespace_tokens(text);
    if (decoding.max_tokens < 0 || static_cast<std::uint64_t>(decoding.max_tokens) < tag_tokens)
        throw std::invalid_argument("mock responses need max_tokens >= " + std::to_string(tag_tokens));
    auto rng = std::mt19937_64 { splitmix64(seed) };
    const auto budget = static_cast<std::uint64_t>(decoding.max_tokens) - tag_tokens;
    const auto filler = std::min<std::uint64_t>(8 + rng() % 25, budget);
    for (std::uint64_t i = 0; i < filler; ++i)
    {
        static constexpr const char* Words[] = { "answer", "step", "because", "therefore", "result", "detail",
                                                 "consider", "example", "note", "value", "so", "thus" };
        text += ' ';
        text += Words[rng() % std::size(Words)];
    }

    return GenerationRecord {
        .text = std::move(text),
        .prompt_tokens = count_whitespace_tokens(rendered_prompt),
        .completion_tokens = tag_tokens + filler,
        .agent_id = agent.agent_id,
        .latency_ms = 0.0,
        .attempt = 1,
    };
}

// ---------------------------------------------------------------------------
// HTTP chat

std::pair<std::string, std::string> split_endpoint(std::string_view url)
{
    auto scheme_end = url.find("://");
    auto host_start = scheme_end == std::string_view::npos ? 0 : scheme_end + 3;
    auto path_start = url.find('/', host_start);
    if (path_start == std::string_view::npos)
        return { std::string { url }, "/" };
    return { std::string { url.substr(0, path_start) }, std::string { url.substr(path_start) } };
}

HttpChatBackend::HttpChatBackend(BackendDescriptor descriptor, std::shared_ptr<ConcurrencyLimiter> limiter):
    _descriptor(std::move(descriptor)), _limiter(std::move(limiter))
{
    if (!_descriptor.endpoint_url)
        throw std::invalid_argument("http_chat backend requires endpoint_url");
}

GenerationRecord HttpChatBackend::generate(const AgentSpec& agent, std::string_view rendered_prompt,
                                           const DecodingParams& decoding, const AttemptSeeds& seeds) const
{
    using nlohmann::json;

    auto [base, path] = split_endpoint(*_descriptor.endpoint_url);
    auto headers = httplib::Headers {};
    if (_descriptor.auth_env_var)
        if (const char* token = std::getenv(_descriptor.auth_env_var->c_str()))
            headers.emplace("Authorization", std::string { "Bearer " } + token);

    const auto attempts = std::max(0, _descriptor.retry_limit) + 1;
    auto last_error = std::string { "no attempt made" };
    bool last_was_empty = false;

    for (int attempt = 1; attempt <= attempts; ++attempt)
    {
        auto request = json {
            { "model", _descriptor.model.value_or(agent.agent_id) },
            { "messages", json::array({ { { "role", "user" }, { "content", rendered_prompt } } }) },
            { "temperature", decoding.temperature },
            { "top_p", decoding.top_p },
            { "max_tokens", decoding.max_tokens },
            { "seed", seeds(attempt) },
        };

        auto client = httplib::Client { base };
        const auto timeout = std::chrono::milliseconds { _descriptor.timeout_ms };
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);

        const auto started = std::chrono::steady_clock::now();
        auto result = [&] {
            const auto permit = ConcurrencyLimiter::Permit { _limiter.get() };
            return client.Post(path, headers, request.dump(), "application/json");
        }();
        const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started);

        if (!result)
        {
            last_error = "transport error: " + httplib::to_string(result.error());
            last_was_empty = false;
            continue;
        }
        if (result->status >= 500 || result->status == 429)
        {
            last_error = "HTTP " + std::to_string(result->status);
            last_was_empty = false;
            continue;
        }
        if (result->status != 200)
            throw BackendUnavailable("agent '" + agent.agent_id + "': HTTP " + std::to_string(result->status) + ": "
                                     + result->body);

        auto body = json::parse(result->body, nullptr, false);
        if (body.is_discarded())
        {
            last_error = "malformed JSON response";
            last_was_empty = false;
            continue;
        }
        auto text = std::string {};
        if (auto choices = body.find("choices"); choices != body.end() && choices->is_array() && !choices->empty())
        {
            const auto& message = (*choices)[0].value("message", json::object());
            if (auto content = message.find("content"); content != message.end() && content->is_string())
                text = content->get<std::string>();
        }
        if (text.empty())
        {
            last_error = "provider returned no text";
            last_was_empty = true;
            continue;
        }

        auto record = GenerationRecord {
            .text = std::move(text),
            .prompt_tokens = count_whitespace_tokens(rendered_prompt),
            .completion_tokens = 0,
            .agent_id = agent.agent_id,
            .latency_ms = elapsed.count(),
            .attempt = attempt,
        };
        record.completion_tokens = count_whitespace_tokens(record.text);
        if (auto usage = body.find("usage"); usage != body.end() && usage->is_object())
        {
            record.prompt_tokens = usage->value("prompt_tokens", record.prompt_tokens);
            record.completion_tokens = usage->value("completion_tokens", record.completion_tokens);
        }
        return record;
    }

    if (last_was_empty)
        throw EmptyCompletion("agent '" + agent.agent_id + "': " + last_error + " after " + std::to_string(attempts)
                              + " attempt(s)");
    throw BackendUnavailable("agent '" + agent.agent_id + "': " + last_error + " after " + std::to_string(attempts)
                             + " attempt(s)");
}

std::shared_ptr<GenerationBackend> make_backend(const BackendDescriptor& descriptor,
                                                std::shared_ptr<const testbed::LandscapeConfig> landscape,
                                                std::shared_ptr<ConcurrencyLimiter> limiter)
{
    if (descriptor.kind == BackendKind::http_chat)
        return std::make_shared<HttpChatBackend>(descriptor, std::move(limiter));

    if (!landscape)
        throw std::invalid_argument("mock backend requires a testbed landscape");
    const auto* params = descriptor.mock_params_ref ? landscape->find(*descriptor.mock_params_ref) : nullptr;
    if (!params)
        throw std::invalid_argument("mock backend references unknown testbed agent '"
                                    + descriptor.mock_params_ref.value_or("") + "'");
    return std::make_shared<MockBackend>(landscape, *params);
}

GenerationRecord generate(const BackendDescriptor& b, const AgentSpec& agent, std::string_view rendered_prompt,
                          const DecodingParams& d, std::shared_ptr<const testbed::LandscapeConfig> landscape)
{
    return make_backend(b, std::move(landscape), nullptr)->generate(agent, rendered_prompt, d);
}

} // namespace toa
