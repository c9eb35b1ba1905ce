// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <toa/core.hpp>
#include <toa/testbed.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace toa
{

enum class TemplateMode
{
    fresh,
    refine_one,
    aggregate_many,
};

[[nodiscard]] std::string_view to_string(TemplateMode m) noexcept;

/// Prompt body with {question}, {prior_response} and {prior_responses_joined}
/// placeholders. Substitution is single-pass: braces inside substituted text
/// are never expanded again.
struct PromptTemplate
{
    std::string name;
    std::string body;
    TemplateMode mode = TemplateMode::fresh;
    std::string separator = "\n---\n";
};

/// Placeholder rules for the template's mode; empty when the template is well-formed.
[[nodiscard]] std::vector<std::string> template_problems(const PromptTemplate& t);

/// Throws TemplateArityError when `priors` does not fit the template's mode.
[[nodiscard]] std::string render_prompt(const PromptTemplate& t, std::string_view question,
                                        std::span<const std::string> priors);

struct TemplateSet
{
    PromptTemplate fresh;
    PromptTemplate refine_one;
    PromptTemplate aggregate_many;

    [[nodiscard]] static TemplateSet defaults();
    [[nodiscard]] const PromptTemplate& for_mode(TemplateMode m) const noexcept;
};

struct GenerationRecord
{
    std::string text;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    std::string agent_id;
    double latency_ms = 0.0;
    int attempt = 1;
};

enum class BackendKind
{
    http_chat,
    mock,
};

struct BackendDescriptor
{
    BackendKind kind = BackendKind::mock;
    std::optional<std::string> endpoint_url;
    std::optional<std::string> auth_env_var;
    std::optional<std::string> mock_params_ref;
    /// Model name sent to chat endpoints; defaults to the agent id.
    std::optional<std::string> model;
    int retry_limit = 2;
    int timeout_ms = 60000;
};

/// Bounds the number of simultaneous backend calls across all threads.
class ConcurrencyLimiter
{
  public:
    explicit ConcurrencyLimiter(int max_concurrent);

    class Permit
    {
      public:
        /// A null owner means no limit: the permit is a no-op.
        explicit Permit(ConcurrencyLimiter* owner): _owner(owner)
        {
            if (_owner)
                _owner->_slots.acquire();
        }
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;
        ~Permit()
        {
            if (_owner)
                _owner->_slots.release();
        }

      private:
        ConcurrencyLimiter* _owner;
    };

    [[nodiscard]] Permit acquire() { return Permit { this }; }
    [[nodiscard]] int capacity() const noexcept { return _capacity; }

  private:
    int _capacity;
    std::counting_semaphore<> _slots;
};

/// Seed used for a given 1-based attempt of one call.
using AttemptSeeds = std::function<std::uint64_t(int attempt)>;

class GenerationBackend
{
  public:
    virtual ~GenerationBackend() = default;

    virtual GenerationRecord generate(const AgentSpec& agent, std::string_view rendered_prompt,
                                      const DecodingParams& decoding, const AttemptSeeds& seeds) const = 0;

    GenerationRecord generate(const AgentSpec& agent, std::string_view rendered_prompt,
                              const DecodingParams& decoding) const;
};

/// Testbed-backed generator. Output is a pure function of
/// (agent_id, rendered prompt, seed): any mock tags found in the prompt are
/// treated as the responses being refined.
class MockBackend final: public GenerationBackend
{
  public:
    MockBackend(std::shared_ptr<const testbed::LandscapeConfig> landscape, testbed::MockAgentParams params);

    using GenerationBackend::generate;
    GenerationRecord generate(const AgentSpec& agent, std::string_view rendered_prompt,
                              const DecodingParams& decoding, const AttemptSeeds& seeds) const override;

  private:
    std::shared_ptr<const testbed::LandscapeConfig> _landscape;
    testbed::MockAgentParams _params;
};

/// Chat-completions client: POST {model, messages, temperature, top_p,
/// max_tokens, seed}, read choices[0].message.content and usage.
class HttpChatBackend final: public GenerationBackend
{
  public:
    HttpChatBackend(BackendDescriptor descriptor, std::shared_ptr<ConcurrencyLimiter> limiter = nullptr);

    using GenerationBackend::generate;
    GenerationRecord generate(const AgentSpec& agent, std::string_view rendered_prompt,
                              const DecodingParams& decoding, const AttemptSeeds& seeds) const override;

  private:
    BackendDescriptor _descriptor;
    std::shared_ptr<ConcurrencyLimiter> _limiter;
};

[[nodiscard]] std::shared_ptr<GenerationBackend>
make_backend(const BackendDescriptor& descriptor, std::shared_ptr<const testbed::LandscapeConfig> landscape,
             std::shared_ptr<ConcurrencyLimiter> limiter);

/// One-shot form: build the backend described by `b` and run a single call.
[[nodiscard]] GenerationRecord generate(const BackendDescriptor& b, const AgentSpec& agent,
                                        std::string_view rendered_prompt, const DecodingParams& d,
                                        std::shared_ptr<const testbed::LandscapeConfig> landscape = nullptr);

/// Splits "http://host:port/path" into ("http://host:port", "/path").
[[nodiscard]] std::pair<std::string, std::string> split_endpoint(std::string_view url);

} // namespace toa
