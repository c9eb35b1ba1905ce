// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace toa
{

/// Base for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error report.
class Error: public std::runtime_error
{
  public:
    Error(std::string kind, const std::string& message):
        std::runtime_error(message), _kind(std::move(kind))
    {
    }

    [[nodiscard]] const std::string& kind() const noexcept { return _kind; }

  private:
    std::string _kind;
};

struct ConfigViolation
{
    std::string field;
    std::string reason;
};

/// Carries every violated rule found during validation, not just the first.
class ConfigError: public Error
{
  public:
    explicit ConfigError(std::vector<ConfigViolation> violations);
    ConfigError(std::string field, std::string reason);

    [[nodiscard]] const std::vector<ConfigViolation>& violations() const noexcept { return _violations; }

  private:
    std::vector<ConfigViolation> _violations;
};

#define TOA_DEFINE_ERROR(Name)                                                                                   \
    class Name: public Error                                                                                     \
    {                                                                                                            \
      public:                                                                                                    \
        explicit Name(const std::string& message): Error(#Name, message) {}                                      \
    };

TOA_DEFINE_ERROR(BudgetExhausted)
TOA_DEFINE_ERROR(TemplateArityError)
TOA_DEFINE_ERROR(BackendUnavailable)
TOA_DEFINE_ERROR(EmptyCompletion)
TOA_DEFINE_ERROR(RewardUnavailable)
TOA_DEFINE_ERROR(UnparsableMockSample)
TOA_DEFINE_ERROR(SearchExhausted)
TOA_DEFINE_ERROR(AlreadyExpanded)
TOA_DEFINE_ERROR(WidthExceeded)
TOA_DEFINE_ERROR(DegenerateFit)
TOA_DEFINE_ERROR(EmptySet)
TOA_DEFINE_ERROR(KTooLarge)
TOA_DEFINE_ERROR(NoExtractableAnswer)
TOA_DEFINE_ERROR(EmptyTree)
TOA_DEFINE_ERROR(MissingArtifact)
TOA_DEFINE_ERROR(IoError)

#undef TOA_DEFINE_ERROR

} // namespace toa
