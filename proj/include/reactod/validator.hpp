// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <reactod/schema.hpp>
#include <reactod/tools.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace reactod
{

struct AgentTrace;

enum class ViolationCategory
{
    ActionCompliance,
    SchemaConformance,
    CoreferenceConsistency,
};

enum class ViolationCode
{
    UndefinedTool,
    MissingPrerequisiteIC,
    DuplicateCall,
    UnknownIntent,
    UnknownSlot,
    EnumViolation,
    FormatViolation,
    GenericReference,
};

inline constexpr ViolationCategory kAllCategories[] = {
    ViolationCategory::ActionCompliance,
    ViolationCategory::SchemaConformance,
    ViolationCategory::CoreferenceConsistency,
};

inline constexpr ViolationCode kAllCodes[] = {
    ViolationCode::MissingPrerequisiteIC, ViolationCode::UndefinedTool, ViolationCode::DuplicateCall,
    ViolationCode::EnumViolation,         ViolationCode::UnknownSlot,   ViolationCode::UnknownIntent,
    ViolationCode::FormatViolation,       ViolationCode::GenericReference,
};

std::string_view to_string(ViolationCategory category);
std::string_view to_string(ViolationCode code);
std::optional<ViolationCategory> category_from_string(std::string_view s);
std::optional<ViolationCode> code_from_string(std::string_view s);
ViolationCategory category_of(ViolationCode code);

struct Violation
{
    ViolationCategory category;
    ViolationCode code;
    std::string message; // fed back to the agent verbatim
    std::string subject; // tool, intent or slot name

    bool operator==(Violation const&) const = default;
};

/// Pass, or Fail with at least one violation.
class ValidationOutcome
{
  public:
    ValidationOutcome() = default;

    static ValidationOutcome pass() { return {}; }
    static ValidationOutcome fail(std::vector<Violation> violations);

    [[nodiscard]] bool passed() const noexcept { return _violations.empty(); }
    [[nodiscard]] std::vector<Violation> const& violations() const noexcept { return _violations; }

    bool operator==(ValidationOutcome const&) const = default;

  private:
    std::vector<Violation> _violations;
};

/// Special value accepted for every typed slot ("user has no preference").
inline constexpr std::string_view kDontCare = "dontcare";

/// Value format checks. Expose the exact patterns enforced on norm values.
bool is_valid_time(std::string_view value);   // ^([01][0-9]|2[0-3]):[0-5][0-9]$
bool is_valid_date(std::string_view value);   // ^\d{4}-\d{2}-\d{2}$
bool is_valid_number(std::string_view value); // ^\d+$

/// Screens one proposed call against the in-turn trace and the ontology.
/// Checks run action -> schema -> coreference and every violation found is
/// reported. Never throws.
ValidationOutcome validate(ToolCall const& call, AgentTrace const& turn_trace, Schema const& schema);

std::vector<Violation> check_schema_conformance(std::vector<SlotExtraction> const& extractions,
                                                std::string_view intent_id,
                                                Schema const& schema);

std::vector<Violation> check_coreference(std::vector<SlotExtraction> const& extractions, Schema const& schema);

/// One line per violation, in outcome order. Throws InternalFault on Pass.
std::string render_feedback(ValidationOutcome const& outcome);

} // namespace reactod
