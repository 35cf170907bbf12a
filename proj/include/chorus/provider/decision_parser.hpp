#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "chorus/core/decision.hpp"

namespace chorus {

struct ParseError {
    enum class Kind { no_json, missing_field, bad_value, bad_verdict, unknown_reaction };
    Kind kind = Kind::no_json;
    std::string detail;  // field name for missing_field, offending text otherwise

    bool operator==(const ParseError&) const = default;
};

std::string_view to_string(ParseError::Kind kind);
std::string describe(const ParseError& e);

using DecisionParse = std::variant<AgentDecision, ParseError>;

// Name of the reply field for a given agent, e.g. "Koala's reply".
std::string reply_field(std::string_view agent_name);

// Finds the first balanced JSON object in arbitrary model output and reads a
// decision block from it. Total over all byte strings.
DecisionParse parse_decision(std::string_view raw, std::string_view agent_name = "Koala");

// Inverse of parse_decision for well-formed decisions.
std::string serialize_decision(const AgentDecision& d, std::string_view agent_name = "Koala");

// Decision used when generation or parsing fails: stays silent.
AgentDecision synthetic_pass(std::string_view source);
std::string synthetic_pass_block(std::string_view source, std::string_view agent_name = "Koala");

// Chat emoji name for a reaction token.
std::string_view map_reaction(ReactionToken token);

}  // namespace chorus
