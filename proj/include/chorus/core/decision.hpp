#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace chorus {

enum class ReactionToken {
    SMILE,
    LAUGH,
    LIKE,
    CHECK,
    HEART,
    THUMBS_UP,
    THUMBS_DOWN,
    QUESTION,
    EXCLAMATION,
    COOL,
};

std::span<const ReactionToken> all_reaction_tokens();

// Canonical token name without brackets, e.g. "THUMBS_UP".
std::string_view token_name(ReactionToken token);

// Accepts the canonical name or the spaced form ("THUMBS UP"). Case-sensitive.
std::optional<ReactionToken> token_from_name(std::string_view name);

enum class Verdict { SUBMIT, PASS };

std::string_view to_string(Verdict verdict);

struct AgentDecision {
    std::string source;
    std::string target;
    std::string reply;
    int value = 0;
    Verdict verdict = Verdict::PASS;
    std::optional<ReactionToken> reaction;

    bool operator==(const AgentDecision&) const = default;
};

// value in [0,100] and a SUBMIT carries either text or a reaction.
bool is_well_formed(const AgentDecision& d);

}  // namespace chorus
