#include "chorus/core/decision.hpp"

#include <array>
#include <utility>

namespace chorus {

namespace {

constexpr std::array<ReactionToken, 10> kTokens{
    ReactionToken::SMILE,      ReactionToken::LAUGH,       ReactionToken::LIKE,     ReactionToken::CHECK,
    ReactionToken::HEART,      ReactionToken::THUMBS_UP,   ReactionToken::THUMBS_DOWN,
    ReactionToken::QUESTION,   ReactionToken::EXCLAMATION, ReactionToken::COOL,
};

constexpr std::array<std::pair<ReactionToken, std::string_view>, 10> kNames{{
    {ReactionToken::SMILE, "SMILE"},
    {ReactionToken::LAUGH, "LAUGH"},
    {ReactionToken::LIKE, "LIKE"},
    {ReactionToken::CHECK, "CHECK"},
    {ReactionToken::HEART, "HEART"},
    {ReactionToken::THUMBS_UP, "THUMBS_UP"},
    {ReactionToken::THUMBS_DOWN, "THUMBS_DOWN"},
    {ReactionToken::QUESTION, "QUESTION"},
    {ReactionToken::EXCLAMATION, "EXCLAMATION"},
    {ReactionToken::COOL, "COOL"},
}};

}  // namespace

std::span<const ReactionToken> all_reaction_tokens() { return kTokens; }

std::string_view token_name(ReactionToken token) {
    for (const auto& [t, name] : kNames) {
        if (t == token) return name;
    }
    return "SMILE";
}

std::optional<ReactionToken> token_from_name(std::string_view name) {
    std::string normalized(name);
    for (auto& c : normalized) {
        if (c == ' ') c = '_';
    }
    for (const auto& [t, n] : kNames) {
        if (n == normalized) return t;
    }
    return std::nullopt;
}

std::string_view to_string(Verdict verdict) { return verdict == Verdict::SUBMIT ? "SUBMIT" : "PASS"; }

bool is_well_formed(const AgentDecision& d) {
    if (d.value < 0 || d.value > 100) return false;
    if (d.verdict == Verdict::SUBMIT && d.reply.empty() && !d.reaction) return false;
    return true;
}

}  // namespace chorus
