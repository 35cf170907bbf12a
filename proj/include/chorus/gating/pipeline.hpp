#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "chorus/core/decision.hpp"
#include "chorus/core/types.hpp"
#include "chorus/governance/settings.hpp"

namespace chorus {

struct AddresseeClass {
    enum class Kind { agent_addressed, other_addressed, unaddressed };
    Kind kind = Kind::unaddressed;
    std::string name;       // the other participant for other_addressed
    bool conflict = false;  // agent and another participant were both named

    static AddresseeClass agent(bool conflict = false) { return {Kind::agent_addressed, {}, conflict}; }
    static AddresseeClass other(std::string n) { return {Kind::other_addressed, std::move(n), false}; }
    static AddresseeClass none() { return {}; }

    bool operator==(const AddresseeClass&) const = default;
};

std::string_view to_string(AddresseeClass::Kind kind);

// Position of the first whole-word, case-insensitive mention of `name`
// (an optional leading '@' is allowed by the word boundary rule).
std::optional<std::size_t> find_mention(std::string_view text, std::string_view name);

AddresseeClass classify_addressee(const ChatEvent& message, std::span<const Participant> roster,
                                  std::string_view agent_name);

bool should_invoke(const AddresseeClass& addressee, const AgentSettings& settings, ParticipantKind author_kind);

// value >= numeric threshold of the level.
bool apply_threshold(int value, ThresholdLevel level);

enum class OverrideKind { none, forced_reply, forced_reply_conflict, suppressed_other };

std::string_view to_string(OverrideKind kind);

struct Placement {
    enum class Mode { channel, thread, truncated };
    Mode mode = Mode::channel;
    Seq parent = 0;       // thread parent, or where the full text of a truncated post goes
    std::string preview;  // truncated only

    bool operator==(const Placement&) const = default;
};

std::string_view to_string(Placement::Mode mode);

struct Provenance {
    std::vector<Seq> trigger_seqs;
    AgentDecision decision;
    OverrideKind override_kind = OverrideKind::none;
    bool fallback = false;  // forced reply had no usable content from the provider
};

struct AgentAction {
    enum class Kind { post, react, silent };
    Kind kind = Kind::silent;
    std::string reply;
    std::optional<ReactionToken> reaction;
    Placement placement;
    Provenance provenance;
    Millis at = 0;  // scheduled emission time once scheduled

    bool forced() const {
        return provenance.override_kind == OverrideKind::forced_reply ||
               provenance.override_kind == OverrideKind::forced_reply_conflict;
    }
};

std::string_view to_string(AgentAction::Kind kind);

// Reply used when a directly addressed message gets no usable provider content.
inline constexpr std::string_view kFallbackReply = "I'm here, but I don't have a good answer to that yet.";

AgentAction decide(const ChatEvent& message, const AgentSettings& settings, const AgentDecision& decision,
                   const AddresseeClass& addressee);

struct Scheduled {
    Millis at = 0;
};
struct Suppressed {
    std::string reason;  // "speak-first" | "rate-cap"
};
struct Deferred {
    std::string until;  // "typing_stop"
};
using ScheduleResult = std::variant<Scheduled, Suppressed, Deferred>;

struct RoomState {
    std::set<std::string> typing;          // humans currently typing
    std::vector<Millis> agent_post_times;  // emission times of earlier agent posts
    int prior_human_messages = 0;          // human messages before the trigger
    Millis now = 0;
};

// Applies, in order: speak-first, typing hold, initial delay, per-minute cap.
// `delay_served` is set when re-checking an action whose delay already ran.
// Directly addressed replies are exempt from speak-first and the cap.
ScheduleResult schedule(const AgentAction& action, const RatePolicy& rate, const RoomState& room,
                        bool delay_served = false);

// Cuts `reply` to at most `preview_chars` code points (ellipsis included),
// preferring the last whitespace before the limit.
std::string make_preview(std::string_view reply, int preview_chars);

inline constexpr std::string_view kEllipsis = "\xE2\x80\xA6";

Placement place(std::string_view reply, const AgentSettings& settings, Seq trigger_seq);

// Posts whose times fall within `window_ms` of a group's first post merge into
// one bulleted post at the latest member's time. Reactions pass through.
std::vector<AgentAction> consolidate(std::vector<AgentAction> pending, Millis window_ms);

}  // namespace chorus
