#include "chorus/gating/pipeline.hpp"

#include <algorithm>
#include <cctype>

#include "chorus/core/text.hpp"

namespace chorus {

std::string_view to_string(AddresseeClass::Kind kind) {
    switch (kind) {
        case AddresseeClass::Kind::agent_addressed: return "agent_addressed";
        case AddresseeClass::Kind::other_addressed: return "other_addressed";
        case AddresseeClass::Kind::unaddressed: return "unaddressed";
    }
    return "unaddressed";
}

std::string_view to_string(OverrideKind kind) {
    switch (kind) {
        case OverrideKind::none: return "none";
        case OverrideKind::forced_reply: return "forced_reply";
        case OverrideKind::forced_reply_conflict: return "forced_reply_conflict";
        case OverrideKind::suppressed_other: return "suppressed_other";
    }
    return "none";
}

std::string_view to_string(Placement::Mode mode) {
    switch (mode) {
        case Placement::Mode::channel: return "channel";
        case Placement::Mode::thread: return "thread";
        case Placement::Mode::truncated: return "truncated";
    }
    return "channel";
}

std::string_view to_string(AgentAction::Kind kind) {
    switch (kind) {
        case AgentAction::Kind::post: return "post";
        case AgentAction::Kind::react: return "react";
        case AgentAction::Kind::silent: return "silent";
    }
    return "silent";
}

std::optional<std::size_t> find_mention(std::string_view text, std::string_view name) {
    return find_whole_word(text, name);
}

AddresseeClass classify_addressee(const ChatEvent& message, std::span<const Participant> roster,
                                  std::string_view agent_name) {
    const std::string_view text = message.text ? std::string_view(*message.text) : std::string_view{};

    std::optional<std::size_t> other_pos;
    std::string other_name;
    for (const auto& p : roster) {
        if (p.name == agent_name || p.name == message.author) continue;
        const auto pos = find_mention(text, p.name);
        if (!pos) continue;
        // Earliest mention wins; at the same spot the longer name is the real one.
        if (!other_pos || *pos < *other_pos || (*pos == *other_pos && p.name.size() > other_name.size())) {
            other_pos = pos;
            other_name = p.name;
        }
    }

    if (find_mention(text, agent_name)) return AddresseeClass::agent(other_pos.has_value());
    if (other_pos) return AddresseeClass::other(other_name);
    return AddresseeClass::none();
}

bool should_invoke(const AddresseeClass& addressee, const AgentSettings& settings, ParticipantKind author_kind) {
    if (author_kind == ParticipantKind::agent) return false;
    if (settings.mode == Mode::reactive) return addressee.kind == AddresseeClass::Kind::agent_addressed;
    return addressee.kind != AddresseeClass::Kind::other_addressed;
}

bool apply_threshold(int value, ThresholdLevel level) { return value >= threshold_value(level); }

AgentAction decide(const ChatEvent& message, const AgentSettings& settings, const AgentDecision& decision,
                   const AddresseeClass& addressee) {
    AgentAction action;
    action.provenance.trigger_seqs = {message.seq};
    action.provenance.decision = decision;

    bool contribute = false;
    switch (addressee.kind) {
        case AddresseeClass::Kind::agent_addressed:
            action.provenance.override_kind =
                addressee.conflict ? OverrideKind::forced_reply_conflict : OverrideKind::forced_reply;
            contribute = true;
            break;
        case AddresseeClass::Kind::other_addressed:
            action.provenance.override_kind = OverrideKind::suppressed_other;
            break;
        case AddresseeClass::Kind::unaddressed:
            contribute = decision.verdict == Verdict::SUBMIT && apply_threshold(decision.value, settings.threshold);
            break;
    }
    if (!contribute) return action;

    if (decision.reaction) {
        action.kind = AgentAction::Kind::react;
        action.reaction = decision.reaction;
        return action;
    }
    if (decision.reply.empty()) {
        if (!action.forced()) return action;
        action.reply = std::string(kFallbackReply);
        action.provenance.fallback = true;
    } else {
        action.reply = decision.reply;
    }
    action.kind = AgentAction::Kind::post;
    action.placement = place(action.reply, settings, message.seq);
    return action;
}

ScheduleResult schedule(const AgentAction& action, const RatePolicy& rate, const RoomState& room, bool delay_served) {
    const bool forced = action.forced();
    if (!forced && !rate.speak_first && room.prior_human_messages == 0) return Suppressed{"speak-first"};
    if (rate.hold_while_typing && !room.typing.empty()) return Deferred{"typing_stop"};
    const Millis at = delay_served ? room.now : room.now + rate.initial_delay_ms;
    if (!forced && action.kind == AgentAction::Kind::post && rate.max_posts_per_minute > 0) {
        const auto recent = std::count_if(room.agent_post_times.begin(), room.agent_post_times.end(),
                                          [&](Millis t) { return t > at - 60'000 && t <= at; });
        if (recent >= rate.max_posts_per_minute) return Suppressed{"rate-cap"};
    }
    return Scheduled{at};
}

std::string make_preview(std::string_view reply, int preview_chars) {
    const auto budget = static_cast<std::size_t>(std::max(preview_chars - 1, 0));
    if (budget == 0) return std::string(kEllipsis);
    auto cut = utf8_offset(reply, budget);
    const bool mid_word = cut < reply.size() && !std::isspace(static_cast<unsigned char>(reply[cut]));
    if (mid_word) {
        const auto ws = reply.substr(0, cut).find_last_of(" \t\r\n");
        if (ws != std::string_view::npos && ws > 0) cut = ws;
    }
    auto head = reply.substr(0, cut);
    while (!head.empty() && std::isspace(static_cast<unsigned char>(head.back()))) head.remove_suffix(1);
    return std::string(head) + std::string(kEllipsis);
}

Placement place(std::string_view reply, const AgentSettings& settings, Seq trigger_seq) {
    if (settings.placement == PlacementMode::thread) return Placement{Placement::Mode::thread, trigger_seq, {}};
    const auto& lm = settings.long_message;
    if (lm.enabled && utf8_length(reply) > static_cast<std::size_t>(lm.trigger_chars)) {
        return Placement{Placement::Mode::truncated, trigger_seq, make_preview(reply, lm.preview_chars)};
    }
    return Placement{Placement::Mode::channel, 0, {}};
}

std::vector<AgentAction> consolidate(std::vector<AgentAction> pending, Millis window_ms) {
    if (window_ms <= 0 || pending.size() < 2) return pending;

    std::vector<AgentAction> out;
    std::vector<AgentAction> group;
    const auto flush = [&] {
        if (group.empty()) return;
        if (group.size() == 1) {
            out.push_back(std::move(group.front()));
            group.clear();
            return;
        }
        AgentAction merged = group.front();
        merged.reply.clear();
        merged.provenance.trigger_seqs.clear();
        for (const auto& a : group) {
            merged.reply += (merged.reply.empty() ? "- " : "\n- ") + a.reply;
            merged.provenance.trigger_seqs.insert(merged.provenance.trigger_seqs.end(), a.provenance.trigger_seqs.begin(),
                                                  a.provenance.trigger_seqs.end());
            merged.at = std::max(merged.at, a.at);
            if (a.forced()) merged.provenance.override_kind = a.provenance.override_kind;
            merged.provenance.fallback = merged.provenance.fallback || a.provenance.fallback;
        }
        merged.provenance.decision = group.back().provenance.decision;
        // The merged text needs fresh placement; callers re-place it.
        merged.placement = Placement{};
        out.push_back(std::move(merged));
        group.clear();
    };

    for (auto& action : pending) {
        if (action.kind != AgentAction::Kind::post) {
            out.push_back(std::move(action));
            continue;
        }
        if (!group.empty() && action.at - group.front().at > window_ms) flush();
        group.push_back(std::move(action));
    }
    flush();
    return out;
}

}  // namespace chorus
