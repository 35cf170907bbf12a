#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "chorus/core/types.hpp"

namespace chorus {

struct Intent {
    Json patch = Json::object();
    double confidence = 0.0;
    std::string matched;  // phrase(s) that fired, comma separated
};

// Rule-based detector over a fixed phrase table. Returns nullopt for messages
// that carry no settings request. Meant for messages already classified as
// addressed to the agent.
std::optional<Intent> detect_settings_intent(const ChatEvent& message, std::string_view agent_name);

enum class ConfirmationReply { affirm, negate, unrelated };

// "yes", "ok, do it" -> affirm; "no", "cancel" -> negate; anything else unrelated.
ConfirmationReply classify_confirmation_reply(std::string_view text);

struct PendingConfirmation {
    Intent intent;
    std::string requester;
    Millis opened_at = 0;
    Millis expires_at = 0;
};

// Confirm-before-apply state for one room: at most one intent waits for a reply.
class ConversationalControl {
public:
    explicit ConversationalControl(std::string agent_name) : agent_name_(std::move(agent_name)) {}

    // Stores the intent and returns the agent's confirmation request (a
    // settings_change draft with stage "confirm_request"). Replaces any
    // earlier pending intent.
    ChatEvent open(const Intent& intent, const std::string& requester, Millis now, Millis window);

    // Acknowledgement used when the room auto-applies without asking.
    ChatEvent acknowledge(const Intent& intent, const std::string& requester) const;

    struct Resolution {
        ConfirmationReply reply;
        PendingConfirmation pending;
        std::string responder;
    };

    // Consumes a human message if it answers the pending request.
    std::optional<Resolution> on_human_message(const ChatEvent& message, Millis now);

    // Drops an intent whose window has passed; returns the expiry notice draft.
    std::optional<ChatEvent> expire(Millis now);

    // Notice recorded when a confirmation is declined.
    ChatEvent discard_notice(const Resolution& r) const;

    const std::optional<PendingConfirmation>& pending() const { return pending_; }
    std::optional<Millis> deadline() const;

private:
    std::string agent_name_;
    std::optional<PendingConfirmation> pending_;
};

}  // namespace chorus
