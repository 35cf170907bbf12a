#include "chorus/governance/intent.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <vector>

#include "chorus/core/text.hpp"

namespace chorus {

namespace {

struct PhraseRule {
    std::string_view phrase;
    const char* patch;  // JSON text
    double confidence;
};

// Phrases are lower-case and matched as whole words.
constexpr std::array<PhraseRule, 44> kRules{{
    {"replying too frequently", R"({"threshold":"high"})", 0.9},
    {"too frequently", R"({"threshold":"high"})", 0.8},
    {"too often", R"({"threshold":"high"})", 0.8},
    {"less often", R"({"threshold":"high"})", 0.8},
    {"talking too much", R"({"threshold":"high"})", 0.8},
    {"tone it down", R"({"threshold":"high"})", 0.7},
    {"calm down", R"({"threshold":"high"})", 0.6},
    {"quiet", R"({"threshold":"high"})", 0.6},
    {"quieter", R"({"threshold":"high"})", 0.7},
    {"pause", R"({"threshold":"high"})", 0.5},
    {"leave the rest to us", R"({"mode":"reactive"})", 0.9},
    {"only when asked", R"({"mode":"reactive"})", 0.9},
    {"only when we ask", R"({"mode":"reactive"})", 0.9},
    {"only if asked", R"({"mode":"reactive"})", 0.9},
    {"only respond when", R"({"mode":"reactive"})", 0.8},
    {"stop jumping in", R"({"mode":"reactive"})", 0.8},
    {"ping you", R"({"mode":"reactive"})", 0.6},
    {"we'll ping", R"({"mode":"reactive"})", 0.7},
    {"jump in", R"({"mode":"proactive"})", 0.7},
    {"chime in", R"({"mode":"proactive"})", 0.7},
    {"more proactive", R"({"mode":"proactive"})", 0.9},
    {"take initiative", R"({"mode":"proactive"})", 0.8},
    {"more ideas", R"({"threshold":"low"})", 0.7},
    {"more often", R"({"threshold":"low"})", 0.8},
    {"speak up", R"({"threshold":"low"})", 0.7},
    {"contribute more", R"({"threshold":"low"})", 0.8},
    {"shorter", R"({"style":{"max_reply_chars":200}})", 0.7},
    {"too long", R"({"style":{"max_reply_chars":200}})", 0.7},
    {"more concise", R"({"style":{"max_reply_chars":200}})", 0.8},
    {"keep it short", R"({"style":{"max_reply_chars":200}})", 0.8},
    {"in a thread", R"({"placement":"thread"})", 0.8},
    {"in threads", R"({"placement":"thread"})", 0.8},
    {"use threads", R"({"placement":"thread"})", 0.8},
    {"in the channel", R"({"placement":"channel"})", 0.6},
    {"bullet points", R"({"style":{"bulleted_lists":true}})", 0.7},
    {"bulleted", R"({"style":{"bulleted_lists":true}})", 0.7},
    {"more formal", R"({"style":{"tone":"formal"}})", 0.8},
    {"friendlier", R"({"style":{"tone":"friendly"}})", 0.8},
    {"more casual", R"({"style":{"tone":"friendly"}})", 0.7},
    {"let us start", R"({"rate":{"speak_first":false}})", 0.7},
    {"let us go first", R"({"rate":{"speak_first":false}})", 0.8},
    {"don't speak first", R"({"rate":{"speak_first":false}})", 0.8},
    {"while we're typing", R"({"rate":{"hold_while_typing":true}})", 0.8},
    {"while we are typing", R"({"rate":{"hold_while_typing":true}})", 0.8},
}};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    // Curly apostrophes typed by chat clients.
    std::string normalized;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out.compare(i, 3, "\xE2\x80\x99") == 0) {
            normalized += '\'';
            i += 2;
        } else {
            normalized += out[i];
        }
    }
    return normalized;
}

std::vector<std::string> tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : lower(text)) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '\'' || u >= 0x80) {
            cur += c;
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string describe_patch(const Json& patch, const std::string& prefix = "") {
    std::string out;
    for (const auto& [key, value] : patch.items()) {
        const auto path = prefix.empty() ? key : prefix + "." + key;
        std::string part = value.is_object() ? describe_patch(value, path)
                                             : path + " = " + (value.is_string() ? value.get<std::string>() : value.dump());
        out += (out.empty() ? "" : ", ") + part;
    }
    return out;
}

}  // namespace

std::optional<Intent> detect_settings_intent(const ChatEvent& message, std::string_view agent_name) {
    if (message.kind != EventKind::message || !message.text) return std::nullopt;
    (void)agent_name;
    const auto text = lower(*message.text);

    struct Hit {
        std::size_t pos;
        const PhraseRule* rule;
    };
    std::vector<Hit> hits;
    for (const auto& rule : kRules) {
        if (const auto pos = find_whole_word(text, rule.phrase)) hits.push_back({*pos, &rule});
    }
    if (hits.empty()) return std::nullopt;

    // Drop phrases contained in a longer hit at the same spot ("too frequently" inside "replying too frequently").
    std::vector<Hit> kept;
    for (const auto& h : hits) {
        const bool shadowed = std::any_of(hits.begin(), hits.end(), [&](const Hit& o) {
            return o.rule != h.rule && o.pos <= h.pos && o.pos + o.rule->phrase.size() >= h.pos + h.rule->phrase.size() &&
                   o.rule->phrase.size() > h.rule->phrase.size();
        });
        if (!shadowed) kept.push_back(h);
    }
    std::stable_sort(kept.begin(), kept.end(), [](const Hit& a, const Hit& b) { return a.pos < b.pos; });

    Intent intent;
    // Earliest phrase wins on conflicting fields, so merge latest first.
    for (auto it = kept.rbegin(); it != kept.rend(); ++it) intent.patch.merge_patch(Json::parse(it->rule->patch));
    for (const auto& h : kept) {
        intent.confidence = std::max(intent.confidence, h.rule->confidence);
        intent.matched += (intent.matched.empty() ? "" : ", ") + std::string(h.rule->phrase);
    }
    return intent;
}

ConfirmationReply classify_confirmation_reply(std::string_view text) {
    static const std::array<std::string_view, 11> kYes{"yes", "y", "yep", "yeah", "sure", "ok", "okay",
                                                       "confirm", "confirmed", "approve", "apply"};
    static const std::array<std::string_view, 8> kNo{"no", "n", "nope", "nah", "cancel", "don't", "dont", "decline"};
    const auto words = tokens(text);
    if (words.empty() || words.size() > 3) return ConfirmationReply::unrelated;
    const auto& first = words.front();
    if (std::find(kYes.begin(), kYes.end(), first) != kYes.end()) return ConfirmationReply::affirm;
    if (std::find(kNo.begin(), kNo.end(), first) != kNo.end()) return ConfirmationReply::negate;
    if (words.size() >= 2 && first == "do" && words[1] == "it") return ConfirmationReply::affirm;
    return ConfirmationReply::unrelated;
}

ChatEvent ConversationalControl::open(const Intent& intent, const std::string& requester, Millis now, Millis window) {
    pending_ = PendingConfirmation{intent, requester, now, now + window};
    ChatEvent e;
    e.author = agent_name_;
    e.kind = EventKind::settings_change;
    e.text = "Here's how I can adjust my settings: " + describe_patch(intent.patch) +
             ". Reply \"yes\" to apply it or \"no\" to keep things as they are.";
    e.payload = Json{{"stage", "confirm_request"},
                     {"requester", requester},
                     {"patch", intent.patch},
                     {"confidence", intent.confidence},
                     {"expires_at", now + window}};
    return e;
}

ChatEvent ConversationalControl::acknowledge(const Intent& intent, const std::string& requester) const {
    ChatEvent e;
    e.author = agent_name_;
    e.kind = EventKind::settings_change;
    e.text = "Adjusting my settings: " + describe_patch(intent.patch) + ".";
    e.payload = Json{{"stage", "acknowledged"}, {"requester", requester}, {"patch", intent.patch},
                     {"confidence", intent.confidence}};
    return e;
}

std::optional<ConversationalControl::Resolution> ConversationalControl::on_human_message(const ChatEvent& message,
                                                                                       Millis now) {
    if (!pending_ || message.kind != EventKind::message || !message.text) return std::nullopt;
    if (now > pending_->expires_at) return std::nullopt;
    std::string text = *message.text;
    // "Koala, yes" answers the same as "yes".
    if (const auto pos = find_whole_word(lower(text), lower(agent_name_))) text.erase(*pos, agent_name_.size());
    const auto reply = classify_confirmation_reply(text);
    if (reply == ConfirmationReply::unrelated) return std::nullopt;
    Resolution r{reply, *pending_, message.author};
    pending_.reset();
    return r;
}

std::optional<ChatEvent> ConversationalControl::expire(Millis now) {
    if (!pending_ || now <= pending_->expires_at) return std::nullopt;
    ChatEvent e;
    e.author = agent_name_;
    e.kind = EventKind::settings_change;
    e.text = "No confirmation received; leaving my settings unchanged.";
    e.payload = Json{{"stage", "expired"}, {"requester", pending_->requester}, {"patch", pending_->intent.patch}};
    pending_.reset();
    return e;
}

ChatEvent ConversationalControl::discard_notice(const Resolution& r) const {
    ChatEvent e;
    e.author = agent_name_;
    e.kind = EventKind::settings_change;
    e.text = "Okay, leaving my settings unchanged.";
    e.payload = Json{{"stage", "discarded"}, {"requester", r.pending.requester}, {"responder", r.responder},
                     {"patch", r.pending.intent.patch}};
    return e;
}

std::optional<Millis> ConversationalControl::deadline() const {
    if (!pending_) return std::nullopt;
    return pending_->expires_at + 1;
}

}  // namespace chorus
