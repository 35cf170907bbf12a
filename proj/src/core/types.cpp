#include "chorus/core/types.hpp"

#include <array>
#include <utility>

namespace chorus {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 9> kKindNames{{
    {EventKind::message, "message"},
    {EventKind::reaction, "reaction"},
    {EventKind::typing_start, "typing_start"},
    {EventKind::typing_stop, "typing_stop"},
    {EventKind::join, "join"},
    {EventKind::leave, "leave"},
    {EventKind::settings_change, "settings_change"},
    {EventKind::proposal, "proposal"},
    {EventKind::vote, "vote"},
}};

constexpr std::array<std::string_view, 9> kEventFields{
    "seq", "ts_ms", "room", "author", "kind", "text", "thread_of", "emoji", "payload"};

std::int64_t require_int(const Json& j, const char* field) {
    const auto it = j.find(field);
    if (it == j.end()) throw InvalidEvent(std::string("missing field: ") + field);
    if (!it->is_number_integer()) throw InvalidEvent(std::string("field must be an integer: ") + field);
    return it->get<std::int64_t>();
}

std::string require_string(const Json& j, const char* field) {
    const auto it = j.find(field);
    if (it == j.end()) throw InvalidEvent(std::string("missing field: ") + field);
    if (!it->is_string()) throw InvalidEvent(std::string("field must be a string: ") + field);
    return it->get<std::string>();
}

}  // namespace

std::string_view to_string(EventKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "message";
}

std::optional<EventKind> event_kind_from_string(std::string_view s) {
    for (const auto& [k, name] : kKindNames) {
        if (name == s) return k;
    }
    return std::nullopt;
}

bool is_valid_name(std::string_view name) {
    return !name.empty() && name.find('\n') == std::string_view::npos &&
           name.find('\r') == std::string_view::npos;
}

void validate_event_shape(const ChatEvent& event) {
    if (!is_valid_name(event.author)) throw InvalidEvent("author must be a non-empty single-line name");
    if (event.seq < 0) throw InvalidEvent("seq must be non-negative");
    switch (event.kind) {
        case EventKind::message:
            if (!event.text || event.text->empty()) throw InvalidEvent("message requires non-empty text");
            break;
        case EventKind::reaction:
            if (!event.emoji || event.emoji->empty()) throw InvalidEvent("reaction requires emoji");
            if (!event.thread_of) throw InvalidEvent("reaction requires thread_of");
            break;
        default:
            break;
    }
    if (event.thread_of && *event.thread_of <= 0) throw InvalidEvent("thread_of must be a positive seq");
}

Json to_json(const ChatEvent& event) {
    Json j;
    j["seq"] = event.seq;
    j["ts_ms"] = event.ts_ms;
    j["room"] = event.room;
    j["author"] = event.author;
    j["kind"] = std::string(to_string(event.kind));
    if (event.text) j["text"] = *event.text;
    if (event.thread_of) j["thread_of"] = *event.thread_of;
    if (event.emoji) j["emoji"] = *event.emoji;
    if (event.payload) j["payload"] = *event.payload;
    return j;
}

ChatEvent event_from_json(const Json& j) {
    if (!j.is_object()) throw InvalidEvent("event must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        bool known = false;
        for (auto f : kEventFields) known = known || f == key;
        if (!known) throw InvalidEvent("unknown field: " + key);
    }
    ChatEvent e;
    e.seq = require_int(j, "seq");
    e.ts_ms = require_int(j, "ts_ms");
    e.room = require_string(j, "room");
    e.author = require_string(j, "author");
    const auto kind_name = require_string(j, "kind");
    const auto kind = event_kind_from_string(kind_name);
    if (!kind) throw InvalidEvent("unknown kind: " + kind_name);
    e.kind = *kind;
    if (j.contains("text")) e.text = require_string(j, "text");
    if (j.contains("thread_of")) e.thread_of = require_int(j, "thread_of");
    if (j.contains("emoji")) e.emoji = require_string(j, "emoji");
    if (j.contains("payload")) e.payload = j.at("payload");
    validate_event_shape(e);
    return e;
}

std::string to_jsonl(const ChatEvent& event) {
    return to_json(event).dump(-1, ' ', false, Json::error_handler_t::replace);
}

ChatEvent event_from_jsonl(std::string_view line) {
    auto j = Json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_discarded()) throw InvalidEvent("line is not valid JSON");
    return event_from_json(j);
}

}  // namespace chorus
