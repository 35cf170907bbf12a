#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace chorus {

// Insertion-ordered JSON keeps files and frames in declared field order,
// which makes serialize/reload byte-identical.
using Json = nlohmann::ordered_json;

using Seq = std::int64_t;
using Millis = std::int64_t;

enum class ParticipantKind { human, agent };

struct Participant {
    std::string name;
    ParticipantKind kind = ParticipantKind::human;
    bool is_admin = false;
};

enum class EventKind {
    message,
    reaction,
    typing_start,
    typing_stop,
    join,
    leave,
    settings_change,
    proposal,
    vote,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view s);

// One transcript record. `seq` is zero until the store assigns it.
struct ChatEvent {
    Seq seq = 0;
    Millis ts_ms = 0;
    std::string room;
    std::string author;
    EventKind kind = EventKind::message;
    std::optional<std::string> text;
    std::optional<Seq> thread_of;
    std::optional<std::string> emoji;
    std::optional<Json> payload;

    bool operator==(const ChatEvent&) const = default;
};

// Thrown when an event or transcript line breaks a type invariant.
class InvalidEvent : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class UnknownRoom : public std::out_of_range {
public:
    explicit UnknownRoom(const std::string& room) : std::out_of_range("unknown room: " + room) {}
};

// Checks the per-event invariants that need no transcript context.
// Referential checks (thread_of) are the transcript's job.
void validate_event_shape(const ChatEvent& event);

bool is_valid_name(std::string_view name);

Json to_json(const ChatEvent& event);
// Strict: unknown fields and wrong types raise InvalidEvent.
ChatEvent event_from_json(const Json& j);

std::string to_jsonl(const ChatEvent& event);
ChatEvent event_from_jsonl(std::string_view line);

}  // namespace chorus
