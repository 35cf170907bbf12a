#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "chorus/core/types.hpp"
#include "chorus/governance/authority.hpp"
#include "chorus/governance/settings.hpp"

namespace chorus::wire {

struct Hello {
    std::string room;
    std::string name;
};
struct Post {
    std::string name;
    std::string text;
    std::optional<Seq> thread_of;
};
struct React {
    std::string name;
    Seq thread_of = 0;
    std::string emoji;
};
struct Typing {
    std::string name;
    bool active = true;  // "state": "start" | "stop"
};
struct SettingsGet {
    std::string name;
};
struct SettingsSet {
    std::string name;
    Json patch;
};
struct PresetApply {
    std::string name;
    std::string preset;
};
struct Vote {
    std::string name;
    int proposal_id = 0;
    Ballot ballot = Ballot::yes;
};

using ClientFrame = std::variant<Hello, Post, React, Typing, SettingsGet, SettingsSet, PresetApply, Vote>;

// Error codes carried by error frames.
namespace code {
inline constexpr std::string_view bad_frame = "bad_frame";
inline constexpr std::string_view name_taken = "name_taken";
inline constexpr std::string_view name_mismatch = "name_mismatch";
inline constexpr std::string_view unknown_room = "unknown_room";
inline constexpr std::string_view not_joined = "not_joined";
inline constexpr std::string_view denied = "denied";
}  // namespace code

struct FrameError {
    std::string code;
    std::string message;
};

// Strict: unknown fields, wrong types and missing fields are bad_frame.
std::variant<ClientFrame, FrameError> parse_client_frame(std::string_view line);

const std::string& frame_name(const ClientFrame& frame);

std::string encode(const ClientFrame& frame);

// Server -> client frames. Event frames are the ChatEvent fields with a
// leading "type": "event".
std::string encode_event(const ChatEvent& event);
std::string encode_settings_state(const std::string& room, const AgentSettings& settings);
std::string encode_proposal_state(const std::string& room, const Proposal& proposal);
std::string encode_error(std::string_view code, std::string_view message);

// Inverse of encode_event, for clients.
ChatEvent event_from_frame(const Json& frame);

}  // namespace chorus::wire
