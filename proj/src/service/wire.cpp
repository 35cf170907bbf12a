#include "chorus/service/wire.hpp"

#include <set>

namespace chorus::wire {

namespace {

std::string dump(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::replace); }

struct Bad {
    std::string message;
};

class Fields {
public:
    Fields(const Json& j, std::set<std::string> allowed) : j_(j) {
        for (const auto& [key, _] : j.items()) {
            if (!allowed.count(key)) throw Bad{"unknown field " + key};
        }
    }

    std::string str(const char* key) const {
        const auto it = j_.find(key);
        if (it == j_.end()) throw Bad{std::string("missing field ") + key};
        if (!it->is_string()) throw Bad{std::string(key) + " must be a string"};
        return it->get<std::string>();
    }

    Seq seq(const char* key) const {
        const auto it = j_.find(key);
        if (it == j_.end()) throw Bad{std::string("missing field ") + key};
        if (!it->is_number_integer() || it->get<Seq>() <= 0) throw Bad{std::string(key) + " must be a positive integer"};
        return it->get<Seq>();
    }

    bool has(const char* key) const { return j_.contains(key) && !j_[key].is_null(); }

    const Json& raw(const char* key) const {
        const auto it = j_.find(key);
        if (it == j_.end()) throw Bad{std::string("missing field ") + key};
        return *it;
    }

private:
    const Json& j_;
};

std::string non_empty(std::string s, const char* what) {
    if (s.empty()) throw Bad{std::string(what) + " must not be empty"};
    return s;
}

ClientFrame parse_object(const Json& j) {
    const auto type_it = j.find("type");
    if (type_it == j.end() || !type_it->is_string()) throw Bad{"missing field type"};
    const auto type = type_it->get<std::string>();

    if (type == "hello") {
        Fields f(j, {"type", "room", "name"});
        return Hello{non_empty(f.str("room"), "room"), non_empty(f.str("name"), "name")};
    }
    if (type == "post") {
        Fields f(j, {"type", "name", "text", "thread_of"});
        Post p{f.str("name"), non_empty(f.str("text"), "text"), std::nullopt};
        if (f.has("thread_of")) p.thread_of = f.seq("thread_of");
        return p;
    }
    if (type == "react") {
        Fields f(j, {"type", "name", "thread_of", "emoji"});
        return React{f.str("name"), f.seq("thread_of"), non_empty(f.str("emoji"), "emoji")};
    }
    if (type == "typing") {
        Fields f(j, {"type", "name", "state"});
        const auto state = f.str("state");
        if (state != "start" && state != "stop") throw Bad{"state must be start or stop"};
        return Typing{f.str("name"), state == "start"};
    }
    if (type == "settings_get") {
        Fields f(j, {"type", "name"});
        return SettingsGet{f.str("name")};
    }
    if (type == "settings_set") {
        Fields f(j, {"type", "name", "patch"});
        const auto& patch = f.raw("patch");
        if (!patch.is_object()) throw Bad{"patch must be an object"};
        return SettingsSet{f.str("name"), patch};
    }
    if (type == "preset_apply") {
        Fields f(j, {"type", "name", "preset"});
        return PresetApply{f.str("name"), non_empty(f.str("preset"), "preset")};
    }
    if (type == "vote") {
        Fields f(j, {"type", "name", "proposal_id", "ballot"});
        const auto ballot = ballot_from_string(f.str("ballot"));
        if (!ballot) throw Bad{"ballot must be yes or no"};
        return Vote{f.str("name"), static_cast<int>(f.seq("proposal_id")), *ballot};
    }
    throw Bad{"unknown frame type " + type};
}

}  // namespace

std::variant<ClientFrame, FrameError> parse_client_frame(std::string_view line) {
    const auto j = Json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_discarded()) return FrameError{std::string(code::bad_frame), "frame is not valid JSON"};
    if (!j.is_object()) return FrameError{std::string(code::bad_frame), "frame must be a JSON object"};
    try {
        return parse_object(j);
    } catch (const Bad& b) {
        return FrameError{std::string(code::bad_frame), b.message};
    } catch (const Json::exception& e) {
        return FrameError{std::string(code::bad_frame), e.what()};
    }
}

const std::string& frame_name(const ClientFrame& frame) {
    return std::visit([](const auto& f) -> const std::string& { return f.name; }, frame);
}

std::string encode(const ClientFrame& frame) {
    return std::visit(
        [](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            Json j;
            if constexpr (std::is_same_v<T, Hello>) {
                j = Json{{"type", "hello"}, {"room", f.room}, {"name", f.name}};
            } else if constexpr (std::is_same_v<T, Post>) {
                j = Json{{"type", "post"}, {"name", f.name}, {"text", f.text}};
                if (f.thread_of) j["thread_of"] = *f.thread_of;
            } else if constexpr (std::is_same_v<T, React>) {
                j = Json{{"type", "react"}, {"name", f.name}, {"thread_of", f.thread_of}, {"emoji", f.emoji}};
            } else if constexpr (std::is_same_v<T, Typing>) {
                j = Json{{"type", "typing"}, {"name", f.name}, {"state", f.active ? "start" : "stop"}};
            } else if constexpr (std::is_same_v<T, SettingsGet>) {
                j = Json{{"type", "settings_get"}, {"name", f.name}};
            } else if constexpr (std::is_same_v<T, SettingsSet>) {
                j = Json{{"type", "settings_set"}, {"name", f.name}, {"patch", f.patch}};
            } else if constexpr (std::is_same_v<T, PresetApply>) {
                j = Json{{"type", "preset_apply"}, {"name", f.name}, {"preset", f.preset}};
            } else {
                j = Json{{"type", "vote"},
                         {"name", f.name},
                         {"proposal_id", f.proposal_id},
                         {"ballot", std::string(to_string(f.ballot))}};
            }
            return dump(j);
        },
        frame);
}

std::string encode_event(const ChatEvent& event) {
    Json j{{"type", "event"}};
    const Json fields = to_json(event);
    for (const auto& [key, value] : fields.items()) j[key] = value;
    return dump(j);
}

ChatEvent event_from_frame(const Json& frame) {
    Json copy = frame;
    copy.erase("type");
    return event_from_json(copy);
}

std::string encode_settings_state(const std::string& room, const AgentSettings& settings) {
    return dump(Json{{"type", "settings_state"}, {"room", room}, {"settings", to_json(settings)}});
}

std::string encode_proposal_state(const std::string& room, const Proposal& proposal) {
    Json tally{{"yes", proposal.yes()}, {"no", proposal.no()}, {"eligible", proposal.eligible.size()}};
    return dump(Json{{"type", "proposal_state"}, {"room", room}, {"proposal", to_json(proposal)}, {"tally", tally}});
}

std::string encode_error(std::string_view code, std::string_view message) {
    return dump(Json{{"type", "error"}, {"code", std::string(code)}, {"message", std::string(message)}});
}

}  // namespace chorus::wire
