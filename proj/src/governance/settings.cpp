#include "chorus/governance/settings.hpp"

#include <array>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace chorus {

namespace {

template <class E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

constexpr NameTable<Mode, 2> kModes{{{Mode::proactive, "proactive"}, {Mode::reactive, "reactive"}}};
constexpr NameTable<ThresholdLevel, 3> kLevels{
    {{ThresholdLevel::high, "high"}, {ThresholdLevel::medium, "medium"}, {ThresholdLevel::low, "low"}}};
constexpr NameTable<PlacementMode, 2> kPlacements{
    {{PlacementMode::channel, "channel"}, {PlacementMode::thread, "thread"}}};
constexpr NameTable<Tone, 3> kTones{{{Tone::neutral, "neutral"}, {Tone::friendly, "friendly"}, {Tone::formal, "formal"}}};
constexpr NameTable<GovernancePolicy, 3> kPolicies{
    {{GovernancePolicy::open, "open"}, {GovernancePolicy::admin, "admin"}, {GovernancePolicy::vote, "vote"}}};

template <class E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E value) {
    for (const auto& [v, n] : table) {
        if (v == value) return n;
    }
    return table[0].second;
}

// Walks one JSON object, reporting errors with the dotted path.
class Reader {
public:
    Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_.empty() ? "settings" : path_, "expected object");
    }

    void allow(std::initializer_list<std::string_view> keys) const {
        for (const auto& [key, _] : j_.items()) {
            bool known = false;
            for (auto k : keys) known = known || k == key;
            if (!known) fail(at(key), "unknown field");
        }
    }

    const Json* get(std::string_view key) const {
        const auto it = j_.find(std::string(key));
        return it == j_.end() ? nullptr : &*it;
    }

    void read(std::string_view key, bool& out) const {
        if (const auto* v = get(key)) {
            if (!v->is_boolean()) fail(at(key), "expected boolean");
            out = v->get<bool>();
        }
    }

    template <class Int>
    void read_int(std::string_view key, Int& out) const {
        if (const auto* v = get(key)) {
            if (!v->is_number_integer()) fail(at(key), "expected integer");
            out = static_cast<Int>(v->get<std::int64_t>());
        }
    }

    void read_opt_int(std::string_view key, std::optional<int>& out) const {
        if (const auto* v = get(key)) {
            if (v->is_null()) {
                out.reset();
                return;
            }
            if (!v->is_number_integer()) fail(at(key), "expected integer or null");
            out = static_cast<int>(v->get<std::int64_t>());
        }
    }

    template <class E, std::size_t N>
    void read_enum(std::string_view key, const NameTable<E, N>& table, E& out) const {
        const auto* v = get(key);
        if (!v) return;
        if (v->is_string()) {
            const auto s = v->get<std::string>();
            for (const auto& [value, name] : table) {
                if (name == s) {
                    out = value;
                    return;
                }
            }
        }
        std::string choices;
        for (const auto& [_, name] : table) choices += (choices.empty() ? "" : "|") + std::string(name);
        fail(at(key), "expected one of " + choices);
    }

    Reader child(std::string_view key) const {
        static const Json empty = Json::object();
        const auto* v = get(key);
        return Reader(v ? *v : empty, at(key));
    }

    std::string at(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

    [[noreturn]] static void fail(const std::string& path, const std::string& what) {
        throw SettingsError(path + ": " + what);
    }

private:
    const Json& j_;
    std::string path_;
};

// Fields whose value may be null/absent in a valid settings object.
const std::set<std::string>& optional_paths() {
    static const std::set<std::string> paths{"style.min_reply_chars", "style.max_reply_chars", "preset"};
    return paths;
}

Json full_shape() {
    AgentSettings s;
    s.style.min_reply_chars = 0;
    s.style.max_reply_chars = 0;
    s.preset = "";
    return to_json(s);
}

void check_patch(const Json& patch, const Json& shape, const std::string& path) {
    if (!patch.is_object()) Reader::fail(path.empty() ? "patch" : path, "expected object");
    for (const auto& [key, value] : patch.items()) {
        const auto full = path.empty() ? key : path + "." + key;
        const auto it = shape.find(key);
        if (it == shape.end()) Reader::fail(full, "unknown field");
        if (value.is_null()) {
            if (!optional_paths().contains(full)) Reader::fail(full, "field cannot be removed");
            continue;
        }
        if (it->is_object()) check_patch(value, *it, full);
    }
}

}  // namespace

std::string_view to_string(Mode m) { return name_of(kModes, m); }
std::string_view to_string(ThresholdLevel t) { return name_of(kLevels, t); }
std::string_view to_string(PlacementMode p) { return name_of(kPlacements, p); }
std::string_view to_string(Tone t) { return name_of(kTones, t); }
std::string_view to_string(GovernancePolicy p) { return name_of(kPolicies, p); }

Json to_json(const AgentSettings& s) {
    Json j;
    j["mode"] = std::string(to_string(s.mode));
    j["threshold"] = std::string(to_string(s.threshold));
    j["placement"] = std::string(to_string(s.placement));
    j["long_message"] = {
        {"enabled", s.long_message.enabled},
        {"trigger_chars", s.long_message.trigger_chars},
        {"preview_chars", s.long_message.preview_chars},
    };
    j["rate"] = {
        {"initial_delay_ms", s.rate.initial_delay_ms},
        {"hold_while_typing", s.rate.hold_while_typing},
        {"max_posts_per_minute", s.rate.max_posts_per_minute},
        {"speak_first", s.rate.speak_first},
        {"consolidate_window_ms", s.rate.consolidate_window_ms},
    };
    Json style;
    style["tone"] = std::string(to_string(s.style.tone));
    if (s.style.min_reply_chars) style["min_reply_chars"] = *s.style.min_reply_chars;
    if (s.style.max_reply_chars) style["max_reply_chars"] = *s.style.max_reply_chars;
    style["bulleted_lists"] = s.style.bulleted_lists;
    j["style"] = std::move(style);
    j["governance"] = {
        {"policy", std::string(to_string(s.governance.policy))},
        {"admins", s.governance.admins},
        {"auto_apply", s.governance.auto_apply},
        {"confirm_window_ms", s.governance.confirm_window_ms},
    };
    if (s.preset) j["preset"] = *s.preset;
    return j;
}

AgentSettings settings_from_json(const Json& j) {
    AgentSettings s;
    const Reader root(j, "");
    root.allow({"mode", "threshold", "placement", "long_message", "rate", "style", "governance", "preset"});
    root.read_enum("mode", kModes, s.mode);
    root.read_enum("threshold", kLevels, s.threshold);
    root.read_enum("placement", kPlacements, s.placement);

    const auto lm = root.child("long_message");
    lm.allow({"enabled", "trigger_chars", "preview_chars"});
    lm.read("enabled", s.long_message.enabled);
    lm.read_int("trigger_chars", s.long_message.trigger_chars);
    lm.read_int("preview_chars", s.long_message.preview_chars);

    const auto rate = root.child("rate");
    rate.allow({"initial_delay_ms", "hold_while_typing", "max_posts_per_minute", "speak_first", "consolidate_window_ms"});
    rate.read_int("initial_delay_ms", s.rate.initial_delay_ms);
    rate.read("hold_while_typing", s.rate.hold_while_typing);
    rate.read_int("max_posts_per_minute", s.rate.max_posts_per_minute);
    rate.read("speak_first", s.rate.speak_first);
    rate.read_int("consolidate_window_ms", s.rate.consolidate_window_ms);

    const auto style = root.child("style");
    style.allow({"tone", "min_reply_chars", "max_reply_chars", "bulleted_lists"});
    style.read_enum("tone", kTones, s.style.tone);
    style.read_opt_int("min_reply_chars", s.style.min_reply_chars);
    style.read_opt_int("max_reply_chars", s.style.max_reply_chars);
    style.read("bulleted_lists", s.style.bulleted_lists);

    const auto gov = root.child("governance");
    gov.allow({"policy", "admins", "auto_apply", "confirm_window_ms"});
    gov.read_enum("policy", kPolicies, s.governance.policy);
    if (const auto* admins = gov.get("admins")) {
        if (!admins->is_array()) Reader::fail("governance.admins", "expected array of names");
        s.governance.admins.clear();
        for (const auto& a : *admins) {
            if (!a.is_string() || !is_valid_name(a.get<std::string>())) {
                Reader::fail("governance.admins", "expected array of names");
            }
            s.governance.admins.push_back(a.get<std::string>());
        }
    }
    gov.read("auto_apply", s.governance.auto_apply);
    gov.read_int("confirm_window_ms", s.governance.confirm_window_ms);

    if (const auto* p = root.get("preset")) {
        if (p->is_null()) {
            s.preset.reset();
        } else if (p->is_string()) {
            s.preset = p->get<std::string>();
        } else {
            Reader::fail("preset", "expected string or null");
        }
    }
    validate(s);
    return s;
}

void validate(const AgentSettings& s) {
    const auto& lm = s.long_message;
    if (lm.preview_chars < 1) Reader::fail("long_message.preview_chars", "must be >= 1");
    if (lm.trigger_chars < lm.preview_chars) Reader::fail("long_message.trigger_chars", "must be >= preview_chars");
    if (s.rate.initial_delay_ms < 0) Reader::fail("rate.initial_delay_ms", "must be >= 0");
    if (s.rate.max_posts_per_minute < 0) Reader::fail("rate.max_posts_per_minute", "must be >= 0");
    if (s.rate.consolidate_window_ms < 0) Reader::fail("rate.consolidate_window_ms", "must be >= 0");
    if (s.style.min_reply_chars && *s.style.min_reply_chars < 0) Reader::fail("style.min_reply_chars", "must be >= 0");
    if (s.style.max_reply_chars && *s.style.max_reply_chars < 1) Reader::fail("style.max_reply_chars", "must be >= 1");
    if (s.style.min_reply_chars && s.style.max_reply_chars && *s.style.min_reply_chars > *s.style.max_reply_chars) {
        Reader::fail("style.min_reply_chars", "must be <= max_reply_chars");
    }
    if (s.governance.policy == GovernancePolicy::admin && s.governance.admins.empty()) {
        Reader::fail("governance.admins", "admin policy requires at least one admin");
    }
    if (s.governance.confirm_window_ms < 1) Reader::fail("governance.confirm_window_ms", "must be >= 1");
}

AgentSettings load_settings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read settings file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const auto j = Json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) throw SettingsError(path.string() + ": not valid JSON");
    return settings_from_json(j);
}

void validate_patch(const Json& patch) {
    static const Json shape = full_shape();
    check_patch(patch, shape, "");
}

AgentSettings apply_patch(const AgentSettings& s, const Json& patch) {
    validate_patch(patch);
    auto merged = to_json(s);
    merged.merge_patch(patch);
    return settings_from_json(merged);
}

Json project(const Json& full, const Json& shape) {
    Json out = Json::object();
    for (const auto& [key, value] : shape.items()) {
        const auto it = full.find(key);
        if (it == full.end()) {
            out[key] = nullptr;
        } else if (value.is_object() && it->is_object()) {
            out[key] = project(*it, value);
        } else {
            out[key] = *it;
        }
    }
    return out;
}

}  // namespace chorus
