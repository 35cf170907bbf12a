#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chorus/core/types.hpp"

namespace chorus {

enum class Mode { proactive, reactive };
enum class ThresholdLevel { high, medium, low };
enum class PlacementMode { channel, thread };
enum class Tone { neutral, friendly, formal };
enum class GovernancePolicy { open, admin, vote };

// Contribution thresholds on the 0-100 value scale.
constexpr int threshold_value(ThresholdLevel level) {
    switch (level) {
        case ThresholdLevel::high: return 90;
        case ThresholdLevel::medium: return 75;
        case ThresholdLevel::low: return 50;
    }
    return 90;
}

std::string_view to_string(Mode m);
std::string_view to_string(ThresholdLevel t);
std::string_view to_string(PlacementMode p);
std::string_view to_string(Tone t);
std::string_view to_string(GovernancePolicy p);

struct LongMessagePolicy {
    bool enabled = true;
    int trigger_chars = 1000;
    int preview_chars = 280;
};

struct RatePolicy {
    Millis initial_delay_ms = 2000;
    bool hold_while_typing = true;
    int max_posts_per_minute = 6;  // 0 disables the cap
    bool speak_first = true;
    Millis consolidate_window_ms = 0;  // 0 disables consolidation
};

struct StylePolicy {
    Tone tone = Tone::neutral;
    std::optional<int> min_reply_chars;
    std::optional<int> max_reply_chars;
    bool bulleted_lists = false;
};

struct GovernanceSettings {
    GovernancePolicy policy = GovernancePolicy::open;
    std::vector<std::string> admins;
    bool auto_apply = false;             // conversational control skips the confirmation step
    Millis confirm_window_ms = 120'000;  // unconfirmed intents expire after this
};

struct AgentSettings {
    Mode mode = Mode::proactive;
    ThresholdLevel threshold = ThresholdLevel::medium;
    PlacementMode placement = PlacementMode::channel;
    LongMessagePolicy long_message;
    RatePolicy rate;
    StylePolicy style;
    GovernanceSettings governance;
    std::optional<std::string> preset;
};

// Field-exact validation failure, e.g. "rate.max_posts_per_minute: expected integer".
class SettingsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

Json to_json(const AgentSettings& s);

// Overlays `j` onto the defaults. Unknown fields, wrong types and broken
// invariants raise SettingsError naming the field.
AgentSettings settings_from_json(const Json& j);
AgentSettings load_settings(const std::filesystem::path& path);

void validate(const AgentSettings& s);

// Checks that a partial patch only names known fields and only nulls optional ones.
void validate_patch(const Json& patch);

// JSON merge-patch semantics; the merged result must satisfy every invariant.
AgentSettings apply_patch(const AgentSettings& s, const Json& patch);

// The subset of `full` at the key paths named by `shape` (missing keys become null).
Json project(const Json& full, const Json& shape);

}  // namespace chorus
