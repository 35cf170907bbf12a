#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chorus/core/decision.hpp"
#include "chorus/core/types.hpp"
#include "chorus/gating/pipeline.hpp"

namespace chorus {

// One evaluated human message, from classification to its final action.
struct DecisionRecord {
    Seq trigger_seq = 0;
    std::optional<Seq> source_seq;  // seq in the replay input, when replaying
    Millis ts_ms = 0;
    std::string author;
    AddresseeClass addressee;
    Mode mode = Mode::proactive;
    ThresholdLevel threshold = ThresholdLevel::medium;

    bool invoked = false;
    std::optional<AgentDecision> decision;
    std::optional<std::string> parse_error;
    std::optional<std::string> provider_error;
    // none | forced_reply | forced_reply_conflict | suppressed_other | settings_intent | confirmation_reply
    std::string override_kind = "none";
    std::string gate_result = "none";  // post | react | silent | none (not invoked)
    std::optional<ScheduleResult> schedule;
    bool deferred_once = false;
    bool refreshed = false;
    std::optional<AgentDecision> refresh_decision;
    std::optional<std::string> dropped;  // "stale_context"
    std::optional<Seq> merged_into;      // trigger seq of the consolidated post

    struct Final {
        std::optional<Seq> posted_seq;
        std::optional<Seq> full_text_seq;
        std::optional<std::string> reaction;
        std::optional<Seq> reaction_seq;
        std::optional<Seq> control_seq;  // settings-control event posted instead of a reply
        std::optional<Millis> emitted_at;
        bool operator==(const Final&) const = default;
    } final;

    bool resolved = false;

    // The agent contributed something visible for this trigger.
    bool contributed() const { return final.posted_seq || final.reaction_seq || final.control_seq; }
};

Json to_json(const DecisionRecord& r);
std::string to_jsonl(const DecisionRecord& r);

class DecisionLog {
public:
    DecisionRecord& add(DecisionRecord r);
    DecisionRecord* find(Seq trigger_seq);
    const DecisionRecord* find(Seq trigger_seq) const;
    const std::vector<DecisionRecord>& records() const { return records_; }

    std::string to_jsonl() const;
    void write(const std::filesystem::path& path) const;

private:
    std::vector<DecisionRecord> records_;
    std::map<Seq, std::size_t> index_;
};

}  // namespace chorus
