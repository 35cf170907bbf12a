#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "chorus/core/transcript.hpp"
#include "chorus/gating/decision_log.hpp"
#include "chorus/gating/pipeline.hpp"
#include "chorus/governance/authority.hpp"
#include "chorus/governance/intent.hpp"
#include "chorus/provider/backend.hpp"
#include "chorus/provider/prompt.hpp"

namespace chorus {

struct EngineConfig {
    std::string agent_name = "Koala";
    std::size_t context_events = 50;
    // Re-ask the provider once when its output does not parse.
    bool retry_on_parse_error = false;
};

struct ProviderRequest {
    std::uint64_t id = 0;
    ChatEvent trigger;
    std::string prompt;
    GenParams params;
};

// Everything a call into the engine produced. Events are already appended to
// the transcript, in seq order. Requests must be answered through
// RoomEngine::provider_result.
struct Effects {
    std::vector<ChatEvent> events;
    std::vector<ProviderRequest> requests;
    std::vector<DecisionRecord> resolved;
    std::optional<ChangeOutcome> change;
    std::optional<VoteOutcome> vote;
    bool settings_changed = false;

    void merge(Effects&& other);
};

// Single-threaded agent loop for one room. The host owns the clock: it passes
// `now` into every call and calls tick() at next_deadline(). Live serving and
// offline replay drive the same engine.
class RoomEngine {
public:
    RoomEngine(Transcript& transcript, EngineConfig config, SettingsAuthority authority,
               PromptConfig prompt = PromptConfig::builtin());

    // Human-originated event: message, reaction, typing_start/stop, join, leave.
    Effects submit(ChatEvent draft, Millis now);

    Effects provider_result(std::uint64_t request_id, const GenerationResult& result, Millis now);

    Effects tick(Millis now);

    std::optional<Millis> next_deadline() const;

    // Governance entry points. GovernanceError propagates unchanged.
    Effects request_change(const std::string& actor, const Json& patch, Millis now);
    Effects apply_preset(const std::string& actor, const std::string& preset, Millis now);
    Effects cast_vote(int proposal_id, const std::string& actor, Ballot ballot, Millis now);

    // Appends a governance event recorded elsewhere (replay). Applied settings
    // changes carried in its payload take effect without policy checks.
    Effects record_governance_event(ChatEvent recorded, Millis now);

    // Catches up with a transcript loaded from disk: re-applies recorded
    // settings changes and restores message counters. Call before any submit.
    void restore(const std::vector<ChatEvent>& history);

    const AgentSettings& settings() const { return authority_.settings(); }
    const SettingsAuthority& authority() const { return authority_; }
    const DecisionLog& log() const { return log_; }
    const Transcript& transcript() const { return transcript_; }
    const std::vector<Participant>& roster() const { return roster_; }
    std::vector<std::string> humans() const;
    bool has_participant(const std::string& name) const;
    const std::set<std::string>& typing() const { return typing_; }

    // Work that can still produce agent output: provider calls, pending actions.
    bool idle() const;
    std::optional<std::uint64_t> outstanding_request() const;

private:
    struct Job {
        std::uint64_t id = 0;
        Seq trigger_seq = 0;
        bool refresh = false;
        bool retry = false;
    };

    struct Pending {
        enum class State { awaiting_decision, waiting, deferred, awaiting_refresh };
        Seq trigger_seq = 0;
        ChatEvent trigger;
        AddresseeClass addressee;
        AgentSettings snapshot;
        int prior_human_messages = 0;
        AgentAction action;
        State state = State::awaiting_decision;
        Seq context_seq = 0;  // newest seq the current decision could see
        bool refreshed = false;
        bool merged = false;
        std::uint64_t order = 0;
    };

    ChatEvent append(ChatEvent draft, Millis now, Effects& fx);
    void ensure_participant(const std::string& name);
    void handle_message(const ChatEvent& message, Millis now, Effects& fx);
    void run_change(const std::string& actor, const Json& patch, Millis now, Effects& fx);
    void append_outcome_events(std::vector<ChatEvent> drafts, Millis now, Effects& fx);

    void enqueue(Job job, bool front, Effects& fx);
    void pump(Effects& fx);
    void schedule_initial(Pending& p, Millis now, Effects& fx);
    void release_deferred(Millis now, Effects& fx);
    void process_due(Millis now, Effects& fx);
    void fire(Pending& p, Millis now, Effects& fx);
    bool consolidate_into(Pending& p);
    void emit(Pending& p, Millis now, Effects& fx);
    void resolve(Seq trigger_seq, Effects& fx);
    RoomState room_state(const Pending& p, Millis now) const;
    PromptConfig prompt_for() const;

    Transcript& transcript_;
    EngineConfig config_;
    SettingsAuthority authority_;
    PromptConfig prompt_base_;
    ConversationalControl control_;

    std::vector<Participant> roster_;
    std::set<std::string> typing_;
    std::vector<Millis> agent_post_times_;
    int human_messages_ = 0;
    Seq last_human_message_seq_ = 0;

    DecisionLog log_;
    std::map<Seq, Pending> pending_;
    std::deque<Job> queue_;
    std::optional<Job> outstanding_;
    std::uint64_t next_request_id_ = 1;
    std::uint64_t next_order_ = 1;
};

}  // namespace chorus
