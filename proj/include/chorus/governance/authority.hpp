#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chorus/core/types.hpp"
#include "chorus/governance/presets.hpp"
#include "chorus/governance/settings.hpp"

namespace chorus {

enum class Ballot { yes, no };
enum class ProposalState { open, applied, rejected };

std::string_view to_string(Ballot b);
std::string_view to_string(ProposalState s);
std::optional<Ballot> ballot_from_string(std::string_view s);

struct Proposal {
    int id = 0;
    std::string proposer;
    Json patch = Json::object();
    std::vector<std::string> eligible;  // human roster snapshot at open time
    std::map<std::string, Ballot> ballots;
    ProposalState state = ProposalState::open;

    int yes() const;
    int no() const;
};

Json to_json(const Proposal& p);

struct VoteState {
    int yes = 0;
    int no = 0;
    int eligible = 0;
    ProposalState state = ProposalState::open;
};

// Strict majority of the eligible snapshot.
constexpr bool majority_reached(int yes, int eligible) { return 2 * yes > eligible; }
// Even if every voter who has not voted says yes, there is no majority.
constexpr bool majority_unreachable(int yes, int voted, int eligible) { return !majority_reached(yes + eligible - voted, eligible); }

enum class GovernanceErrc {
    invalid_patch,
    proposal_open,
    unknown_proposal,
    ineligible_voter,
    proposal_closed,
    not_member,
};

std::string_view to_string(GovernanceErrc code);

class GovernanceError : public std::runtime_error {
public:
    GovernanceError(GovernanceErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    GovernanceErrc code() const { return code_; }

private:
    GovernanceErrc code_;
};

// Result of a change request. `events` are drafts (no seq/ts/room) for the
// room to append in order: settings_change notices, proposal and vote records.
struct ChangeOutcome {
    enum class Status { applied, proposal_opened, denied };
    Status status = Status::denied;
    std::string reason;
    std::optional<Proposal> proposal;
    std::vector<ChatEvent> events;
};

std::string_view to_string(ChangeOutcome::Status s);

struct VoteOutcome {
    VoteState state;
    Proposal proposal;
    std::vector<ChatEvent> events;
};

// Room-scoped owner of AgentSettings. Settings only change through Applied
// outcomes, and every Applied emits exactly one settings_change notice.
class SettingsAuthority {
public:
    SettingsAuthority(std::string agent_name, AgentSettings initial, PresetCatalog presets = PresetCatalog::builtin());

    const AgentSettings& settings() const { return settings_; }
    const PresetCatalog& presets() const { return presets_; }

    // Directives from the installed preset, appended to the system prompt.
    std::vector<std::string> prompt_directives() const;

    // `humans` is the current human roster; the actor must be in it.
    ChangeOutcome request_change(const std::string& actor, const Json& patch, const std::vector<std::string>& humans);

    ChangeOutcome apply_preset(const std::string& actor, const std::string& preset_id,
                               const std::vector<std::string>& humans);

    VoteOutcome cast_vote(int proposal_id, const std::string& actor, Ballot ballot);

    // Re-applies a change recorded elsewhere (transcript replay); bypasses policy.
    ChatEvent force_apply(const std::string& actor, const Json& patch);

    const Proposal* open_proposal() const;
    const Proposal* find_proposal(int id) const;

private:
    ChatEvent apply_now(const std::string& actor, const Json& patch, std::string_view via);
    ChatEvent proposal_event(const Proposal& p, const std::string& author) const;

    std::string agent_name_;
    AgentSettings settings_;
    PresetCatalog presets_;
    std::vector<Proposal> proposals_;
};

// Human-readable one-liner for a patch, e.g. "threshold: medium -> low".
std::string describe_change(const Json& old_values, const Json& new_values);

}  // namespace chorus
