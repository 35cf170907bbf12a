#include "chorus/governance/authority.hpp"

#include <algorithm>

namespace chorus {

namespace {

bool contains(const std::vector<std::string>& names, const std::string& name) {
    return std::find(names.begin(), names.end(), name) != names.end();
}

std::string leaf_text(const Json& v) {
    if (v.is_null()) return "unset";
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

void flatten(const Json& old_values, const Json& new_values, const std::string& prefix, std::vector<std::string>& out) {
    for (const auto& [key, value] : new_values.items()) {
        const auto path = prefix.empty() ? key : prefix + "." + key;
        const auto old_it = old_values.is_object() ? old_values.find(key) : old_values.end();
        const Json old_value = (old_values.is_object() && old_it != old_values.end()) ? *old_it : Json();
        if (value.is_object()) {
            flatten(old_value, value, path, out);
        } else {
            out.push_back(path + ": " + leaf_text(old_value) + " -> " + leaf_text(value));
        }
    }
}

}  // namespace

std::string_view to_string(Ballot b) { return b == Ballot::yes ? "yes" : "no"; }

std::optional<Ballot> ballot_from_string(std::string_view s) {
    if (s == "yes") return Ballot::yes;
    if (s == "no") return Ballot::no;
    return std::nullopt;
}

std::string_view to_string(ProposalState s) {
    switch (s) {
        case ProposalState::open: return "open";
        case ProposalState::applied: return "applied";
        case ProposalState::rejected: return "rejected";
    }
    return "open";
}

std::string_view to_string(GovernanceErrc code) {
    switch (code) {
        case GovernanceErrc::invalid_patch: return "invalid_patch";
        case GovernanceErrc::proposal_open: return "proposal_open";
        case GovernanceErrc::unknown_proposal: return "unknown_proposal";
        case GovernanceErrc::ineligible_voter: return "ineligible_voter";
        case GovernanceErrc::proposal_closed: return "proposal_closed";
        case GovernanceErrc::not_member: return "not_member";
    }
    return "invalid_patch";
}

std::string_view to_string(ChangeOutcome::Status s) {
    switch (s) {
        case ChangeOutcome::Status::applied: return "applied";
        case ChangeOutcome::Status::proposal_opened: return "proposal_opened";
        case ChangeOutcome::Status::denied: return "denied";
    }
    return "denied";
}

int Proposal::yes() const {
    return static_cast<int>(std::count_if(ballots.begin(), ballots.end(), [](const auto& b) { return b.second == Ballot::yes; }));
}

int Proposal::no() const { return static_cast<int>(ballots.size()) - yes(); }

Json to_json(const Proposal& p) {
    Json ballots = Json::object();
    for (const auto& [name, b] : p.ballots) ballots[name] = std::string(to_string(b));
    return Json{
        {"id", p.id},
        {"proposer", p.proposer},
        {"patch", p.patch},
        {"eligible", p.eligible},
        {"ballots", ballots},
        {"yes", p.yes()},
        {"no", p.no()},
        {"state", std::string(to_string(p.state))},
    };
}

std::string describe_change(const Json& old_values, const Json& new_values) {
    std::vector<std::string> parts;
    flatten(old_values, new_values, "", parts);
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : ", ") + p;
    return out;
}

SettingsAuthority::SettingsAuthority(std::string agent_name, AgentSettings initial, PresetCatalog presets)
    : agent_name_(std::move(agent_name)), settings_(std::move(initial)), presets_(std::move(presets)) {
    validate(settings_);
}

std::vector<std::string> SettingsAuthority::prompt_directives() const {
    if (!settings_.preset) return {};
    if (const auto* p = presets_.find(*settings_.preset)) return p->prompt_patch;
    return {};
}

ChatEvent SettingsAuthority::apply_now(const std::string& actor, const Json& patch, std::string_view via) {
    const auto next = apply_patch(settings_, patch);
    const auto old_full = to_json(settings_);
    const auto new_full = to_json(next);
    const auto old_values = project(old_full, patch);
    const auto new_values = project(new_full, patch);
    settings_ = next;

    ChatEvent notice;
    notice.author = agent_name_;
    notice.kind = EventKind::settings_change;
    notice.text = "Settings changed by " + actor + ": " + describe_change(old_values, new_values);
    notice.payload = Json{
        {"stage", "applied"}, {"actor", actor}, {"via", std::string(via)},
        {"patch", patch},     {"old", old_values}, {"new", new_values},
    };
    return notice;
}

ChatEvent SettingsAuthority::proposal_event(const Proposal& p, const std::string& author) const {
    ChatEvent e;
    e.author = author;
    e.kind = EventKind::proposal;
    auto summary = describe_change(project(to_json(settings_), p.patch), p.patch);
    switch (p.state) {
        case ProposalState::open:
            e.text = p.proposer + " proposes a settings change (" + summary + "). Vote yes or no.";
            break;
        case ProposalState::applied:
            e.text = "Proposal " + std::to_string(p.id) + " passed.";
            break;
        case ProposalState::rejected:
            e.text = "Proposal " + std::to_string(p.id) + " was rejected.";
            break;
    }
    auto payload = to_json(p);
    payload.erase("ballots");
    e.payload = std::move(payload);
    return e;
}

ChangeOutcome SettingsAuthority::request_change(const std::string& actor, const Json& patch,
                                                const std::vector<std::string>& humans) {
    if (!contains(humans, actor)) throw GovernanceError(GovernanceErrc::not_member, actor + " is not a room member");
    try {
        (void)apply_patch(settings_, patch);
    } catch (const SettingsError& e) {
        throw GovernanceError(GovernanceErrc::invalid_patch, e.what());
    }

    ChangeOutcome out;
    switch (settings_.governance.policy) {
        case GovernancePolicy::open:
            out.status = ChangeOutcome::Status::applied;
            out.events.push_back(apply_now(actor, patch, "direct"));
            return out;
        case GovernancePolicy::admin:
            if (!contains(settings_.governance.admins, actor)) {
                out.status = ChangeOutcome::Status::denied;
                out.reason = actor + " is not an admin";
                return out;
            }
            out.status = ChangeOutcome::Status::applied;
            out.events.push_back(apply_now(actor, patch, "admin"));
            return out;
        case GovernancePolicy::vote:
            break;
    }

    if (open_proposal()) throw GovernanceError(GovernanceErrc::proposal_open, "a proposal is already open");
    Proposal p;
    p.id = static_cast<int>(proposals_.size()) + 1;
    p.proposer = actor;
    p.patch = patch;
    p.eligible = humans;
    p.ballots[actor] = Ballot::yes;
    proposals_.push_back(p);
    out.status = ChangeOutcome::Status::proposal_opened;
    out.events.push_back(proposal_event(p, actor));

    // A one-member roster carries its own proposal.
    auto& stored = proposals_.back();
    if (majority_reached(stored.yes(), static_cast<int>(stored.eligible.size()))) {
        stored.state = ProposalState::applied;
        out.events.push_back(proposal_event(stored, agent_name_));
        out.events.push_back(apply_now(actor, stored.patch, "vote"));
    }
    out.proposal = stored;
    return out;
}

ChangeOutcome SettingsAuthority::apply_preset(const std::string& actor, const std::string& preset_id,
                                              const std::vector<std::string>& humans) {
    const auto* preset = presets_.find(preset_id);
    if (!preset) {
        ChangeOutcome out;
        out.status = ChangeOutcome::Status::denied;
        out.reason = "unknown preset " + preset_id;
        return out;
    }
    auto patch = preset->settings_patch;
    patch["preset"] = preset->id;
    return request_change(actor, patch, humans);
}

VoteOutcome SettingsAuthority::cast_vote(int proposal_id, const std::string& actor, Ballot ballot) {
    auto it = std::find_if(proposals_.begin(), proposals_.end(), [&](const Proposal& p) { return p.id == proposal_id; });
    if (it == proposals_.end()) {
        throw GovernanceError(GovernanceErrc::unknown_proposal, "unknown proposal " + std::to_string(proposal_id));
    }
    auto& p = *it;
    if (p.state != ProposalState::open) {
        throw GovernanceError(GovernanceErrc::proposal_closed, "proposal " + std::to_string(p.id) + " is closed");
    }
    if (!contains(p.eligible, actor)) {
        throw GovernanceError(GovernanceErrc::ineligible_voter, actor + " is not eligible to vote on this proposal");
    }

    VoteOutcome out;
    p.ballots[actor] = ballot;
    ChatEvent vote;
    vote.author = actor;
    vote.kind = EventKind::vote;
    vote.payload = Json{{"proposal_id", p.id}, {"ballot", std::string(to_string(ballot))}};
    out.events.push_back(std::move(vote));

    const int n = static_cast<int>(p.eligible.size());
    const int yes = p.yes();
    const int voted = static_cast<int>(p.ballots.size());
    if (majority_reached(yes, n)) {
        try {
            auto notice = apply_now(p.proposer, p.patch, "vote");
            p.state = ProposalState::applied;
            out.events.push_back(proposal_event(p, agent_name_));
            out.events.push_back(std::move(notice));
        } catch (const SettingsError&) {
            // Settings moved underneath the proposal and the patch no longer validates.
            p.state = ProposalState::rejected;
            out.events.push_back(proposal_event(p, agent_name_));
        }
    } else if (majority_unreachable(yes, voted, n)) {
        p.state = ProposalState::rejected;
        out.events.push_back(proposal_event(p, agent_name_));
    }
    out.state = VoteState{p.yes(), p.no(), n, p.state};
    out.proposal = p;
    return out;
}

ChatEvent SettingsAuthority::force_apply(const std::string& actor, const Json& patch) {
    return apply_now(actor, patch, "recorded");
}

const Proposal* SettingsAuthority::open_proposal() const {
    for (const auto& p : proposals_) {
        if (p.state == ProposalState::open) return &p;
    }
    return nullptr;
}

const Proposal* SettingsAuthority::find_proposal(int id) const {
    for (const auto& p : proposals_) {
        if (p.id == id) return &p;
    }
    return nullptr;
}

}  // namespace chorus
