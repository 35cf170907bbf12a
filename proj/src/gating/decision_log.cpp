#include "chorus/gating/decision_log.hpp"

#include <fstream>

#include "chorus/provider/decision_parser.hpp"

namespace chorus {

namespace {

Json decision_json(const AgentDecision& d) {
    Json j{{"value", d.value}, {"verdict", std::string(to_string(d.verdict))}};
    if (d.reaction) j["reaction"] = std::string(token_name(*d.reaction));
    return j;
}

}  // namespace

Json to_json(const DecisionRecord& r) {
    Json j;
    j["trigger_seq"] = r.trigger_seq;
    if (r.source_seq) j["source_seq"] = *r.source_seq;
    j["ts_ms"] = r.ts_ms;
    j["author"] = r.author;

    Json addressee{{"class", std::string(to_string(r.addressee.kind))}};
    if (!r.addressee.name.empty()) addressee["name"] = r.addressee.name;
    if (r.addressee.conflict) addressee["conflict"] = true;
    j["addressee"] = std::move(addressee);
    j["mode"] = std::string(to_string(r.mode));
    j["threshold"] = std::string(to_string(r.threshold));

    j["invoked"] = r.invoked;
    j["decision"] = r.decision ? decision_json(*r.decision) : Json();
    if (r.parse_error) j["parse_error"] = *r.parse_error;
    if (r.provider_error) j["provider_error"] = *r.provider_error;
    j["override"] = r.override_kind;
    j["gate_result"] = r.gate_result;

    if (r.schedule) {
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Scheduled>) {
                    j["scheduled"] = Json{{"at_ms", s.at}};
                } else if constexpr (std::is_same_v<T, Suppressed>) {
                    j["suppressed"] = Json{{"reason", s.reason}};
                } else {
                    j["deferred"] = Json{{"until", s.until}};
                }
            },
            *r.schedule);
    }
    if (r.deferred_once) j["was_deferred"] = true;
    if (r.refreshed) {
        j["refreshed"] = true;
        if (r.refresh_decision) j["refresh_decision"] = decision_json(*r.refresh_decision);
    }
    if (r.dropped) j["dropped"] = *r.dropped;
    if (r.merged_into) j["merged_into"] = *r.merged_into;

    Json fin = Json::object();
    if (r.final.posted_seq) fin["posted_seq"] = *r.final.posted_seq;
    if (r.final.full_text_seq) fin["full_text_seq"] = *r.final.full_text_seq;
    if (r.final.reaction) fin["reaction"] = *r.final.reaction;
    if (r.final.reaction_seq) fin["reaction_seq"] = *r.final.reaction_seq;
    if (r.final.control_seq) fin["control_seq"] = *r.final.control_seq;
    if (r.final.emitted_at) fin["emitted_at"] = *r.final.emitted_at;
    j["final"] = std::move(fin);
    j["resolved"] = r.resolved;
    return j;
}

std::string to_jsonl(const DecisionRecord& r) {
    return to_json(r).dump(-1, ' ', false, Json::error_handler_t::replace);
}

DecisionRecord& DecisionLog::add(DecisionRecord r) {
    index_[r.trigger_seq] = records_.size();
    records_.push_back(std::move(r));
    return records_.back();
}

DecisionRecord* DecisionLog::find(Seq trigger_seq) {
    const auto it = index_.find(trigger_seq);
    return it == index_.end() ? nullptr : &records_[it->second];
}

const DecisionRecord* DecisionLog::find(Seq trigger_seq) const {
    const auto it = index_.find(trigger_seq);
    return it == index_.end() ? nullptr : &records_[it->second];
}

std::string DecisionLog::to_jsonl() const {
    std::string out;
    for (const auto& r : records_) {
        out += chorus::to_jsonl(r);
        out += '\n';
    }
    return out;
}

void DecisionLog::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_jsonl();
}

}  // namespace chorus
