#include "chorus/simbench/invariants.hpp"

#include <map>

namespace chorus {

std::string describe(const InvariantViolation& v) {
    return v.invariant + " at seq " + std::to_string(v.seq) + ": " + v.detail;
}

namespace {

std::vector<Seq> trigger_seqs(const ChatEvent& e) {
    std::vector<Seq> out;
    if (!e.payload || !e.payload->contains("trigger_seqs")) return out;
    const auto& arr = (*e.payload)["trigger_seqs"];
    if (!arr.is_array()) return out;
    for (const auto& s : arr) {
        if (s.is_number_integer()) out.push_back(s.get<Seq>());
    }
    return out;
}

bool is_forced(const DecisionRecord& r) {
    return r.override_kind == "forced_reply" || r.override_kind == "forced_reply_conflict";
}

}  // namespace

std::vector<InvariantViolation> check_invariants(const ReplayResult& result) {
    std::vector<InvariantViolation> out;
    const auto fail = [&](std::string name, Seq seq, std::string detail) {
        out.push_back(InvariantViolation{std::move(name), seq, std::move(detail)});
    };

    const auto& events = result.transcript;
    std::map<Seq, const ChatEvent*> by_seq;
    Millis last_ts = events.empty() ? 0 : events.front().ts_ms;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        if (e.seq != static_cast<Seq>(i + 1)) fail("contiguous_seq", e.seq, "expected " + std::to_string(i + 1));
        if (e.ts_ms < last_ts) fail("monotonic_time", e.seq, "timestamp goes backwards");
        last_ts = e.ts_ms;
        by_seq[e.seq] = &e;
    }

    // Every agent output points at earlier human messages; one output per trigger.
    std::map<Seq, int> outputs_per_trigger;
    for (const auto& e : events) {
        if (e.author != result.agent_name) continue;
        if (e.kind != EventKind::message && e.kind != EventKind::reaction) continue;
        const auto triggers = trigger_seqs(e);
        if (triggers.empty()) {
            fail("provenance", e.seq, "agent output without trigger_seqs");
            continue;
        }
        for (const Seq t : triggers) {
            const auto it = by_seq.find(t);
            if (it == by_seq.end() || t >= e.seq || it->second->author == result.agent_name ||
                it->second->kind != EventKind::message) {
                fail("provenance", e.seq, "trigger " + std::to_string(t) + " is not an earlier human message");
            }
        }
        const bool companion = e.payload && e.payload->contains("full_text_of");
        if (!companion) {
            for (const Seq t : triggers) ++outputs_per_trigger[t];
        }
    }
    for (const auto& [trigger, count] : outputs_per_trigger) {
        if (count > 1) fail("single_output", trigger, std::to_string(count) + " agent outputs for one trigger");
    }

    for (const auto& r : result.log.records()) {
        const bool contributed = r.contributed() || r.merged_into.has_value();
        if (r.invoked && r.addressee.kind == AddresseeClass::Kind::other_addressed) {
            fail("other_addressed_silent", r.trigger_seq, "provider invoked for a message addressed to someone else");
        }
        if (r.mode == Mode::reactive && r.invoked && r.addressee.kind != AddresseeClass::Kind::agent_addressed) {
            fail("reactive_silence", r.trigger_seq, "invoked in reactive mode without a mention");
        }
        if (is_forced(r) && r.resolved && !contributed) {
            fail("forced_reply", r.trigger_seq, "addressed message resolved without a reply");
        }
        if (r.invoked && !is_forced(r) && (r.final.posted_seq || r.final.reaction_seq)) {
            const auto& d = r.refresh_decision ? r.refresh_decision : r.decision;
            const bool passes = d && d->verdict == Verdict::SUBMIT && d->value >= threshold_value(r.threshold);
            if (!passes) fail("threshold_gate", r.trigger_seq, "contribution without a passing decision");
        }
    }

    // Truncated previews must be recoverable from their full-text companion.
    for (const auto& e : events) {
        if (e.author != result.agent_name || !e.payload || !e.payload->contains("full_text_of")) continue;
        const auto it = by_seq.find((*e.payload)["full_text_of"].get<Seq>());
        if (it == by_seq.end() || !it->second->text) {
            fail("truncation", e.seq, "full text refers to a missing preview");
            continue;
        }
        std::string preview = *it->second->text;
        constexpr std::string_view ellipsis = "\xE2\x80\xA6";
        if (preview.size() >= ellipsis.size() && preview.compare(preview.size() - ellipsis.size(), ellipsis.size(), ellipsis) == 0) {
            preview.resize(preview.size() - ellipsis.size());
        }
        if (!e.text || e.text->compare(0, preview.size(), preview) != 0) {
            fail("truncation", e.seq, "preview is not a prefix of the full text");
        }
    }
    return out;
}

}  // namespace chorus
