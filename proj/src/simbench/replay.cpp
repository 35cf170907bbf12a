#include "chorus/simbench/replay.hpp"

#include <deque>

namespace chorus {

namespace {

constexpr std::size_t kMaxDrainSteps = 1'000'000;

bool replayable_settings_change(const ChatEvent& e) {
    if (e.kind != EventKind::settings_change || !e.payload || !e.payload->is_object()) return false;
    const auto& p = *e.payload;
    if (p.value("stage", "") != "applied" || !p.contains("patch")) return false;
    if (p.value("origin", "") == "conversation") return false;
    // Vote outcomes are reproduced from the recorded ballots.
    return p.value("via", "") != "vote";
}

class Driver {
public:
    Driver(const ProviderScript& script, const ReplayOptions& options, std::string room)
        : transcript_(std::move(room)),
          engine_(transcript_, options.engine,
                  SettingsAuthority(options.engine.agent_name, options.settings, options.presets), options.prompt),
          backend_(script, options.engine.agent_name),
          agent_(options.engine.agent_name) {}

    ReplayResult run(const std::vector<ChatEvent>& input) {
        Millis last_ts = input.empty() ? 0 : input.front().ts_ms;
        for (std::size_t i = 0; i < input.size(); ++i) {
            const auto& e = input[i];
            const std::size_t index = i + 1;
            if (e.ts_ms < last_ts) throw ReplayError(index, "timestamp goes backwards");
            last_ts = e.ts_ms;
            advance_before(e.ts_ms);
            now_ = e.ts_ms;
            try {
                feed(e, index);
            } catch (const InvalidEvent& err) {
                throw ReplayError(index, err.what());
            }
        }
        finish();

        ReplayResult out;
        out.transcript = transcript_.snapshot();
        out.log = engine_.log();
        for (const auto& [output_seq, input_seq] : out_to_in_) {
            if (auto* r = out.log.find(output_seq)) r->source_seq = input_seq;
        }
        out.input_to_output = std::move(in_to_out_);
        out.warnings = std::move(warnings_);
        out.final_settings = engine_.settings();
        out.agent_name = agent_;
        return out;
    }

private:
    void warn(std::size_t index, const std::string& what) {
        warnings_.push_back("event " + std::to_string(index) + ": " + what);
    }

    void advance_before(Millis ts) {
        for (std::size_t steps = 0; steps < kMaxDrainSteps; ++steps) {
            const auto d = engine_.next_deadline();
            if (!d || *d >= ts) return;
            now_ = std::max(now_, *d);
            drain(engine_.tick(now_));
        }
        throw std::runtime_error("replay clock did not settle");
    }

    void finish() {
        std::optional<Millis> previous;
        for (std::size_t steps = 0; steps < kMaxDrainSteps; ++steps) {
            const auto d = engine_.next_deadline();
            if (!d) return;
            if (previous && *d <= *previous && *d <= now_) return;
            previous = d;
            now_ = std::max(now_, *d);
            drain(engine_.tick(now_));
        }
        throw std::runtime_error("replay clock did not settle");
    }

    void drain(Effects fx) {
        std::deque<ProviderRequest> requests(fx.requests.begin(), fx.requests.end());
        while (!requests.empty()) {
            auto req = std::move(requests.front());
            requests.pop_front();
            if (const auto it = out_to_in_.find(req.trigger.seq); it != out_to_in_.end()) req.trigger.seq = it->second;
            auto more = engine_.provider_result(req.id, backend_.generate(req.prompt, req.trigger, req.params), now_);
            requests.insert(requests.end(), more.requests.begin(), more.requests.end());
        }
    }

    void map_seq(Seq input_seq, const Effects& fx, const ChatEvent& original) {
        for (const auto& out : fx.events) {
            if (out.author == original.author && out.kind == original.kind) {
                in_to_out_[input_seq] = out.seq;
                out_to_in_[out.seq] = input_seq;
                return;
            }
        }
    }

    void feed(const ChatEvent& e, std::size_t index) {
        if (e.author == agent_) {
            if (replayable_settings_change(e)) {
                auto fx = engine_.record_governance_event(e, now_);
                map_seq(e.seq, fx, e);
                drain(std::move(fx));
            }
            return;
        }

        switch (e.kind) {
            case EventKind::message:
            case EventKind::reaction:
            case EventKind::typing_start:
            case EventKind::typing_stop:
            case EventKind::join:
            case EventKind::leave: {
                ChatEvent draft = e;
                draft.seq = 0;
                if (e.thread_of) {
                    const auto it = in_to_out_.find(*e.thread_of);
                    if (it != in_to_out_.end()) {
                        draft.thread_of = it->second;
                    } else if (e.kind == EventKind::reaction) {
                        warn(index, "reaction to an event that was not replayed; skipped");
                        return;
                    } else {
                        warn(index, "thread parent was not replayed; posted to the channel");
                        draft.thread_of.reset();
                    }
                }
                auto fx = engine_.submit(std::move(draft), now_);
                map_seq(e.seq, fx, e);
                drain(std::move(fx));
                return;
            }
            case EventKind::proposal: {
                if (!e.payload || e.payload->value("origin", "") == "conversation") return;
                if (e.payload->value("state", "") != "open" || !e.payload->contains("patch")) return;
                try {
                    auto fx = engine_.request_change(e.author, (*e.payload)["patch"], now_);
                    map_seq(e.seq, fx, e);
                    drain(std::move(fx));
                } catch (const GovernanceError& err) {
                    warn(index, std::string("proposal not reproduced: ") + err.what());
                }
                return;
            }
            case EventKind::vote: {
                const auto& p = e.payload;
                if (!p || !(*p)["proposal_id"].is_number_integer() || !(*p)["ballot"].is_string()) {
                    throw ReplayError(index, "vote needs proposal_id and ballot");
                }
                const auto ballot = ballot_from_string((*p)["ballot"].get<std::string>());
                if (!ballot) throw ReplayError(index, "unknown ballot");
                try {
                    auto fx = engine_.cast_vote((*p)["proposal_id"].get<int>(), e.author, *ballot, now_);
                    map_seq(e.seq, fx, e);
                    drain(std::move(fx));
                } catch (const GovernanceError& err) {
                    warn(index, std::string("vote not reproduced: ") + err.what());
                }
                return;
            }
            case EventKind::settings_change:
                warn(index, "settings change authored by a human; skipped");
                return;
        }
    }

    Transcript transcript_;
    RoomEngine engine_;
    ScriptedBackend backend_;
    std::string agent_;
    Millis now_ = 0;
    std::map<Seq, Seq> in_to_out_;
    std::map<Seq, Seq> out_to_in_;
    std::vector<std::string> warnings_;
};

}  // namespace

ReplayResult replay(const std::vector<ChatEvent>& input, const ProviderScript& script, const ReplayOptions& options) {
    std::string room = options.room;
    if (room.empty()) room = input.empty() || input.front().room.empty() ? "replay" : input.front().room;
    Driver driver(script, options, std::move(room));
    return driver.run(input);
}

}  // namespace chorus
