#include "chorus/gating/room_engine.hpp"

#include <algorithm>
#include <tuple>

#include "chorus/provider/decision_parser.hpp"

namespace chorus {

void Effects::merge(Effects&& other) {
    events.insert(events.end(), std::make_move_iterator(other.events.begin()),
                  std::make_move_iterator(other.events.end()));
    requests.insert(requests.end(), std::make_move_iterator(other.requests.begin()),
                    std::make_move_iterator(other.requests.end()));
    resolved.insert(resolved.end(), std::make_move_iterator(other.resolved.begin()),
                    std::make_move_iterator(other.resolved.end()));
    if (other.change) change = std::move(other.change);
    if (other.vote) vote = std::move(other.vote);
    settings_changed = settings_changed || other.settings_changed;
}

RoomEngine::RoomEngine(Transcript& transcript, EngineConfig config, SettingsAuthority authority, PromptConfig prompt)
    : transcript_(transcript),
      config_(std::move(config)),
      authority_(std::move(authority)),
      prompt_base_(std::move(prompt)),
      control_(config_.agent_name) {
    if (config_.context_events == 0) throw std::invalid_argument("context_events must be positive");
    prompt_base_.agent_name = config_.agent_name;
    roster_.push_back(Participant{config_.agent_name, ParticipantKind::agent, false});
}

void RoomEngine::restore(const std::vector<ChatEvent>& history) {
    for (const auto& e : history) {
        if (e.kind == EventKind::message && e.author != config_.agent_name) {
            ++human_messages_;
            last_human_message_seq_ = e.seq;
        } else if (e.kind == EventKind::message || e.kind == EventKind::reaction) {
            if (e.kind == EventKind::message && !(e.payload && e.payload->contains("full_text_of"))) {
                agent_post_times_.push_back(e.ts_ms);
            }
        } else if (e.kind == EventKind::settings_change && e.payload && e.payload->value("stage", "") == "applied" &&
                   e.payload->contains("patch")) {
            try {
                (void)authority_.force_apply(e.payload->value("actor", e.author), (*e.payload)["patch"]);
            } catch (const SettingsError&) {
                // A patch that no longer validates against the current schema is skipped.
            }
        }
    }
}

std::vector<std::string> RoomEngine::humans() const {
    std::vector<std::string> out;
    for (const auto& p : roster_) {
        if (p.kind == ParticipantKind::human) out.push_back(p.name);
    }
    return out;
}

bool RoomEngine::has_participant(const std::string& name) const {
    return std::any_of(roster_.begin(), roster_.end(), [&](const Participant& p) { return p.name == name; });
}

void RoomEngine::ensure_participant(const std::string& name) {
    if (!has_participant(name)) roster_.push_back(Participant{name, ParticipantKind::human, false});
}

bool RoomEngine::idle() const { return pending_.empty() && queue_.empty() && !outstanding_; }

std::optional<std::uint64_t> RoomEngine::outstanding_request() const {
    if (!outstanding_) return std::nullopt;
    return outstanding_->id;
}

std::optional<Millis> RoomEngine::next_deadline() const {
    std::optional<Millis> best = control_.deadline();
    for (const auto& [_, p] : pending_) {
        if (p.state != Pending::State::waiting) continue;
        if (!best || p.action.at < *best) best = p.action.at;
    }
    return best;
}

ChatEvent RoomEngine::append(ChatEvent draft, Millis now, Effects& fx) {
    draft.ts_ms = now;
    draft.room = transcript_.room();
    auto event = transcript_.append(std::move(draft));
    fx.events.push_back(event);
    return event;
}

Effects RoomEngine::submit(ChatEvent draft, Millis now) {
    if (draft.author == config_.agent_name) throw InvalidEvent("the name " + draft.author + " belongs to the agent");
    switch (draft.kind) {
        case EventKind::message:
        case EventKind::reaction:
        case EventKind::typing_start:
        case EventKind::typing_stop:
        case EventKind::join:
        case EventKind::leave:
            break;
        default:
            throw InvalidEvent(std::string(to_string(draft.kind)) + " events go through the governance calls");
    }

    Effects fx;
    if (auto notice = control_.expire(now)) append(std::move(*notice), now, fx);

    const auto event = append(std::move(draft), now, fx);
    switch (event.kind) {
        case EventKind::join:
            ensure_participant(event.author);
            break;
        case EventKind::leave:
            std::erase_if(roster_, [&](const Participant& p) {
                return p.name == event.author && p.kind == ParticipantKind::human;
            });
            typing_.erase(event.author);
            break;
        case EventKind::typing_start:
            ensure_participant(event.author);
            typing_.insert(event.author);
            break;
        case EventKind::typing_stop:
            typing_.erase(event.author);
            break;
        case EventKind::message:
            ensure_participant(event.author);
            typing_.erase(event.author);
            handle_message(event, now, fx);
            break;
        default:
            ensure_participant(event.author);
            break;
    }
    release_deferred(now, fx);
    process_due(now, fx);
    return fx;
}

void RoomEngine::handle_message(const ChatEvent& message, Millis now, Effects& fx) {
    const int prior = human_messages_++;
    last_human_message_seq_ = message.seq;
    const auto& settings = authority_.settings();

    DecisionRecord rec;
    rec.trigger_seq = message.seq;
    rec.ts_ms = message.ts_ms;
    rec.author = message.author;
    rec.mode = settings.mode;
    rec.threshold = settings.threshold;
    rec.addressee = classify_addressee(message, roster_, config_.agent_name);

    const auto finish = [&](DecisionRecord&& r) {
        r.resolved = true;
        fx.resolved.push_back(r);
        log_.add(std::move(r));
    };

    if (auto answer = control_.on_human_message(message, now)) {
        rec.override_kind = "confirmation_reply";
        const auto before = fx.events.size();
        if (answer->reply == ConfirmationReply::affirm) {
            run_change(answer->responder, answer->pending.intent.patch, now, fx);
        } else {
            append(control_.discard_notice(*answer), now, fx);
        }
        if (fx.events.size() > before) rec.final.control_seq = fx.events[before].seq;
        finish(std::move(rec));
        return;
    }

    if (!should_invoke(rec.addressee, settings, ParticipantKind::human)) {
        if (rec.addressee.kind == AddresseeClass::Kind::other_addressed) rec.override_kind = "suppressed_other";
        finish(std::move(rec));
        return;
    }

    if (rec.addressee.kind == AddresseeClass::Kind::agent_addressed) {
        if (auto intent = detect_settings_intent(message, config_.agent_name)) {
            rec.override_kind = "settings_intent";
            if (settings.governance.auto_apply) {
                rec.final.control_seq = append(control_.acknowledge(*intent, message.author), now, fx).seq;
                run_change(message.author, intent->patch, now, fx);
            } else {
                auto request = control_.open(*intent, message.author, now, settings.governance.confirm_window_ms);
                rec.final.control_seq = append(std::move(request), now, fx).seq;
            }
            finish(std::move(rec));
            return;
        }
    }

    Pending p;
    p.trigger_seq = message.seq;
    p.trigger = message;
    p.addressee = rec.addressee;
    p.snapshot = settings;
    p.prior_human_messages = prior;
    p.context_seq = message.seq;
    p.order = next_order_++;
    log_.add(std::move(rec));
    pending_.emplace(message.seq, std::move(p));
    enqueue(Job{0, message.seq, false, false}, false, fx);
}

// Settings changes requested in conversation. Failures are reported in the
// room instead of surfacing as errors, since no client request is waiting.
void RoomEngine::run_change(const std::string& actor, const Json& patch, Millis now, Effects& fx) {
    ChangeOutcome outcome;
    try {
        outcome = authority_.request_change(actor, patch, humans());
    } catch (const GovernanceError& e) {
        ChatEvent notice;
        notice.author = config_.agent_name;
        notice.kind = EventKind::settings_change;
        notice.text = std::string("I couldn't change my settings: ") + e.what();
        notice.payload = Json{{"stage", "failed"}, {"requester", actor}, {"patch", patch},
                              {"reason", std::string(to_string(e.code()))}, {"origin", "conversation"}};
        append(std::move(notice), now, fx);
        return;
    }
    if (outcome.status == ChangeOutcome::Status::denied) {
        ChatEvent notice;
        notice.author = config_.agent_name;
        notice.kind = EventKind::settings_change;
        notice.text = "I can't apply that: " + outcome.reason + ".";
        notice.payload = Json{{"stage", "denied"}, {"requester", actor}, {"patch", patch},
                              {"reason", outcome.reason}, {"origin", "conversation"}};
        outcome.events.push_back(std::move(notice));
    }
    // Replay regenerates these from the conversation itself.
    for (auto& e : outcome.events) {
        if (!e.payload) e.payload = Json::object();
        (*e.payload)["origin"] = "conversation";
    }
    append_outcome_events(std::move(outcome.events), now, fx);
    outcome.events.clear();
    fx.change = std::move(outcome);
}

void RoomEngine::append_outcome_events(std::vector<ChatEvent> drafts, Millis now, Effects& fx) {
    for (auto& d : drafts) {
        const bool applied = d.kind == EventKind::settings_change && d.payload && d.payload->value("stage", "") == "applied";
        append(std::move(d), now, fx);
        if (applied) fx.settings_changed = true;
    }
}

Effects RoomEngine::request_change(const std::string& actor, const Json& patch, Millis now) {
    Effects fx;
    auto outcome = authority_.request_change(actor, patch, humans());
    const auto first = fx.events.size();
    append_outcome_events(outcome.events, now, fx);
    outcome.events.assign(fx.events.begin() + static_cast<std::ptrdiff_t>(first), fx.events.end());
    fx.change = std::move(outcome);
    return fx;
}

Effects RoomEngine::apply_preset(const std::string& actor, const std::string& preset, Millis now) {
    Effects fx;
    auto outcome = authority_.apply_preset(actor, preset, humans());
    append_outcome_events(outcome.events, now, fx);
    outcome.events = fx.events;
    fx.change = std::move(outcome);
    return fx;
}

Effects RoomEngine::cast_vote(int proposal_id, const std::string& actor, Ballot ballot, Millis now) {
    Effects fx;
    auto outcome = authority_.cast_vote(proposal_id, actor, ballot);
    append_outcome_events(outcome.events, now, fx);
    outcome.events = fx.events;
    fx.vote = std::move(outcome);
    return fx;
}

Effects RoomEngine::record_governance_event(ChatEvent recorded, Millis now) {
    Effects fx;
    recorded.seq = 0;
    recorded.thread_of.reset();
    const bool applied = recorded.kind == EventKind::settings_change && recorded.payload &&
                         recorded.payload->value("stage", "") == "applied" && recorded.payload->contains("patch");
    if (applied) {
        const auto& payload = *recorded.payload;
        const auto actor = payload.contains("actor") && payload["actor"].is_string() ? payload["actor"].get<std::string>()
                                                                                      : recorded.author;
        try {
            (void)authority_.force_apply(actor, payload["patch"]);
        } catch (const SettingsError& e) {
            throw InvalidEvent(std::string("recorded settings change does not apply: ") + e.what());
        }
        fx.settings_changed = true;
    }
    append(std::move(recorded), now, fx);
    return fx;
}

Effects RoomEngine::tick(Millis now) {
    Effects fx;
    if (auto notice = control_.expire(now)) append(std::move(*notice), now, fx);
    process_due(now, fx);
    return fx;
}

PromptConfig RoomEngine::prompt_for() const {
    PromptConfig c = prompt_base_;
    c.style = authority_.settings().style;
    c.directives = authority_.prompt_directives();
    return c;
}

void RoomEngine::enqueue(Job job, bool front, Effects& fx) {
    job.id = next_request_id_++;
    if (front) {
        queue_.push_front(job);
    } else {
        queue_.push_back(job);
    }
    pump(fx);
}

void RoomEngine::pump(Effects& fx) {
    while (!outstanding_ && !queue_.empty()) {
        const Job job = queue_.front();
        queue_.pop_front();
        const auto it = pending_.find(job.trigger_seq);
        if (it == pending_.end()) continue;
        auto& p = it->second;

        std::optional<Seq> upto;
        if (job.refresh) {
            p.context_seq = transcript_.last_seq();
        } else {
            upto = p.trigger_seq;
        }
        const auto context = transcript_.context_window(config_.context_events, upto);
        fx.requests.push_back(ProviderRequest{job.id, p.trigger, assemble_prompt(prompt_for(), context), prompt_base_.gen});
        outstanding_ = job;
    }
}

Effects RoomEngine::provider_result(std::uint64_t request_id, const GenerationResult& result, Millis now) {
    Effects fx;
    if (!outstanding_ || outstanding_->id != request_id) return fx;
    const Job job = *outstanding_;
    outstanding_.reset();

    const auto it = pending_.find(job.trigger_seq);
    if (it != pending_.end()) {
        auto& p = it->second;
        auto& rec = *log_.find(p.trigger_seq);
        if (result.error) rec.provider_error = *result.error;

        auto parsed = parse_decision(result.text, config_.agent_name);
        AgentDecision decision;
        if (const auto* err = std::get_if<ParseError>(&parsed)) {
            rec.parse_error = describe(*err);
            if (config_.retry_on_parse_error && !job.retry) {
                Job again = job;
                again.retry = true;
                enqueue(again, true, fx);
                process_due(now, fx);
                return fx;
            }
            decision = synthetic_pass(p.trigger.author);
        } else {
            decision = std::get<AgentDecision>(std::move(parsed));
        }

        auto action = decide(p.trigger, p.snapshot, decision, p.addressee);
        if (!job.refresh) {
            rec.invoked = true;
            rec.decision = decision;
            rec.override_kind = std::string(to_string(action.provenance.override_kind));
            rec.gate_result = std::string(to_string(action.kind));
            if (action.kind == AgentAction::Kind::silent) {
                const Seq seq = p.trigger_seq;
                pending_.erase(it);
                resolve(seq, fx);
            } else {
                p.action = std::move(action);
                schedule_initial(p, now, fx);
            }
        } else {
            rec.refresh_decision = decision;
            if (action.kind == AgentAction::Kind::silent) {
                rec.dropped = "stale_context";
                const Seq seq = p.trigger_seq;
                pending_.erase(it);
                resolve(seq, fx);
            } else {
                action.at = p.action.at;
                p.action = std::move(action);
                p.state = Pending::State::waiting;
                fire(p, now, fx);
            }
        }
    }
    pump(fx);
    process_due(now, fx);
    return fx;
}

RoomState RoomEngine::room_state(const Pending& p, Millis now) const {
    return RoomState{typing_, agent_post_times_, p.prior_human_messages, now};
}

void RoomEngine::schedule_initial(Pending& p, Millis now, Effects& fx) {
    auto& rec = *log_.find(p.trigger_seq);
    const auto result = schedule(p.action, p.snapshot.rate, room_state(p, now), false);
    rec.schedule = result;
    if (const auto* s = std::get_if<Scheduled>(&result)) {
        p.state = Pending::State::waiting;
        p.action.at = s->at;
    } else if (std::holds_alternative<Deferred>(result)) {
        p.state = Pending::State::deferred;
        rec.deferred_once = true;
    } else {
        const Seq seq = p.trigger_seq;
        pending_.erase(seq);
        resolve(seq, fx);
    }
}

void RoomEngine::release_deferred(Millis now, Effects& fx) {
    if (!typing_.empty()) return;
    std::vector<std::pair<std::uint64_t, Seq>> deferred;
    for (const auto& [seq, p] : pending_) {
        if (p.state == Pending::State::deferred) deferred.emplace_back(p.order, seq);
    }
    std::sort(deferred.begin(), deferred.end());
    for (const auto& [_, seq] : deferred) {
        const auto it = pending_.find(seq);
        if (it != pending_.end()) schedule_initial(it->second, now, fx);
    }
}

void RoomEngine::process_due(Millis now, Effects& fx) {
    for (;;) {
        Pending* next = nullptr;
        for (auto& [_, p] : pending_) {
            if (p.state != Pending::State::waiting || p.action.at > now) continue;
            if (!next || std::tie(p.action.at, p.order) < std::tie(next->action.at, next->order)) next = &p;
        }
        if (!next) return;
        fire(*next, now, fx);
    }
}

void RoomEngine::fire(Pending& p, Millis now, Effects& fx) {
    auto& rec = *log_.find(p.trigger_seq);
    if (!p.refreshed && last_human_message_seq_ > p.context_seq) {
        p.refreshed = true;
        p.state = Pending::State::awaiting_refresh;
        rec.refreshed = true;
        enqueue(Job{0, p.trigger_seq, true, false}, false, fx);
        return;
    }

    const auto result = schedule(p.action, p.snapshot.rate, room_state(p, now), true);
    if (std::holds_alternative<Deferred>(result)) {
        p.state = Pending::State::deferred;
        rec.deferred_once = true;
        rec.schedule = result;
        return;
    }
    if (std::holds_alternative<Suppressed>(result)) {
        rec.schedule = result;
        const Seq seq = p.trigger_seq;
        pending_.erase(seq);
        resolve(seq, fx);
        return;
    }
    if (consolidate_into(p) && p.action.at > now) return;
    emit(p, now, fx);
}

bool RoomEngine::consolidate_into(Pending& p) {
    const Millis window = p.snapshot.rate.consolidate_window_ms;
    if (window <= 0 || p.merged || p.action.kind != AgentAction::Kind::post) return false;

    std::vector<std::tuple<Millis, std::uint64_t, Seq>> members;
    for (const auto& [seq, q] : pending_) {
        if (&q == &p || q.state != Pending::State::waiting || q.merged || q.action.kind != AgentAction::Kind::post) continue;
        if (q.action.at < p.action.at || q.action.at - p.action.at > window) continue;
        members.emplace_back(q.action.at, q.order, seq);
    }
    if (members.empty()) return false;
    std::sort(members.begin(), members.end());

    std::vector<AgentAction> group{p.action};
    for (const auto& [at, order, seq] : members) group.push_back(pending_.at(seq).action);
    auto merged = consolidate(std::move(group), window).front();
    merged.placement = place(merged.reply, p.snapshot, p.trigger_seq);
    p.action = std::move(merged);
    p.merged = true;
    p.refreshed = true;
    for (const auto& [at, order, seq] : members) {
        log_.find(seq)->merged_into = p.trigger_seq;
        pending_.erase(seq);
    }
    return true;
}

void RoomEngine::emit(Pending& p, Millis now, Effects& fx) {
    const auto& action = p.action;
    Json payload{{"trigger_seqs", action.provenance.trigger_seqs}};
    DecisionRecord::Final fin;
    fin.emitted_at = now;

    if (action.kind == AgentAction::Kind::react) {
        ChatEvent e;
        e.author = config_.agent_name;
        e.kind = EventKind::reaction;
        e.emoji = std::string(map_reaction(*action.reaction));
        e.thread_of = p.trigger_seq;
        e.payload = payload;
        fin.reaction = std::string(token_name(*action.reaction));
        fin.reaction_seq = append(std::move(e), now, fx).seq;
    } else {
        ChatEvent e;
        e.author = config_.agent_name;
        e.kind = EventKind::message;
        payload["placement"] = std::string(to_string(action.placement.mode));
        switch (action.placement.mode) {
            case Placement::Mode::channel:
                e.text = action.reply;
                break;
            case Placement::Mode::thread:
                e.text = action.reply;
                e.thread_of = action.placement.parent;
                break;
            case Placement::Mode::truncated:
                e.text = action.placement.preview;
                payload["truncated"] = true;
                break;
        }
        e.payload = payload;
        const auto posted = append(std::move(e), now, fx);
        fin.posted_seq = posted.seq;
        if (action.placement.mode == Placement::Mode::truncated) {
            ChatEvent full;
            full.author = config_.agent_name;
            full.kind = EventKind::message;
            full.text = action.reply;
            full.thread_of = action.placement.parent;
            full.payload = Json{{"trigger_seqs", action.provenance.trigger_seqs}, {"full_text_of", posted.seq}};
            fin.full_text_seq = append(std::move(full), now, fx).seq;
        }
        agent_post_times_.push_back(now);
    }

    const auto triggers = action.provenance.trigger_seqs;
    pending_.erase(p.trigger_seq);
    for (const Seq seq : triggers) {
        if (auto* rec = log_.find(seq)) rec->final = fin;
        resolve(seq, fx);
    }
}

void RoomEngine::resolve(Seq trigger_seq, Effects& fx) {
    auto* rec = log_.find(trigger_seq);
    if (!rec) return;
    rec->resolved = true;
    fx.resolved.push_back(*rec);
}

}  // namespace chorus
