#include "chorus/simbench/generator.hpp"

#include <random>
#include <set>

#include "chorus/core/decision.hpp"
#include "chorus/provider/decision_parser.hpp"

namespace chorus {

namespace {

class Draw {
public:
    explicit Draw(std::uint64_t seed) : rng_(seed) {}

    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : rng_() % n; }
    double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    bool chance(double p) { return unit() < p; }
    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[below(v.size())];
    }

private:
    std::mt19937_64 rng_;
};

const std::vector<std::string> kPhrases = {
    "what about a picnic on saturday",  "I think the budget is too tight", "we could ask the venue for a discount",
    "has anyone booked the room yet",   "let's keep the agenda short",     "the second option looks better to me",
    "I can bring snacks",               "maybe we start at ten instead",    "does the deadline still hold",
    "I'm not sure that works for me",   "good point",                       "we should write this down",
};

const std::vector<std::string> kReplies = {
    "A short survey might settle it quickly.",
    "Splitting the task between two people could help.",
    "Starting with the cheapest option keeps the risk low.",
    "It may help to list what everyone already agreed on.",
    "A quick vote could break the tie.",
};

std::string long_reply(Draw& draw) {
    std::string out;
    while (out.size() < 1400) {
        if (!out.empty()) out += ' ';
        out += draw.pick(kReplies);
    }
    return out;
}

}  // namespace

GeneratedCase generate_case(std::uint64_t seed, const GeneratorOptions& options) {
    if (options.humans.size() < 2) throw std::invalid_argument("generator needs at least two humans");
    Draw draw(seed);
    GeneratedCase out;
    out.seed = seed;

    Millis ts = 1'000;
    Seq seq = 0;
    const auto push = [&](ChatEvent e) {
        e.seq = ++seq;
        e.ts_ms = ts;
        e.room = "generated";
        out.transcript.push_back(std::move(e));
    };

    for (const auto& h : options.humans) {
        ChatEvent join;
        join.author = h;
        join.kind = EventKind::join;
        push(join);
        ts += 100;
    }

    std::vector<Seq> human_messages;
    std::set<std::string> typing;
    const auto tokens = all_reaction_tokens();
    for (int i = 0; i < options.messages; ++i) {
        ts += 500 + static_cast<Millis>(draw.below(40'000));
        const auto& author = draw.pick(options.humans);

        if (draw.chance(options.typing_rate)) {
            std::string typist = draw.pick(options.humans);
            if (typist == author) typist = options.humans[(draw.below(options.humans.size() - 1) + 1) % options.humans.size()];
            if (typist == author) typist = options.humans.front() == author ? options.humans.back() : options.humans.front();
            ChatEvent start;
            start.author = typist;
            start.kind = EventKind::typing_start;
            push(start);
            typing.insert(typist);
            ts += 200 + static_cast<Millis>(draw.below(6'000));
            if (draw.chance(0.7)) {
                ChatEvent stop;
                stop.author = typist;
                stop.kind = EventKind::typing_stop;
                push(stop);
                typing.erase(typist);
                ts += static_cast<Millis>(draw.below(3'000));
            }
        }

        ChatEvent msg;
        msg.author = author;
        msg.kind = EventKind::message;
        std::string text = draw.pick(kPhrases);
        const double roll = draw.unit();
        if (roll < options.addressed_rate) {
            text = options.agent_name + ", " + text + "?";
        } else if (roll < options.addressed_rate + options.other_rate) {
            std::string other = draw.pick(options.humans);
            if (other == author) other = options.humans.front() == author ? options.humans.back() : options.humans.front();
            text = other + ", " + text + "?";
        }
        msg.text = text;
        push(msg);
        typing.erase(author);
        human_messages.push_back(seq);

        ScriptRule rule;
        rule.seq = seq;
        if (draw.chance(options.malformed_rate)) {
            rule.emit = draw.chance(0.5) ? "I would rather not answer in JSON." : "{\"source\": \"" + author + "\", \"value\": 50";
        } else {
            AgentDecision d;
            d.source = author;
            d.target = options.agent_name;
            d.value = static_cast<int>(draw.below(101));
            d.verdict = draw.chance(0.6) ? Verdict::SUBMIT : Verdict::PASS;
            if (draw.chance(options.react_rate)) {
                d.reaction = tokens[draw.below(tokens.size())];
            } else {
                d.reply = draw.chance(options.long_reply_rate) ? long_reply(draw) : draw.pick(kReplies);
            }
            rule.emit = serialize_decision(d, options.agent_name);
        }
        out.script.rules.push_back(std::move(rule));

        if (draw.chance(options.reaction_rate) && !human_messages.empty()) {
            ts += 100 + static_cast<Millis>(draw.below(2'000));
            ChatEvent react;
            react.author = draw.pick(options.humans);
            react.kind = EventKind::reaction;
            react.emoji = "+1";
            react.thread_of = human_messages[draw.below(human_messages.size())];
            push(react);
        }
    }

    // Sessions end with every typing burst closed.
    ts += 1'000;
    for (const auto& typist : typing) {
        ChatEvent stop;
        stop.author = typist;
        stop.kind = EventKind::typing_stop;
        push(stop);
    }
    return out;
}

}  // namespace chorus
