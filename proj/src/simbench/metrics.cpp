#include "chorus/simbench/metrics.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

namespace chorus {

namespace {

bool is_full_text_companion(const ChatEvent& e) { return e.payload && e.payload->contains("full_text_of"); }

}  // namespace

Metrics compute_metrics(const ReplayResult& result) {
    Metrics m;
    std::set<std::string> typing;
    for (const auto& e : result.transcript) {
        const bool agent = e.author == result.agent_name;
        switch (e.kind) {
            case EventKind::typing_start:
                typing.insert(e.author);
                break;
            case EventKind::typing_stop:
            case EventKind::leave:
                typing.erase(e.author);
                break;
            case EventKind::message:
                if (!agent) {
                    typing.erase(e.author);
                    ++m.human_messages;
                } else if (!is_full_text_companion(e)) {
                    ++m.agent_posts;
                    if (!typing.empty()) ++m.typing_interruptions;
                }
                break;
            case EventKind::reaction:
                if (agent) ++m.agent_reactions;
                break;
            default:
                break;
        }
    }
    const int total = m.agent_posts + m.human_messages;
    m.agent_message_share = total == 0 ? 0.0 : static_cast<double>(m.agent_posts) / total;

    double delay_sum = 0;
    int emitted = 0;
    for (const auto& r : result.log.records()) {
        if (r.override_kind == "forced_reply" || r.override_kind == "forced_reply_conflict") ++m.forced_reply_count;
        if (r.schedule && std::holds_alternative<Suppressed>(*r.schedule)) ++m.suppressed_count;
        if (r.dropped) ++m.dropped_count;
        if (r.final.emitted_at) {
            delay_sum += static_cast<double>(*r.final.emitted_at - r.ts_ms);
            ++emitted;
        }
    }
    m.mean_reply_delay_ms = emitted == 0 ? 0.0 : delay_sum / emitted;
    return m;
}

std::vector<SweepPoint> sweep(const std::vector<ChatEvent>& input, const ProviderScript& script,
                              const ReplayOptions& base, const std::vector<std::pair<std::string, Json>>& points) {
    std::vector<SweepPoint> out;
    for (const auto& [label, patch] : points) {
        ReplayOptions options = base;
        options.settings = apply_patch(base.settings, patch);
        out.push_back(SweepPoint{label, patch, compute_metrics(replay(input, script, options))});
    }
    return out;
}

std::vector<std::pair<std::string, Json>> threshold_points(const std::vector<ThresholdLevel>& levels) {
    std::vector<std::pair<std::string, Json>> out;
    for (const auto level : levels) {
        out.emplace_back("threshold=" + std::string(to_string(level)), Json{{"threshold", std::string(to_string(level))}});
    }
    return out;
}

std::vector<std::pair<std::string, Json>> rate_cap_points(const std::vector<int>& caps) {
    std::vector<std::pair<std::string, Json>> out;
    for (const int cap : caps) {
        out.emplace_back("max_posts_per_minute=" + std::to_string(cap),
                         Json{{"rate", {{"max_posts_per_minute", cap}}}});
    }
    return out;
}

std::vector<std::pair<std::string, Json>> delay_points(const std::vector<Millis>& delays) {
    std::vector<std::pair<std::string, Json>> out;
    for (const Millis d : delays) {
        out.emplace_back("initial_delay_ms=" + std::to_string(d), Json{{"rate", {{"initial_delay_ms", d}}}});
    }
    return out;
}

namespace {

const std::vector<std::string> kColumns = {
    "point",          "human_messages", "agent_posts",     "agent_reactions",      "agent_message_share",
    "forced_replies", "suppressed",     "dropped",         "mean_reply_delay_ms", "typing_interruptions",
};

std::vector<std::string> row(const SweepPoint& p) {
    const auto& m = p.metrics;
    return {p.label,
            std::to_string(m.human_messages),
            std::to_string(m.agent_posts),
            std::to_string(m.agent_reactions),
            fmt::format("{:.4f}", m.agent_message_share),
            std::to_string(m.forced_reply_count),
            std::to_string(m.suppressed_count),
            std::to_string(m.dropped_count),
            fmt::format("{:.1f}", m.mean_reply_delay_ms),
            std::to_string(m.typing_interruptions)};
}

std::string join(const std::vector<std::string>& cells, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += sep;
        out += cells[i];
    }
    return out;
}

}  // namespace

std::string sweep_tsv(const std::vector<SweepPoint>& points) {
    std::string out = join(kColumns, "\t") + "\n";
    for (const auto& p : points) out += join(row(p), "\t") + "\n";
    return out;
}

std::string sweep_table(const std::vector<SweepPoint>& points) {
    std::vector<std::vector<std::string>> rows{kColumns};
    for (const auto& p : points) rows.push_back(row(p));
    std::vector<std::size_t> width(kColumns.size(), 0);
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    std::string out;
    for (const auto& r : rows) {
        std::string line;
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) line += "  ";
            // Labels left-aligned, numbers right-aligned.
            line += i == 0 ? fmt::format("{:<{}}", r[i], width[i]) : fmt::format("{:>{}}", r[i], width[i]);
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + "\n";
    }
    return out;
}

}  // namespace chorus
