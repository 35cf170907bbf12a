#pragma once

#include <string>
#include <utility>
#include <vector>

#include "chorus/simbench/replay.hpp"

namespace chorus {

struct Metrics {
    int human_messages = 0;
    int agent_posts = 0;  // full-text companions of truncated posts are not counted
    int agent_reactions = 0;
    double agent_message_share = 0.0;  // agent_posts / (agent_posts + human_messages)
    int forced_reply_count = 0;
    int suppressed_count = 0;
    int dropped_count = 0;
    double mean_reply_delay_ms = 0.0;  // trigger timestamp to emission, over emitted actions
    int typing_interruptions = 0;      // agent posts emitted while a human was typing

    bool operator==(const Metrics&) const = default;
};

Metrics compute_metrics(const ReplayResult& result);

struct SweepPoint {
    std::string label;
    Json patch;
    Metrics metrics;
};

// Replays the same input once per settings patch.
std::vector<SweepPoint> sweep(const std::vector<ChatEvent>& input, const ProviderScript& script,
                              const ReplayOptions& base, const std::vector<std::pair<std::string, Json>>& points);

std::vector<std::pair<std::string, Json>> threshold_points(const std::vector<ThresholdLevel>& levels);
std::vector<std::pair<std::string, Json>> rate_cap_points(const std::vector<int>& caps);
std::vector<std::pair<std::string, Json>> delay_points(const std::vector<Millis>& delays);

std::string sweep_tsv(const std::vector<SweepPoint>& points);
std::string sweep_table(const std::vector<SweepPoint>& points);

}  // namespace chorus
