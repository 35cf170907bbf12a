#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "chorus/gating/room_engine.hpp"
#include "chorus/governance/presets.hpp"
#include "chorus/provider/backend.hpp"

namespace chorus {

struct ReplayOptions {
    AgentSettings settings;
    PresetCatalog presets = PresetCatalog::builtin();
    EngineConfig engine;
    PromptConfig prompt = PromptConfig::builtin();
    std::string room;  // empty: the input's room id
};

struct ReplayResult {
    std::vector<ChatEvent> transcript;
    DecisionLog log;
    std::map<Seq, Seq> input_to_output;  // replayed input seq -> output seq
    std::vector<std::string> warnings;
    AgentSettings final_settings;
    std::string agent_name;
};

// Thrown for input that cannot be replayed. `index` is the 1-based position
// of the offending event in the input (its line number in a JSONL file
// without blank lines).
class ReplayError : public std::runtime_error {
public:
    ReplayError(std::size_t index, const std::string& what)
        : std::runtime_error("event " + std::to_string(index) + ": " + what), index_(index) {}
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

// Re-runs the agent over a recorded transcript on a simulated clock.
//
// Human events are re-submitted at their recorded timestamps. Agent events in
// the input are dropped and regenerated, except applied settings changes made
// outside the conversation, which are re-applied at their position. Script
// rules match on the *input* seq of the triggering message. When an agent
// action and a human event share a timestamp the human event goes first.
ReplayResult replay(const std::vector<ChatEvent>& input, const ProviderScript& script, const ReplayOptions& options);

}  // namespace chorus
