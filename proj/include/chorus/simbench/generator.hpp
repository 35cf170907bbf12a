#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chorus/core/types.hpp"
#include "chorus/provider/backend.hpp"

namespace chorus {

struct GeneratorOptions {
    int messages = 40;
    std::vector<std::string> humans{"Ana", "Ben", "Chidi"};
    std::string agent_name = "Koala";
    double addressed_rate = 0.15;  // messages that mention the agent
    double other_rate = 0.15;      // messages that mention another human
    double typing_rate = 0.2;      // messages preceded by someone else's typing burst
    double reaction_rate = 0.2;    // human reactions after a message
    double long_reply_rate = 0.05;
    double malformed_rate = 0.05;  // provider output that does not parse
    double react_rate = 0.15;      // decisions that answer with a reaction token
};

struct GeneratedCase {
    std::uint64_t seed = 0;
    std::vector<ChatEvent> transcript;
    ProviderScript script;
};

// Deterministic for a given seed on every platform: draws use raw 64-bit
// outputs of mt19937_64 only, never the standard distributions.
GeneratedCase generate_case(std::uint64_t seed, const GeneratorOptions& options = {});

}  // namespace chorus
