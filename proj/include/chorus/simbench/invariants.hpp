#pragma once

#include <string>
#include <vector>

#include "chorus/simbench/replay.hpp"

namespace chorus {

struct InvariantViolation {
    std::string invariant;
    Seq seq = 0;
    std::string detail;
};

std::string describe(const InvariantViolation& v);

// Structural checks over a replayed room: seq/timestamp order, provenance of
// every agent output, forced replies, gating consistency with the logged
// decision, and lossless truncation.
std::vector<InvariantViolation> check_invariants(const ReplayResult& result);

}  // namespace chorus
