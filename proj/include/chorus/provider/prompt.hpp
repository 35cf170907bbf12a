#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "chorus/core/types.hpp"
#include "chorus/governance/settings.hpp"

namespace chorus {

struct GenParams {
    double creativity = 0.5;  // [0,1], mapped onto sampling temperature by remote backends
    int max_output_tokens = 256;
};

struct PromptConfig {
    std::string agent_name = "Koala";
    std::string system_text;  // may contain {{agent_name}}
    std::string one_shot;     // may contain {{agent_name}}
    StylePolicy style;
    std::vector<std::string> directives;  // installed by presets
    GenParams gen;
    std::size_t budget_chars = 0;  // 0 means unlimited

    // Prompt assets compiled in from data/prompt/.
    static PromptConfig builtin(std::string agent_name = "Koala");
};

void validate(const PromptConfig& config);

// Reads system.txt and one_shot.txt from `dir`.
PromptConfig load_prompt_config(const std::filesystem::path& dir, std::string agent_name);

std::string render_template(std::string_view text, std::string_view agent_name);

// "Name: text" for messages; reactions render as "Name: :emoji:".
std::string render_line(const ChatEvent& event);

// System section (plus style and preset directives), the one-shot example in
// its own conversation block, then the live conversation ending at the
// trigger. When over budget the oldest live lines go first; the one-shot and
// the triggering line are always kept.
std::string assemble_prompt(const PromptConfig& config, std::span<const ChatEvent> context);

std::vector<std::string> style_directives(const StylePolicy& style);

}  // namespace chorus
