#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chorus/core/types.hpp"

namespace chorus {

// A named role/persona: a settings patch plus extra system-prompt directives.
struct BehaviorPreset {
    std::string id;
    std::string label;
    Json settings_patch = Json::object();
    std::vector<std::string> prompt_patch;
};

class PresetCatalog {
public:
    PresetCatalog() = default;
    explicit PresetCatalog(std::vector<BehaviorPreset> presets);

    // Brainstormer, Summarizer, Critic, Devil's Advocate.
    static PresetCatalog builtin();

    const BehaviorPreset* find(const std::string& id) const;
    const std::vector<BehaviorPreset>& all() const { return presets_; }

private:
    std::vector<BehaviorPreset> presets_;
};

Json to_json(const BehaviorPreset& p);
Json to_json(const PresetCatalog& catalog);

// Strict: every settings_patch must validate; ids must be unique. Raises SettingsError.
PresetCatalog presets_from_json(const Json& j);
PresetCatalog load_presets(const std::filesystem::path& path);

}  // namespace chorus
